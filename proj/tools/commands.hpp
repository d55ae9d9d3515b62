#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sketchscene/config.hpp"

namespace sketchscene::cli {

enum ExitCode : int {
    kOk         = 0,
    kInvalid    = 1,  // scene or config failed validation
    kFailure    = 2,  // runtime failure, including missing input files
    kUsage      = 64,
};

struct Common {
    std::optional<std::filesystem::path> config_path;
    std::string backend;  // overrides the config file when set
    std::filesystem::path out = "out";
    int pool_size             = 0;  // overrides the config file when > 0

    PipelineConfig resolve() const;
};

struct RenderArgs {
    std::filesystem::path scene;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    int steps    = 50;
    std::string global_prompt;
    std::string background_prompt;
    double guidance_scale = 7.5;
};

struct BenchArgs {
    std::filesystem::path scenes_dir;
    std::vector<std::uint64_t> seeds;
    std::vector<double> alphas;
    int steps = 50;
    int jobs  = 1;
};

// "0..50" (inclusive), "7" or "1,4,9".
std::vector<std::uint64_t> parse_seeds(const std::string& text);
// "0.4,0.5,0.6"; empty or malformed lists throw std::invalid_argument.
std::vector<double> parse_alphas(const std::string& text);

int scene_validate(const Common& common, const std::filesystem::path& scene);
int objects_generate(const Common& common, const std::filesystem::path& scene, std::uint64_t seed,
                     const std::optional<std::string>& object_id);
int identity_train(const Common& common, const std::filesystem::path& scene, std::optional<int> steps,
                   std::optional<double> lr, std::uint64_t seed);
int scene_compose(const Common& common, const std::filesystem::path& scene);
int scene_render(const Common& common, const RenderArgs& args);
int scene_sweep(const Common& common, const RenderArgs& args, const std::vector<double>& alphas);
int bench_run(const Common& common, const BenchArgs& args);
int serve(const Common& common, const std::string& host, int port, const std::optional<std::filesystem::path>& root);

}  // namespace sketchscene::cli
