#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sketchscene/adapters.hpp"
#include "sketchscene/backend.hpp"
#include "sketchscene/pipeline.hpp"

namespace sketchscene {

inline constexpr const char* kConfigEnvVar = "SKETCHSCENE_CONFIG";

struct AdapterConfig {
    std::string mode = "stub";  // stub | http | record | replay
    HttpEndpoint endpoint;
    std::filesystem::path store;  // record/replay directory
};

struct PipelineConfig {
    std::string backend = "toy";  // toy | http
    ToyOptions toy;
    HttpEndpoint backend_endpoint;
    BackendProfile remote_profile{"remote", 4, 8, false, 77, 768};
    AdapterConfig generator;
    AdapterConfig segmenter;
    int generator_resolution = 0;
    int retries              = 2;
    int pool_size            = 1;
    std::filesystem::path artifact_root = "sketchscene-store";
};

// Parses a JSON config document. Unknown keys are ignored; bad values raise
// ConfigError.
PipelineConfig parse_config(const std::string& text);

// Explicit path, else $SKETCHSCENE_CONFIG, else built-in defaults.
PipelineConfig load_config(const std::optional<std::filesystem::path>& path);

BackendFactory make_backend_factory(const PipelineConfig& cfg);
AdapterSet make_adapters(const PipelineConfig& cfg);

}  // namespace sketchscene
