#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sketchscene/adapters.hpp"
#include "sketchscene/backend.hpp"
#include "sketchscene/identity.hpp"
#include "sketchscene/inference.hpp"
#include "sketchscene/scene_model.hpp"

namespace sketchscene {

struct AdapterSet {
    std::shared_ptr<SketchGenerator> generator;
    std::shared_ptr<Segmenter> segmenter;
    int resolution = 0;  // generator input side; 0 -> max(canvas width, height)
    int retries    = 2;

    int resolution_for(const SceneSpec& spec) const;
    std::string config_hash() const;
};

AdapterSet stub_adapters();

// Generates assets for every object (or only `only`) in annotation order.
std::vector<ObjectAsset> generate_objects(const SceneSpec& spec, const AdapterSet& adapters, std::uint64_t scene_seed,
                                          const std::optional<std::string>& only = std::nullopt);

// Asset directory: image.png, mask.png, asset.json.
void save_asset(const ObjectAsset& asset, const std::filesystem::path& dir, const std::string& generator_config_hash);
ObjectAsset load_asset(const std::filesystem::path& dir);
std::string asset_metadata(const ObjectAsset& asset, const std::string& generator_config_hash);

// On-disk layout of one scene's artifacts (shared by the CLI --out tree and
// the service store):
//   <root>/assets/<object_id>/...
//   <root>/identities/<object_id>.{sst,json}
//   <root>/renders/<name>/{render.png,manifest.json,timing.json}
class SceneWorkspace {
public:
    explicit SceneWorkspace(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path asset_dir(const std::string& object_id) const { return root_ / "assets" / object_id; }
    std::filesystem::path identity_stem(const std::string& object_id) const { return root_ / "identities" / object_id; }
    std::filesystem::path render_dir(const std::string& name) const { return root_ / "renders" / name; }

    // Stored assets keyed by the scene's objects; missing ones are skipped.
    std::vector<ObjectAsset> load_assets(const SceneSpec& spec) const;
    std::vector<IdentityEmbedding> load_identities(const SceneSpec& spec) const;

private:
    std::filesystem::path root_;
};

struct RenderArtifacts {
    std::vector<std::uint8_t> image_png;
    std::string manifest;  // deterministic; no wall-clock content
    std::string timing;    // per-step wall time, kept apart from the manifest
    RenderDiagnostics diagnostics;
    PromptPair prompts;
    CompositeGuide guide;
    InferenceResult inference;
};

using ProgressFn = std::function<void(int step, int total, const std::string& note)>;

// Fills in assets missing from `assets` using the adapters and cfg.seed.
std::vector<ObjectAsset> complete_assets(const SceneSpec& spec, std::vector<ObjectAsset> assets,
                                         const AdapterSet& adapters, std::uint64_t scene_seed);

// compose -> prompts -> scene inference -> diagnostics -> encoded artifacts.
// Prompts left empty in cfg are built from the scene; objects without a
// trained identity fall back to their class label.
RenderArtifacts render_scene(const SceneSpec& spec, std::span<const ObjectAsset> assets,
                             std::span<const IdentityEmbedding> embeddings, const RenderConfig& cfg, Backend& backend,
                             const ProgressFn& progress = {});

// Writes render.png, manifest.json and timing.json into dir.
void write_render(const RenderArtifacts& artifacts, const std::filesystem::path& dir);

std::string render_name(const RenderConfig& cfg);

// Horizontal strip of images separated by a 4 px white gutter.
RgbImage make_grid(std::span<const RgbImage> images);

}  // namespace sketchscene
