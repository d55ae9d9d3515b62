#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sketchscene/raster.hpp"

namespace sketchscene {

inline constexpr int kSceneSchemaVersion = 1;
inline constexpr int kDefaultCanvas      = 512;

struct Point {
    double x = 0;
    double y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

using Polyline = std::vector<Point>;

struct ObjectAnnotation {
    std::string object_id;
    Rect region;  // pixel box, may poke outside the canvas; clipped downstream
    std::vector<Polyline> strokes;
    std::string class_label;
    std::string prompt_text;  // empty -> "a photo of a {class_label}"

    std::string generation_prompt() const;

    friend bool operator==(const ObjectAnnotation&, const ObjectAnnotation&) = default;
};

struct CanvasSize {
    int width  = kDefaultCanvas;
    int height = kDefaultCanvas;
    friend bool operator==(const CanvasSize&, const CanvasSize&) = default;
};

// One scene: the sketch bitmap plus ordered object annotations.
// Annotation order is the z-order: later objects paint over earlier ones.
struct SceneSpec {
    std::string scene_id;
    CanvasSize canvas;
    GrayImage sketch;
    std::string sketch_path = "sketch.png";  // relative to the scene document
    std::vector<ObjectAnnotation> objects;
    std::string background_text;
    std::chrono::sys_seconds created_at{};

    const ObjectAnnotation* find(std::string_view object_id) const;
    Rect canvas_rect() const { return Rect{0, 0, canvas.width, canvas.height}; }

    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

// Where a letterboxed sketch crop sits inside the generator-resolution square.
struct CropGeometry {
    Rect box;          // source box on the canvas, already clipped
    int offset_x = 0;  // content origin inside the padded square
    int offset_y = 0;
    int scaled_width  = 0;
    int scaled_height = 0;
    int resolution    = 0;  // side of the padded square

    double scale() const { return box.width > 0 ? static_cast<double>(scaled_width) / box.width : 0.0; }
    Rect content() const { return Rect{offset_x, offset_y, scaled_width, scaled_height}; }

    friend bool operator==(const CropGeometry&, const CropGeometry&) = default;
};

struct ObjectAsset {
    std::string object_id;
    RgbImage image;
    Mask mask;
    std::string identity_token;
    std::optional<std::string> embedding_id;
    std::optional<CropGeometry> geometry;
    std::uint64_t seed = 0;
    int attempts       = 1;

    friend bool operator==(const ObjectAsset&, const ObjectAsset&) = default;
};

std::string identity_token_for(std::string_view object_id);

struct RenderConfig {
    int steps    = 50;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    int height   = kDefaultCanvas;
    int width    = kDefaultCanvas;
    std::string global_prompt;      // empty -> built from the scene
    std::string background_prompt;  // empty -> built from the scene
    double guidance_scale = 7.5;    // passed through to real adapters only

    friend bool operator==(const RenderConfig&, const RenderConfig&) = default;
};

inline const std::vector<double> kSweepPreset = {0.4, 0.5, 0.6};
inline constexpr std::uint64_t kSeedRangeMax  = 50;

struct Violation {
    std::string invariant;  // short machine-readable code, e.g. "box.width"
    std::string object_id;  // empty for scene-level violations
    std::string message;

    friend bool operator==(const Violation&, const Violation&) = default;
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate_scene(const SceneSpec& spec);
ValidationReport validate_render_config(const RenderConfig& cfg, int downsample_factor);
ValidationReport validate_asset(const ObjectAsset& asset);

// Resolves a document-relative sketch path into a raster.
using SketchLoader = std::function<GrayImage(const std::string& relative_path)>;

// The document carries everything except raster bytes; the sketch is
// referenced through sketch_path. Unknown fields are ignored on read and
// never written back.
std::string serialize_scene(const SceneSpec& spec);
// Throws ParseError (with byte offset) or VersionError. Without a loader the
// sketch is left as a blank white canvas.
SceneSpec deserialize_scene(std::string_view document, const SketchLoader& loader = {});

// Document + sibling sketch PNG.
void save_scene(const SceneSpec& spec, const std::filesystem::path& document_path);
SceneSpec load_scene(const std::filesystem::path& document_path);

std::string format_timestamp(std::chrono::sys_seconds t);
std::chrono::sys_seconds parse_timestamp(std::string_view text);

std::string describe(const Violation& v);

}  // namespace sketchscene
