#pragma once

#include <cstdint>
#include <string_view>

#include "sketchscene/adapters.hpp"
#include "sketchscene/scene_model.hpp"

namespace sketchscene {

struct SketchCrop {
    GrayImage image;  // resolution x resolution, letterboxed on white
    CropGeometry geometry;
};

// Cuts the (canvas-clipped) annotation box out of the scene sketch and
// letterboxes it into a square of side `resolution`: aspect preserved,
// content centred, nearest-neighbour resampling. Throws NotFoundError for an
// unknown object and PlacementError when the box misses the canvas.
SketchCrop crop_object_sketch(const SceneSpec& spec, std::string_view object_id, int resolution);

// Inverse of the letterbox: resamples the crop content back to box size.
GrayImage restore_crop(const SketchCrop& crop);

// Per-object seed: scene seed + stable hash of the object id.
std::uint64_t object_seed(std::uint64_t scene_seed, std::string_view object_id);

// Keeps the largest 4-connected foreground component and fills its holes.
Mask clean_mask(const Mask& raw);

struct ObjectGenRequest {
    ObjectAnnotation annotation;
    SketchCrop crop;
    std::uint64_t seed = 0;
    int retries        = 2;  // extra attempts after an empty mask
};

ObjectGenRequest make_object_request(const SceneSpec& spec, std::string_view object_id, std::uint64_t scene_seed,
                                     int resolution, int retries = 2);

// Generates, segments and cleans one object. Attempt k (0-based) uses seed + k;
// throws ObjectGenerationError once every attempt produced an empty mask.
ObjectAsset generate_object(const ObjectGenRequest& req, SketchGenerator& generator, Segmenter& segmenter);

}  // namespace sketchscene
