#pragma once

#include <span>
#include <string>
#include <vector>

#include "sketchscene/diffusion.hpp"
#include "sketchscene/scene_model.hpp"

namespace sketchscene {

inline constexpr std::uint8_t kFillerGray = 128;

struct Placement {
    std::string object_id;
    Rect box;       // target rectangle before canvas clipping
    double scale = 1.0;
    int z_index  = 0;

    friend bool operator==(const Placement&, const Placement&) = default;
};

struct PlacedAsset {
    RgbImage image;  // canvas-sized; meaningful only where mask is set
    Mask mask;       // canvas-sized
    Placement placement;
};

// Foreground guide for scene inference: x_init, M_init, m_init.
struct CompositeGuide {
    RgbImage x_init;
    Mask full_mask;
    LatentMask latent_mask;
    int factor = 0;
    std::vector<Placement> placement_log;

    friend bool operator==(const CompositeGuide&, const CompositeGuide&) = default;
};

// Maps the asset into the annotation box on a canvas of the given size.
// Assets carrying crop geometry map their letterbox content onto the recorded
// (clipped) box; others are stretched onto the annotation box. Images are
// resampled bilinearly, masks nearest-neighbour. Throws PlacementError when
// the target misses the canvas.
PlacedAsset place_asset(const ObjectAsset& asset, const ObjectAnnotation& annotation, int canvas_width,
                        int canvas_height);

// Paints assets in annotation order (later on top) over neutral gray.
// Throws CompositionError naming the first object without an asset.
CompositeGuide compose_guide(const SceneSpec& spec, std::span<const ObjectAsset> assets, int factor);

// Stable digest of (x_init, M_init) used in render manifests.
std::string guide_hash(const CompositeGuide& guide);

}  // namespace sketchscene
