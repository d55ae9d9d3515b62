#include "sketchscene/compose.hpp"

#include "sketchscene/errors.hpp"
#include "sketchscene/hash.hpp"

namespace sketchscene {

PlacedAsset place_asset(const ObjectAsset& asset, const ObjectAnnotation& annotation, int canvas_width,
                        int canvas_height) {
    if (auto report = validate_asset(asset); !report.empty())
        throw PlacementError("invalid asset for '" + annotation.object_id + "': " + describe(report.front()));
    if (annotation.region.empty()) throw PlacementError("empty box for '" + annotation.object_id + "'");

    Rect source{0, 0, asset.image.width, asset.image.height};
    Rect target = annotation.region;
    if (asset.geometry) {
        source = asset.geometry->content();
        target = asset.geometry->box;
        if (source.right() > asset.image.width || source.bottom() > asset.image.height)
            throw PlacementError("crop geometry exceeds asset for '" + annotation.object_id + "'");
    }
    const Rect canvas{0, 0, canvas_width, canvas_height};
    const Rect visible = intersect(target, canvas);
    if (visible.empty()) throw PlacementError("box for '" + annotation.object_id + "' lies outside the canvas");

    const RgbImage image = resize_bilinear(asset.image, source, target.width, target.height);
    const Mask mask      = resize_nearest(asset.mask, source, target.width, target.height);

    PlacedAsset placed;
    placed.image = RgbImage(canvas_width, canvas_height, kFillerGray);
    placed.mask  = Mask(canvas_width, canvas_height);
    for (int y = visible.top; y < visible.bottom(); ++y) {
        for (int x = visible.left; x < visible.right(); ++x) {
            const int sx = x - target.left, sy = y - target.top;
            placed.mask.at(x, y) = mask.at(sx, sy);
            for (int c = 0; c < 3; ++c) placed.image.at(x, y, c) = image.at(sx, sy, c);
        }
    }
    placed.placement.object_id = annotation.object_id;
    placed.placement.box       = target;
    placed.placement.scale     = static_cast<double>(target.width) / source.width;
    return placed;
}

CompositeGuide compose_guide(const SceneSpec& spec, std::span<const ObjectAsset> assets, int factor) {
    CompositeGuide guide;
    guide.factor    = factor;
    guide.x_init    = RgbImage(spec.canvas.width, spec.canvas.height, kFillerGray);
    guide.full_mask = Mask(spec.canvas.width, spec.canvas.height);

    int z = 0;
    for (const auto& ann : spec.objects) {
        const ObjectAsset* asset = nullptr;
        for (const auto& a : assets)
            if (a.object_id == ann.object_id) asset = &a;
        if (!asset) throw CompositionError("no asset for object '" + ann.object_id + "'", ann.object_id);

        PlacedAsset placed = place_asset(*asset, ann, spec.canvas.width, spec.canvas.height);
        for (int y = 0; y < spec.canvas.height; ++y) {
            for (int x = 0; x < spec.canvas.width; ++x) {
                if (!placed.mask.at(x, y)) continue;
                guide.full_mask.at(x, y) = 1;
                for (int c = 0; c < 3; ++c) guide.x_init.at(x, y, c) = placed.image.at(x, y, c);
            }
        }
        placed.placement.z_index = z++;
        guide.placement_log.push_back(placed.placement);
    }
    guide.latent_mask = downsample_mask(guide.full_mask, factor);
    return guide;
}

std::string guide_hash(const CompositeGuide& guide) {
    const auto image = encode_png(guide.x_init);
    const auto mask  = encode_png(guide.full_mask);
    return sha256_hex(sha256_hex(std::span<const std::uint8_t>(image)) + sha256_hex(std::span<const std::uint8_t>(mask)));
}

}  // namespace sketchscene
