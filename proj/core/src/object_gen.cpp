#include "sketchscene/object_gen.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "sketchscene/errors.hpp"
#include "sketchscene/hash.hpp"

namespace sketchscene {

SketchCrop crop_object_sketch(const SceneSpec& spec, std::string_view object_id, int resolution) {
    const ObjectAnnotation* ann = spec.find(object_id);
    if (!ann) throw NotFoundError("object '" + std::string(object_id) + "' not in scene " + spec.scene_id);
    if (resolution < 1) throw ShapeError("crop resolution must be positive");
    const Rect box = intersect(ann->region, spec.canvas_rect());
    if (box.empty()) throw PlacementError("object '" + std::string(object_id) + "' lies outside the canvas");

    SketchCrop crop;
    auto& g     = crop.geometry;
    g.box       = box;
    g.resolution = resolution;
    // Longer side fills the square; the other side is rounded, never zero.
    if (box.width >= box.height) {
        g.scaled_width  = resolution;
        g.scaled_height = std::max(1, static_cast<int>((2LL * box.height * resolution + box.width) / (2LL * box.width)));
    } else {
        g.scaled_height = resolution;
        g.scaled_width  = std::max(1, static_cast<int>((2LL * box.width * resolution + box.height) / (2LL * box.height)));
    }
    g.offset_x = (resolution - g.scaled_width) / 2;
    g.offset_y = (resolution - g.scaled_height) / 2;

    crop.image = GrayImage(resolution, resolution, 255);
    const GrayImage scaled = resize_nearest(spec.sketch, box, g.scaled_width, g.scaled_height);
    for (int y = 0; y < g.scaled_height; ++y)
        for (int x = 0; x < g.scaled_width; ++x) crop.image.at(g.offset_x + x, g.offset_y + y) = scaled.at(x, y);
    return crop;
}

GrayImage restore_crop(const SketchCrop& crop) {
    const auto& g = crop.geometry;
    return resize_nearest(crop.image, g.content(), g.box.width, g.box.height);
}

std::uint64_t object_seed(std::uint64_t scene_seed, std::string_view object_id) {
    return scene_seed + fnv1a64(object_id);
}

Mask clean_mask(const Mask& raw) {
    const int w = raw.width, h = raw.height;
    Mask out(w, h);
    if (w == 0 || h == 0) return out;

    // Label 4-connected foreground components, keep the largest (first found wins ties).
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    int best = -1;
    std::size_t best_size = 0;
    int next = 0;
    std::vector<int> stack;
    for (int start = 0; start < w * h; ++start) {
        if (!raw.bits[start] || label[start] >= 0) continue;
        std::size_t size = 0;
        stack.push_back(start);
        label[start] = next;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            ++size;
            const int x = p % w, y = p / w;
            const int nbrs[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (const auto& n : nbrs) {
                if (n[0] < 0 || n[1] < 0 || n[0] >= w || n[1] >= h) continue;
                const int q = n[1] * w + n[0];
                if (raw.bits[q] && label[q] < 0) {
                    label[q] = next;
                    stack.push_back(q);
                }
            }
        }
        if (size > best_size) {
            best_size = size;
            best      = next;
        }
        ++next;
    }
    if (best < 0) return out;

    // Background reachable from the border stays background; everything else is filled.
    std::vector<std::uint8_t> outside(static_cast<std::size_t>(w) * h, 0);
    auto push_if_open = [&](int x, int y) {
        const int q = y * w + x;
        if (label[q] != best && !outside[q]) {
            outside[q] = 1;
            stack.push_back(q);
        }
    };
    for (int x = 0; x < w; ++x) push_if_open(x, 0), push_if_open(x, h - 1);
    for (int y = 0; y < h; ++y) push_if_open(0, y), push_if_open(w - 1, y);
    while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int x = p % w, y = p / w;
        if (x > 0) push_if_open(x - 1, y);
        if (x < w - 1) push_if_open(x + 1, y);
        if (y > 0) push_if_open(x, y - 1);
        if (y < h - 1) push_if_open(x, y + 1);
    }
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = outside[i] ? 0 : 1;
    return out;
}

ObjectGenRequest make_object_request(const SceneSpec& spec, std::string_view object_id, std::uint64_t scene_seed,
                                     int resolution, int retries) {
    ObjectGenRequest req;
    req.crop = crop_object_sketch(spec, object_id, resolution);
    req.annotation = *spec.find(object_id);
    req.seed       = object_seed(scene_seed, object_id);
    req.retries    = retries;
    return req;
}

ObjectAsset generate_object(const ObjectGenRequest& req, SketchGenerator& generator, Segmenter& segmenter) {
    const auto& ann   = req.annotation;
    const int attempts = 1 + std::max(0, req.retries);
    for (int k = 0; k < attempts; ++k) {
        const std::uint64_t seed = req.seed + static_cast<std::uint64_t>(k);
        RgbImage image = generator.generate(req.crop.image, ann.generation_prompt(), seed);
        if (image.width != req.crop.image.width || image.height != req.crop.image.height)
            throw ContractViolation("generator changed the crop resolution");
        Mask mask = segmenter.segment(image, ann.class_label);
        if (mask.width != image.width || mask.height != image.height)
            throw ContractViolation("segmenter mask does not match image size");
        for (auto& b : mask.bits) b = b ? 1 : 0;
        mask = clean_mask(mask);
        if (mask.count() == 0) continue;

        ObjectAsset asset;
        asset.object_id      = ann.object_id;
        asset.image          = std::move(image);
        asset.mask           = std::move(mask);
        asset.identity_token = identity_token_for(ann.object_id);
        asset.geometry       = req.crop.geometry;
        asset.seed           = seed;
        asset.attempts       = k + 1;
        return asset;
    }
    throw ObjectGenerationError(ann.object_id, attempts);
}

}  // namespace sketchscene
