#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sketchscene/backend.hpp"
#include "sketchscene/compose.hpp"
#include "sketchscene/diffusion.hpp"
#include "sketchscene/rng.hpp"
#include "sketchscene/scene_model.hpp"

namespace sketchscene::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t");
    ~TempDir();
    TempDir(const TempDir&)            = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::filesystem::path source_dir();
std::filesystem::path demo_scene_path();

// Draws a polyline of the given thickness in black.
void draw_polyline(GrayImage& img, const Polyline& line, int thickness = 2);

// Canvas with two boxed objects whose strokes are rasterised into the sketch.
SceneSpec two_object_scene(int canvas = 64, const std::string& scene_id = "two-objects");

// Random valid scene: 1..max_objects boxes with stroke outlines.
SceneSpec random_scene(Rng& rng, int canvas, int max_objects = 4);

RgbImage random_rgb(int w, int h, Rng& rng);
Mask random_mask(int w, int h, Rng& rng, double density = 0.5);
LatentTensor random_latent(int c, int h, int w, Rng& rng);
LatentMask random_latent_mask(int h, int w, Rng& rng, double density = 0.5);

// Elliptical object of one noisy colour on white, as a generator would give.
ObjectAsset random_object_asset(std::uint64_t seed, int size = 64);

// Toy backend instance with the library defaults.
ToyBackend default_toy();

double max_abs_diff(const LatentTensor& a, const LatentTensor& b);
// max |a - b| / max |b|
double max_rel_diff(const LatentTensor& a, const LatentTensor& b);

}  // namespace sketchscene::testing
