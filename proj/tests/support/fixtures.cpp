#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <unistd.h>

namespace sketchscene::testing {

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("sketchscene-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::filesystem::path source_dir() { return SKETCHSCENE_SOURCE_DIR; }

std::filesystem::path demo_scene_path() { return source_dir() / "data" / "demo" / "scene.json"; }

void draw_polyline(GrayImage& img, const Polyline& line, int thickness) {
    auto stamp = [&](int cx, int cy) {
        for (int dy = -thickness / 2; dy <= thickness / 2; ++dy)
            for (int dx = -thickness / 2; dx <= thickness / 2; ++dx) {
                const int x = cx + dx, y = cy + dy;
                if (x >= 0 && y >= 0 && x < img.width && y < img.height) img.at(x, y) = 0;
            }
    };
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        const double x0 = line[i].x, y0 = line[i].y, x1 = line[i + 1].x, y1 = line[i + 1].y;
        const int n = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))));
        for (int k = 0; k <= n; ++k) {
            const double f = static_cast<double>(k) / n;
            stamp(static_cast<int>(std::lround(x0 + f * (x1 - x0))), static_cast<int>(std::lround(y0 + f * (y1 - y0))));
        }
    }
    if (line.size() == 1) stamp(static_cast<int>(line[0].x), static_cast<int>(line[0].y));
}

namespace {

Polyline outline(const Rect& r) {
    const double l = r.left + 2, t = r.top + 2, rr = r.right() - 3, b = r.bottom() - 3;
    return {{l, t}, {rr, t}, {rr, b}, {l, b}, {l, t}};
}

}  // namespace

SceneSpec two_object_scene(int canvas, const std::string& scene_id) {
    SceneSpec s;
    s.scene_id        = scene_id;
    s.canvas          = {canvas, canvas};
    s.sketch          = GrayImage(canvas, canvas, 255);
    s.background_text = "in a quiet room";
    s.created_at      = std::chrono::sys_seconds{std::chrono::seconds{1767225600}};

    ObjectAnnotation a;
    a.object_id   = "chair";
    a.class_label = "chair";
    a.region      = Rect{canvas / 8, canvas / 4, canvas / 3, canvas / 2};
    a.strokes     = {outline(a.region)};

    ObjectAnnotation b;
    b.object_id   = "lamp";
    b.class_label = "lamp";
    b.prompt_text = "a brass lamp";
    b.region      = Rect{canvas / 2 + canvas / 16, canvas / 8, canvas / 4, canvas / 2};
    b.strokes     = {outline(b.region), {{b.region.left + b.region.width / 2.0, b.region.top + 4.0},
                                         {b.region.left + b.region.width / 2.0, b.region.bottom() - 4.0}}};

    s.objects = {a, b};
    for (const auto& o : s.objects)
        for (const auto& pl : o.strokes) draw_polyline(s.sketch, pl);
    return s;
}

SceneSpec random_scene(Rng& rng, int canvas, int max_objects) {
    SceneSpec s;
    s.scene_id   = "scene-" + std::to_string(rng.uniform_int(0, 1 << 20));
    s.canvas     = {canvas, canvas};
    s.sketch     = GrayImage(canvas, canvas, 255);
    s.created_at = std::chrono::sys_seconds{std::chrono::seconds{rng.uniform_int(0, 2'000'000'000)}};
    static const char* labels[] = {"chair", "lamp", "cat", "table", "vase", "dog"};
    static const char* backgrounds[] = {"in a room", "on the beach", "", "under a tree"};
    s.background_text = backgrounds[rng.uniform_int(0, 3)];
    const int n       = static_cast<int>(rng.uniform_int(1, max_objects));
    for (int i = 0; i < n; ++i) {
        ObjectAnnotation o;
        o.object_id   = "obj" + std::to_string(i);
        o.class_label = labels[rng.uniform_int(0, 5)];
        if (rng.uniform() < 0.5) o.prompt_text = "a photo of a small " + o.class_label;
        const int w = static_cast<int>(rng.uniform_int(canvas / 8, canvas / 2));
        const int h = static_cast<int>(rng.uniform_int(canvas / 8, canvas / 2));
        o.region    = Rect{static_cast<int>(rng.uniform_int(0, canvas - w)), static_cast<int>(rng.uniform_int(0, canvas - h)), w, h};
        o.strokes   = {outline(o.region)};
        for (const auto& pl : o.strokes) draw_polyline(s.sketch, pl);
        s.objects.push_back(std::move(o));
    }
    return s;
}

RgbImage random_rgb(int w, int h, Rng& rng) {
    RgbImage img(w, h);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

Mask random_mask(int w, int h, Rng& rng, double density) {
    Mask m(w, h);
    for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
    return m;
}

LatentTensor random_latent(int c, int h, int w, Rng& rng) {
    LatentTensor z(c, h, w);
    for (auto& v : z.data) v = rng.normal();
    return z;
}

LatentMask random_latent_mask(int h, int w, Rng& rng, double density) {
    LatentMask m(h, w);
    for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
    return m;
}

ObjectAsset random_object_asset(std::uint64_t seed, int size) {
    Rng rng(seed, 77);
    ObjectAsset a;
    a.object_id      = "o" + std::to_string(seed);
    a.identity_token = identity_token_for(a.object_id);
    a.seed           = seed;
    a.image          = RgbImage(size, size, 255);
    a.mask           = Mask(size, size);
    const double cx = size * (0.25 + 0.5 * rng.uniform()), cy = size * (0.25 + 0.5 * rng.uniform());
    const double rx = size * (0.125 + 0.3 * rng.uniform()), ry = size * (0.125 + 0.3 * rng.uniform());
    int base[3];
    for (int& b : base) b = static_cast<int>(rng.uniform_int(0, 255));
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = (x - cx) / rx, dy = (y - cy) / ry;
            if (dx * dx + dy * dy > 1.0) continue;
            a.mask.at(x, y) = 1;
            for (int c = 0; c < 3; ++c)
                a.image.at(x, y, c) =
                    static_cast<std::uint8_t>(std::clamp(base[c] + static_cast<int>(rng.normal() * 30.0), 0, 255));
        }
    return a;
}

ToyBackend default_toy() { return ToyBackend(ToyOptions{}); }

double max_abs_diff(const LatentTensor& a, const LatentTensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

double max_rel_diff(const LatentTensor& a, const LatentTensor& b) {
    double scale = 0.0;
    for (double v : b.data) scale = std::max(scale, std::abs(v));
    return max_abs_diff(a, b) / std::max(scale, 1e-300);
}

}  // namespace sketchscene::testing
