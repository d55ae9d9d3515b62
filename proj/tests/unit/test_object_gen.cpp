#include <doctest.h>

#include "fixtures.hpp"
#include "sketchscene/errors.hpp"
#include "sketchscene/hash.hpp"
#include "sketchscene/object_gen.hpp"

using namespace sketchscene;
using namespace sketchscene::testing;

namespace {

struct SizedGenerator final : SketchGenerator {
    int grow = 0;
    RgbImage generate(const GrayImage& sketch, std::string_view, std::uint64_t) override {
        return RgbImage(sketch.width + grow, sketch.height, 0);
    }
    std::string config_id() const override { return "sized"; }
};

struct SeedLog final : SketchGenerator {
    std::vector<std::uint64_t> seeds;
    RgbImage generate(const GrayImage& sketch, std::string_view, std::uint64_t seed) override {
        seeds.push_back(seed);
        return RgbImage(sketch.width, sketch.height, 255);
    }
    std::string config_id() const override { return "log"; }
};

// Empty masks until the given attempt.
struct LateSegmenter final : Segmenter {
    int succeed_at = 0;
    int calls      = 0;
    Mask segment(const RgbImage& image, std::string_view) override {
        Mask m(image.width, image.height);
        if (calls++ >= succeed_at) m.at(image.width / 2, image.height / 2) = 1;
        return m;
    }
    std::string config_id() const override { return "late"; }
};

}  // namespace

TEST_CASE("letterbox crops round-trip when not downscaled") {
    Rng rng(51);
    for (int trial = 0; trial < 100; ++trial) {
        const SceneSpec s = random_scene(rng, 96, 4);
        for (const auto& o : s.objects) {
            const int res   = static_cast<int>(rng.uniform_int(std::max(o.region.width, o.region.height), 160));
            const auto c    = crop_object_sketch(s, o.object_id, res);
            REQUIRE(c.image.width == res);
            REQUIRE(c.geometry.box == intersect(o.region, s.canvas_rect()));
            REQUIRE(restore_crop(c) == crop(s.sketch, c.geometry.box));
        }
    }
}

TEST_CASE("letterbox geometry centres content and preserves aspect") {
    SceneSpec s = two_object_scene(128);
    const auto crop = crop_object_sketch(s, "chair", 64);
    const auto& g   = crop.geometry;
    CHECK(g.scaled_height == 64);
    CHECK(g.scaled_width == (2 * 42 * 64 + 64) / (2 * 64));
    CHECK(g.offset_x == (64 - g.scaled_width) / 2);
    CHECK(g.offset_y == 0);
    for (int y = 0; y < 64; ++y) CHECK(crop.image.at(0, y) == 255);
    CHECK_THROWS_AS(crop_object_sketch(s, "ghost", 64), NotFoundError);
    s.objects[0].region = Rect{200, 200, 10, 10};
    CHECK_THROWS_AS(crop_object_sketch(s, "chair", 64), PlacementError);
}

TEST_CASE("object seeds are stable") {
    CHECK(object_seed(0, "chair") == fnv1a64("chair"));
    CHECK(object_seed(5, "chair") == fnv1a64("chair") + 5);
}

TEST_CASE("mask cleaning keeps the largest component and fills holes") {
    Mask m(10, 10);
    for (int y = 1; y < 8; ++y)
        for (int x = 1; x < 8; ++x) m.at(x, y) = 1;
    m.at(4, 4) = 0;  // hole
    m.at(9, 9) = 1;  // speck
    const Mask c = clean_mask(m);
    CHECK(c.at(4, 4) == 1);
    CHECK(c.at(9, 9) == 0);
    CHECK(c.count() == 49);
    CHECK(clean_mask(Mask(4, 4)).count() == 0);
    CHECK(clean_mask(c) == c);
}

TEST_CASE("generation retries with incremented seeds then gives up") {
    const SceneSpec s = two_object_scene();
    auto req          = make_object_request(s, "lamp", 10, 32, 2);
    CHECK(req.seed == object_seed(10, "lamp"));

    SeedLog gen;
    LateSegmenter seg;
    seg.succeed_at = 2;
    const auto asset = generate_object(req, gen, seg);
    CHECK(gen.seeds == std::vector<std::uint64_t>{req.seed, req.seed + 1, req.seed + 2});
    CHECK(asset.attempts == 3);
    CHECK(asset.seed == req.seed + 2);
    CHECK(asset.identity_token == "<obj-lamp>");
    CHECK(asset.geometry == req.crop.geometry);

    LateSegmenter never;
    never.succeed_at = 100;
    try {
        generate_object(req, gen, never);
        FAIL("expected ObjectGenerationError");
    } catch (const ObjectGenerationError& e) {
        CHECK(e.object_id == "lamp");
        CHECK(e.attempts == 3);
    }

    SizedGenerator bad;
    bad.grow = 1;
    CHECK_THROWS_AS(generate_object(req, bad, seg), ContractViolation);
}

TEST_CASE("stub adapters produce the sketch ink as the object") {
    const SceneSpec s = two_object_scene(64);
    EchoGenerator gen;
    InkSegmenter seg;
    const auto asset = generate_object(make_object_request(s, "chair", 0, 64), gen, seg);
    CHECK(validate_asset(asset).empty());
    CHECK(asset.attempts == 1);
    const auto again = generate_object(make_object_request(s, "chair", 0, 64), gen, seg);
    CHECK(again == asset);
}
