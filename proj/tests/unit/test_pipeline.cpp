#include <doctest.h>

#include <json.hpp>

#include "fixtures.hpp"
#include "sketchscene/hash.hpp"
#include "sketchscene/errors.hpp"
#include "sketchscene/pipeline.hpp"

using namespace sketchscene;
using namespace sketchscene::testing;
using json = nlohmann::json;

namespace {

RenderConfig small_config(int canvas, double alpha = 0.5) {
    RenderConfig cfg;
    cfg.width = cfg.height = canvas;
    cfg.steps              = 8;
    cfg.alpha              = alpha;
    cfg.seed               = 3;
    return cfg;
}

}  // namespace

TEST_CASE("assets round-trip through their directory") {
    TempDir dir("assets");
    const SceneSpec s = two_object_scene(64);
    const auto assets = generate_objects(s, stub_adapters(), 0);
    REQUIRE(assets.size() == 2);
    save_asset(assets[1], dir / "lamp", "cfg");
    CHECK(load_asset(dir / "lamp") == assets[1]);
    const auto meta = json::parse(asset_metadata(assets[1], "cfg"));
    CHECK(meta["object_id"] == "lamp");
    CHECK(meta["generator_config_hash"] == "cfg");
    CHECK_THROWS_AS(load_asset(dir / "nothing"), NotFoundError);
}

TEST_CASE("object generation can be limited to one object") {
    const SceneSpec s = two_object_scene(64);
    const auto only   = generate_objects(s, stub_adapters(), 0, std::string("lamp"));
    REQUIRE(only.size() == 1);
    CHECK(only[0].object_id == "lamp");
    CHECK_THROWS_AS(generate_objects(s, stub_adapters(), 0, std::string("ghost")), NotFoundError);
    CHECK_THROWS_AS(generate_objects(s, AdapterSet{}, 0), ConnectivityError);
    CHECK(stub_adapters().resolution_for(s) == 64);
}

TEST_CASE("workspace loads whatever is present") {
    TempDir dir("ws");
    const SceneSpec s = two_object_scene(64);
    SceneWorkspace ws(dir.path());
    const auto assets = generate_objects(s, stub_adapters(), 0);
    CHECK(ws.load_assets(s).empty());
    save_asset(assets[0], ws.asset_dir("chair"), "x");
    const auto loaded = ws.load_assets(s);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].object_id == "chair");
    const auto completed = complete_assets(s, loaded, stub_adapters(), 0);
    CHECK(completed.size() == 2);
    CHECK(completed[1] == assets[1]);
    CHECK(ws.load_identities(s).empty());
}

TEST_CASE("renders are deterministic and manifests carry no timing") {
    const SceneSpec s = two_object_scene(32);
    const auto assets = generate_objects(s, stub_adapters(), 0);
    auto toy          = default_toy();
    const auto a      = render_scene(s, assets, {}, small_config(32), toy);
    auto toy2         = default_toy();
    const auto b      = render_scene(s, assets, {}, small_config(32), toy2);
    CHECK(a.image_png == b.image_png);
    CHECK(a.manifest == b.manifest);

    const auto m = json::parse(a.manifest);
    CHECK(m["scene_id"] == "two-objects");
    CHECK(m["config"]["T"] == 8);
    CHECK(m["config"]["alpha"] == 0.5);
    CHECK(m["config"]["global_prompt"] == "a photo of a chair and lamp in a quiet room");
    CHECK(m["backend"]["name"] == "toy");
    CHECK(m["blended_steps"] == 4);
    CHECK(m["output"]["sha256"] == sha256_hex(std::span<const std::uint8_t>(a.image_png)));
    CHECK(a.manifest.find("_ms") == std::string::npos);
    CHECK(json::parse(a.timing)["per_step_ms"].size() == 8);
}

TEST_CASE("render progress and prompt overrides") {
    const SceneSpec s = two_object_scene(32);
    const auto assets = generate_objects(s, stub_adapters(), 0);
    auto toy          = default_toy();
    RenderConfig cfg  = small_config(32, 0.25);
    cfg.global_prompt = "a photo of two things";
    std::vector<std::string> notes;
    const auto r = render_scene(s, assets, {}, cfg, toy, [&](int step, int total, const std::string& note) {
        CHECK(total == 8);
        CHECK(step == static_cast<int>(notes.size()) + 1);
        notes.push_back(note);
    });
    REQUIRE(notes.size() == 8);
    CHECK(notes.front() == "blended");
    CHECK(notes.back() == "customized");
    CHECK(r.prompts.global_prompt == "a photo of two things");
    CHECK(r.prompts.background_prompt == "a photo of a quiet room");
}

TEST_CASE("render rejects mismatched resolution and invalid scenes") {
    SceneSpec s       = two_object_scene(32);
    const auto assets = generate_objects(s, stub_adapters(), 0);
    auto toy          = default_toy();
    CHECK_THROWS_AS(render_scene(s, assets, {}, small_config(64), toy), ShapeError);
    s.objects[0].class_label.clear();
    CHECK_THROWS_AS(render_scene(s, assets, {}, small_config(32), toy), ConfigError);
}

TEST_CASE("render files and names") {
    TempDir dir("render");
    const SceneSpec s = two_object_scene(32);
    auto toy          = default_toy();
    const auto r      = render_scene(s, generate_objects(s, stub_adapters(), 0), {}, small_config(32), toy);
    write_render(r, dir / "r");
    CHECK(read_file(dir / "r" / "render.png") == r.image_png);
    CHECK(std::filesystem::exists(dir / "r" / "timing.json"));
    CHECK(render_name(small_config(32)) == "a0.500_s3_T8");
}

TEST_CASE("grid lays images side by side") {
    const std::vector<RgbImage> images = {RgbImage(4, 4, 10), RgbImage(6, 5, 20)};
    const auto g = make_grid(images);
    CHECK(g.width == 14);
    CHECK(g.height == 5);
    CHECK(g.at(0, 0, 0) == 10);
    CHECK(g.at(5, 0, 0) == 255);
    CHECK(g.at(8, 4, 0) == 20);
    CHECK(make_grid({}).empty());
}
