#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "sketchscene/hash.hpp"
#include "sketchscene/pipeline.hpp"
#include "sketchscene/service.hpp"

using namespace sketchscene;
using namespace sketchscene::testing;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome run(const std::string& args) {
    const std::string cmd = std::string("\"") + SKETCHSCENE_CLI + "\" " + args + " 2>/dev/null";
    Outcome o;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) o.out.append(buf, n);
    const int status = ::pclose(pipe);
    o.code           = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

std::string file_hash(const std::filesystem::path& p) {
    const auto bytes = read_file(p);
    return sha256_hex(std::span<const std::uint8_t>(bytes));
}

std::filesystem::path write_scene(const TempDir& dir, const SceneSpec& s) {
    const auto path = dir / (s.scene_id + ".json");
    auto copy        = s;
    copy.sketch_path = s.scene_id + ".png";
    save_scene(copy, path);
    return path;
}

}  // namespace

TEST_CASE("exit codes") {
    TempDir dir("cli-codes");
    CHECK(run("--help").code == 0);
    CHECK(run("").code == 64);
    CHECK(run("scene").code == 64);
    CHECK(run("scene validate").code == 64);
    CHECK(run("scene render x --bogus").code == 64);

    CHECK(run("scene validate " + q(demo_scene_path())).code == 0);
    CHECK(run("scene validate " + q(dir / "missing.json")).code == 2);

    SceneSpec bad = two_object_scene(32, "bad");
    bad.objects[0].class_label.clear();
    const auto bad_path = write_scene(dir, bad);
    const auto v        = run("scene validate " + q(bad_path));
    CHECK(v.code == 1);
    CHECK(v.out.find("object.class_label") != std::string::npos);

    std::ofstream(dir / "junk.json") << "{ nope";
    CHECK(run("scene validate " + q(dir / "junk.json")).code == 1);
    std::ofstream(dir / "future.json") << R"({"schema_version": 7, "scene_id": "f"})";
    CHECK(run("scene validate " + q(dir / "future.json")).code == 1);

    const auto good = write_scene(dir, two_object_scene(32, "good"));
    const std::string out = " --out " + q(dir / "out");
    CHECK(run("scene render " + q(good) + " --alpha 1.5" + out).code == 1);
    CHECK(run("scene render " + q(good) + " -T 0" + out).code == 1);
    CHECK(run("scene sweep " + q(good) + " --alphas \"\"" + out).code == 64);
    CHECK(run("scene sweep " + q(good) + " --alphas 0.2,x" + out).code == 64);
    CHECK(run("scene render " + q(good) + " --config " + q(dir / "nope.json") + out).code == 2);
    CHECK(run("bench run " + q(dir.path()) + " --seeds 5..1" + out).code == 64);
    CHECK(run("identity train " + q(good) + out).code == 2);
}

TEST_CASE("renders are byte-identical across invocations") {
    TempDir dir("cli-det");
    const auto scene = write_scene(dir, two_object_scene(32, "room"));
    for (const char* o : {"a", "b"})
        REQUIRE(run("scene render " + q(scene) + " --seed 4 -T 6 --alpha 0.5 --out " + q(dir / o)).code == 0);
    const auto ra = dir / "a" / "renders" / "a0.500_s4_T6";
    const auto rb = dir / "b" / "renders" / "a0.500_s4_T6";
    CHECK(file_hash(ra / "render.png") == file_hash(rb / "render.png"));
    CHECK(file_hash(ra / "manifest.json") == file_hash(rb / "manifest.json"));
    CHECK(std::filesystem::exists(ra / "timing.json"));
    CHECK_FALSE(std::filesystem::exists(dir / "a" / "assets"));
}

TEST_CASE("stage commands write the workspace tree") {
    TempDir dir("cli-stages");
    const auto scene = write_scene(dir, two_object_scene(32, "room"));
    const std::string out = " --out " + q(dir / "ws");
    REQUIRE(run("objects generate " + q(scene) + " --seed 2" + out).code == 0);
    CHECK(std::filesystem::exists(dir / "ws" / "assets" / "chair" / "mask.png"));
    CHECK(std::filesystem::exists(dir / "ws" / "assets" / "lamp" / "asset.json"));
    REQUIRE(run("identity train " + q(scene) + " --steps 4" + out).code == 0);
    const auto meta_bytes = read_file(dir / "ws" / "identities" / "lamp.json");
    const auto meta       = json::parse(meta_bytes.begin(), meta_bytes.end());
    CHECK(meta["steps"] == 4);
    CHECK(meta["token"] == "<obj-lamp>");
    REQUIRE(run("scene compose " + q(scene) + out).code == 0);
    CHECK(std::filesystem::exists(dir / "ws" / "guide" / "m_init.png"));
    const auto r = run("scene render " + q(scene) + " -T 4" + out);
    REQUIRE(r.code == 0);
    const auto mbytes = read_file(dir / "ws" / "renders" / "a0.500_s0_T4" / "manifest.json");
    CHECK(json::parse(mbytes.begin(), mbytes.end())["config"]["global_prompt"] ==
          "a photo of a <obj-chair> and <obj-lamp> in a quiet room");
    REQUIRE(run("scene sweep " + q(scene) + " -T 4 --alphas 0.2,0.8" + out).code == 0);
    CHECK(std::filesystem::exists(dir / "ws" / "renders" / "a0.200_s0_T4" / "render.png"));
    CHECK(std::filesystem::exists(dir / "ws" / "renders" / "sweep_s0_T4" / "grid.png"));
    CHECK(run("objects generate " + q(scene) + " --object ghost" + out).code == 2);
}

TEST_CASE("bench writes one row per scene and seed") {
    TempDir dir("cli-bench");
    TempDir scenes("cli-bench-scenes");
    write_scene(scenes, two_object_scene(32, "alpha-room"));
    write_scene(scenes, two_object_scene(32, "beta-room"));
    const auto r = run("bench run " + q(scenes.path()) + " --seeds 0..3 -T 3 --jobs 2 --out " + q(dir.path()));
    REQUIRE(r.code == 0);
    std::ifstream csv(dir / "bench.csv");
    std::vector<std::string> lines;
    for (std::string line; std::getline(csv, line);) lines.push_back(line);
    REQUIRE(lines.size() == 1 + 2 * 4);
    CHECK(lines[0] == "scene_id,alpha,seed,T,backend,fg_fidelity,seam_score,wall_ms,output_path");
    CHECK(lines[1].rfind("alpha-room,0.500,0,3,toy,", 0) == 0);
    CHECK(lines[8].rfind("beta-room,0.500,3,3,toy,", 0) == 0);
    CHECK(run("bench run " + q(dir / "nowhere") + " --out " + q(dir.path())).code == 2);
}

TEST_CASE("CLI and service produce the same render") {
    TempDir dir("cli-parity");
    const SceneSpec spec = two_object_scene(32, "room");
    const auto scene     = write_scene(dir, spec);
    REQUIRE(run("scene render " + q(scene) + " --seed 9 -T 5 --alpha 0.4 --out " + q(dir / "cli")).code == 0);
    const auto cli_dir = dir / "cli" / "renders" / "a0.400_s9_T5";

    ServiceOptions o;
    o.root            = dir / "svc";
    o.pool_size       = 1;
    o.backend_factory = [] { return std::unique_ptr<Backend>(std::make_unique<ToyBackend>()); };
    o.adapters        = stub_adapters();
    PipelineService svc(std::move(o));
    httplib::Client c("127.0.0.1", svc.start());
    REQUIRE(c.Post("/scenes", httplib::MultipartFormDataItems{
                                  {"scene", serialize_scene(spec), "scene.json", "application/json"},
                                  {"sketch", [&] { auto p = encode_png(spec.sketch); return std::string(p.begin(), p.end()); }(),
                                   "sketch.png", "image/png"}})
                ->status == 201);
    auto res = c.Post("/scenes/room/render", json{{"seed", 9}, {"T", 5}, {"alpha", 0.4}}.dump(), "application/json");
    REQUIRE(res->status == 202);
    const auto v = svc.wait(json::parse(res->body)["job_id"], 60s);
    REQUIRE(v);
    REQUIRE(v->status == JobStatus::Succeeded);
    for (const auto& ref : v->outputs) {
        if (ref.name == "render.png") CHECK(ref.hash == file_hash(cli_dir / "render.png"));
        if (ref.name == "manifest.json") CHECK(ref.hash == file_hash(cli_dir / "manifest.json"));
    }
}
