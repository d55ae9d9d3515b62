#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "fixtures.hpp"
#include "sketchscene/config.hpp"
#include "sketchscene/errors.hpp"
#include "sketchscene/object_gen.hpp"
#include "sketchscene/pipeline.hpp"
#include "sketchscene/remote_backend.hpp"
#include "sketchscene/tensor_io.hpp"

using namespace sketchscene;
using namespace sketchscene::testing;
using json = nlohmann::json;

namespace {

// In-process model server speaking the adapter wire contract. Generation and
// segmentation use the desk stubs; backend ops delegate to a toy backend.
class FakeModelServer {
public:
    enum class Fault { None, ErrorStatus, NotJson, MissingArtifact, WrongShape };

    explicit FakeModelServer(std::filesystem::path dir) : dir_(std::move(dir)), toy_(ToyOptions{}) {
        server_.Post("/invoke", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
        port_   = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeModelServer() {
        server_.stop();
        thread_.join();
    }

    HttpEndpoint endpoint() const {
        return HttpEndpoint{"http://127.0.0.1:" + std::to_string(port_), dir_ / "exchange", std::chrono::seconds(5)};
    }
    void set_fault(Fault f) { fault_ = f; }
    int calls() const { return calls_; }

private:
    void handle(const httplib::Request& req, httplib::Response& res) {
        ++calls_;
        if (fault_ == Fault::NotJson) return res.set_content("<html>", "text/html");
        if (fault_ == Fault::ErrorStatus)
            return res.set_content(json{{"status", "error"}, {"message", "out of memory"}}.dump(), "application/json");
        const json body = json::parse(req.body);
        const std::string op = body.at("op");
        std::vector<std::uint8_t> out;
        std::string name = op + "-" + std::to_string(calls_.load());
        auto payload     = [&](int i) { return read_file(body.at("payload").at(i).get<std::string>()); };
        if (op == "generate_from_sketch") {
            EchoGenerator gen;
            auto img = gen.generate(decode_png_gray(payload(0)), body.at("prompt_text").get<std::string>(),
                                    body.at("seed").get<std::uint64_t>());
            if (fault_ == Fault::WrongShape) img = RgbImage(img.width + 1, img.height, 0);
            out = encode_png(img);
        } else if (op == "segment") {
            InkSegmenter seg;
            out = encode_png(seg.segment(decode_png_rgb(payload(0)), body.at("class_label").get<std::string>()));
        } else if (op == "encode_image") {
            auto z = toy_.encode_image(decode_png_rgb(payload(0)));
            if (fault_ == Fault::WrongShape) z = LatentTensor(1, 1, 1);
            out = encode_tensor(to_tensor_file(z));
        } else if (op == "decode_latent") {
            out = encode_png(toy_.decode_latent(to_latent(decode_tensor(payload(0)))));
        } else if (op == "token_embedding") {
            const auto e = toy_.token_embedding(body.at("prompt_text").get<std::string>());
            out          = encode_tensor(TensorFile{{e.size()}, e});
        } else if (op == "predict_noise") {
            const auto z    = to_latent(decode_tensor(payload(0)));
            const auto rows = decode_tensor(payload(1));
            PromptEncoding cond;
            const std::size_t dim = rows.shape.at(1);
            for (std::size_t r = 0; r < rows.shape.at(0); ++r)
                cond.embedding_matrix.emplace_back(rows.data.begin() + r * dim, rows.data.begin() + (r + 1) * dim);
            last_guidance_ = body.value("guidance_scale", -1.0);
            out            = encode_tensor(to_tensor_file(toy_.predict_noise(z, body.at("t").get<int>(), cond)));
        } else {
            return res.set_content(json{{"status", "error"}, {"message", "unknown op"}}.dump(), "application/json");
        }
        const auto path = std::filesystem::absolute(dir_ / "out" / name);
        std::filesystem::create_directories(path.parent_path());
        if (fault_ != Fault::MissingArtifact) write_file_atomic(path, out);
        res.set_content(json{{"status", "ok"}, {"artifacts", {path.string()}}}.dump(), "application/json");
    }

public:
    std::atomic<double> last_guidance_{-1.0};

private:
    std::filesystem::path dir_;
    ToyBackend toy_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<Fault> fault_{Fault::None};
    std::atomic<int> calls_{0};
};

}  // namespace

TEST_CASE("stub adapters are deterministic") {
    const SceneSpec s = two_object_scene(64);
    EchoGenerator gen;
    InkSegmenter seg;
    const auto img = gen.generate(s.sketch, "x", 9);
    CHECK(img == gen.generate(s.sketch, "y", 9));
    CHECK(img != gen.generate(s.sketch, "x", 10));
    const Mask m = seg.segment(img, "chair");
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) REQUIRE(m.at(x, y) == (s.sketch.at(x, y) < kInkThreshold ? 1 : 0));
}

TEST_CASE("request hashes cover every field") {
    const GrayImage sketch(8, 8, 255);
    const auto base = make_generate_request(sketch, "a chair", 1);
    CHECK(base.hash() == make_generate_request(sketch, "a chair", 1).hash());
    CHECK(base.hash() != make_generate_request(sketch, "a chair", 2).hash());
    CHECK(base.hash() != make_generate_request(sketch, "a lamp", 1).hash());
    GrayImage other = sketch;
    other.at(3, 3)  = 0;
    CHECK(base.hash() != make_generate_request(other, "a chair", 1).hash());
    CHECK(make_segment_request(RgbImage(4, 4), "a").hash() != make_segment_request(RgbImage(4, 4), "b").hash());
}

TEST_CASE("http adapters match the stubs over the wire") {
    TempDir dir("wire");
    FakeModelServer server(dir.path());
    const SceneSpec s = two_object_scene(64);
    HttpGenerator gen(server.endpoint());
    HttpSegmenter seg(server.endpoint());
    EchoGenerator echo;
    InkSegmenter ink;
    const auto img = gen.generate(s.sketch, "a chair", 3);
    CHECK(img == echo.generate(s.sketch, "a chair", 3));
    CHECK(seg.segment(img, "chair") == ink.segment(img, "chair"));
    CHECK(gen.config_id() == "http:" + server.endpoint().base_url);
}

TEST_CASE("adapter contract violations are reported") {
    TempDir dir("faults");
    FakeModelServer server(dir.path());
    HttpGenerator gen(server.endpoint());
    const GrayImage sketch(16, 16, 255);

    server.set_fault(FakeModelServer::Fault::ErrorStatus);
    CHECK_THROWS_AS(gen.generate(sketch, "x", 0), ContractViolation);
    server.set_fault(FakeModelServer::Fault::NotJson);
    CHECK_THROWS_AS(gen.generate(sketch, "x", 0), ContractViolation);
    server.set_fault(FakeModelServer::Fault::MissingArtifact);
    CHECK_THROWS_AS(gen.generate(sketch, "x", 0), ContractViolation);
    server.set_fault(FakeModelServer::Fault::WrongShape);
    CHECK_THROWS_AS(gen.generate(sketch, "x", 0), ContractViolation);

    HttpGenerator unconfigured(HttpEndpoint{"", dir / "x", std::chrono::seconds(1)});
    CHECK_THROWS_AS(unconfigured.generate(sketch, "x", 0), ConnectivityError);
}

TEST_CASE("unreachable adapters raise connectivity errors") {
    TempDir dir("down");
    HttpEndpoint ep;
    {
        FakeModelServer server(dir.path());
        ep = server.endpoint();
    }
    HttpSegmenter seg(ep);
    CHECK_THROWS_AS(seg.segment(RgbImage(4, 4), "x"), ConnectivityError);
}

TEST_CASE("record then replay serves identical bytes without the live adapter") {
    TempDir dir("replay");
    const SceneSpec s = two_object_scene(64);
    auto rec_store    = std::make_shared<ReplayStore>(dir / "store", ReplayMode::Record);
    auto calls        = std::make_shared<int>(0);
    struct Counting final : SketchGenerator {
        std::shared_ptr<int> n;
        EchoGenerator inner;
        RgbImage generate(const GrayImage& g, std::string_view p, std::uint64_t seed) override {
            ++*n;
            return inner.generate(g, p, seed);
        }
        std::string config_id() const override { return "counting"; }
    };
    auto counting = std::make_shared<Counting>();
    counting->n   = calls;
    RecordingGenerator recorder(counting, rec_store);
    const auto first = recorder.generate(s.sketch, "a chair", 1);
    CHECK(recorder.generate(s.sketch, "a chair", 1) == first);
    CHECK(*calls == 1);

    auto replay_store = std::make_shared<ReplayStore>(dir / "store", ReplayMode::Replay);
    RecordingGenerator replay(nullptr, replay_store);
    CHECK(replay.generate(s.sketch, "a chair", 1) == first);
    CHECK_THROWS_AS(replay.generate(s.sketch, "a chair", 2), ReplayMissError);
    const auto req = make_generate_request(s.sketch, "a chair", 1);
    CHECK(std::filesystem::exists(dir / "store" / (req.hash() + ".json")));

    RecordingSegmenter seg_replay(nullptr, replay_store);
    CHECK_THROWS_AS(seg_replay.segment(first, "chair"), ReplayMissError);
}

TEST_CASE("remote backend reproduces the in-process toy") {
    TempDir dir("remote");
    FakeModelServer server(dir.path());
    RemoteBackend remote(server.endpoint(), BackendProfile{"remote", 2, 2, false, 77, 16});
    auto toy = default_toy();

    CHECK_FALSE(remote.profile().supports_identity_embeddings);
    Rng rng(71);
    const auto img = random_rgb(16, 16, rng);
    CHECK(remote.encode_image(img) == toy.encode_image(img));
    const auto z = random_latent(2, 8, 8, rng);
    CHECK(remote.decode_latent(z) == toy.decode_latent(z));
    CHECK(remote.token_embedding("chair") == toy.token_embedding("chair"));
    const int before = server.calls();
    remote.token_embedding("chair");
    CHECK(server.calls() == before);

    EmbeddingBindings b;
    b.allow_untrained = true;
    const auto rc = remote.encode_prompt("a photo of a <obj-chair>", b);
    const auto tc = toy.encode_prompt("a photo of a <obj-chair>", b);
    remote.set_guidance_scale(3.5);
    CHECK(remote.predict_noise(z, 4, rc) == toy.predict_noise(z, 4, tc));
    CHECK(server.last_guidance_.load() == 3.5);

    RenderConfig cfg;
    cfg.width = cfg.height = 16;
    cfg.steps              = 5;
    const auto sched       = make_schedule(5);
    CHECK(sample_prompt_only(cfg, "a photo of a chair", b, remote, sched).image ==
          sample_prompt_only(cfg, "a photo of a chair", b, toy, sched).image);

    CHECK_THROWS_AS(remote.identity_gradient(z, 1, rc, z), CapabilityError);
    server.set_fault(FakeModelServer::Fault::WrongShape);
    CHECK_THROWS_AS(remote.encode_image(img), ContractViolation);
    CHECK_THROWS_AS(RemoteBackend(server.endpoint(), BackendProfile{"r", 0, 2, false, 77, 16}), ConfigError);
}

TEST_CASE("config parsing") {
    const auto d = parse_config("{}");
    CHECK(d.backend == "toy");
    CHECK(d.pool_size == 1);
    CHECK(d.retries == 2);
    CHECK(d.generator.mode == "stub");

    const auto c = parse_config(R"({
        "backend": "http",
        "toy": {"channels": 3, "gain": 2.5},
        "remote": {"endpoint": "http://h:1", "latent_channels": 4, "downsample_factor": 8, "embedding_dim": 32},
        "adapters": {"generator": {"mode": "replay", "store": "rec"}, "resolution": 256, "retries": 0},
        "pool_size": 3, "artifact_root": "/tmp/x", "unknown": true})");
    CHECK(c.backend == "http");
    CHECK(c.toy.channels == 3);
    CHECK(c.toy.gain == 2.5);
    CHECK(c.backend_endpoint.base_url == "http://h:1");
    CHECK(c.remote_profile.embedding_dim == 32);
    CHECK(c.generator.mode == "replay");
    CHECK(c.generator_resolution == 256);
    CHECK(c.retries == 0);
    CHECK(c.pool_size == 3);
    CHECK(c.artifact_root == "/tmp/x");

    CHECK_THROWS_AS(parse_config("nope"), ConfigError);
    CHECK_THROWS_AS(parse_config("[]"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"backend": "gpu"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"pool_size": 0})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"pool_size": "two"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"adapters": {"segmenter": {"mode": "record"}}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"adapters": {"segmenter": {"mode": "magic"}}})"), ConfigError);
    CHECK_THROWS_AS(make_backend_factory(parse_config(R"({"backend": "http"})")), ConfigError);
    CHECK_THROWS_AS(make_backend_factory(parse_config(R"({"toy": {"channels": 0}})")), ConfigError);
}

TEST_CASE("config files and the environment variable") {
    TempDir dir("config");
    write_file_atomic(dir / "c.json", std::string(R"({"pool_size": 4})"));
    CHECK(load_config(dir / "c.json").pool_size == 4);
    CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
    ::setenv(kConfigEnvVar, (dir / "c.json").c_str(), 1);
    CHECK(load_config(std::nullopt).pool_size == 4);
    ::unsetenv(kConfigEnvVar);
    CHECK(load_config(std::nullopt).pool_size == 1);
}

TEST_CASE("adapter sets follow the configured modes") {
    TempDir dir("modes");
    auto stub = make_adapters(parse_config("{}"));
    CHECK(stub.generator->config_id() == "stub-echo");
    CHECK(stub.segmenter->config_id() == "stub-ink");

    const std::string store = (dir / "rec").string();
    auto rec = make_adapters(parse_config(R"({"adapters": {"generator": {"mode": "record", "store": ")" + store +
                                          R"("}, "segmenter": {"mode": "record", "store": ")" + store + R"("}}})"));
    const SceneSpec s = two_object_scene(64);
    const auto live   = generate_objects(s, rec, 4);
    auto rep = make_adapters(parse_config(R"({"adapters": {"generator": {"mode": "replay", "store": ")" + store +
                                          R"("}, "segmenter": {"mode": "replay", "store": ")" + store + R"("}}})"));
    CHECK(generate_objects(s, rep, 4) == live);
    CHECK_THROWS_AS(generate_objects(s, rep, 5), ReplayMissError);
    CHECK(rec.config_hash() != stub.config_hash());
}
