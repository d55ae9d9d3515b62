#include "sketchscene/config.hpp"

#include <cstdlib>

#include <json.hpp>

#include "sketchscene/errors.hpp"
#include "sketchscene/raster.hpp"
#include "sketchscene/remote_backend.hpp"

using json = nlohmann::json;

namespace sketchscene {

namespace {

HttpEndpoint endpoint_from(const json& j, const std::string& fallback_dir) {
    HttpEndpoint ep;
    ep.base_url     = j.value("endpoint", std::string{});
    ep.exchange_dir = j.value("exchange_dir", fallback_dir);
    ep.timeout      = std::chrono::milliseconds(j.value("timeout_ms", 30000));
    return ep;
}

AdapterConfig adapter_from(const json& j, const std::string& role) {
    AdapterConfig a;
    if (!j.is_object()) throw ConfigError("adapters." + role + " must be an object");
    a.mode = j.value("mode", std::string("stub"));
    if (a.mode != "stub" && a.mode != "http" && a.mode != "record" && a.mode != "replay")
        throw ConfigError("adapters." + role + ".mode must be stub, http, record or replay, got '" + a.mode + "'");
    a.endpoint = endpoint_from(j, "exchange");
    a.store    = j.value("store", std::string{});
    if ((a.mode == "record" || a.mode == "replay") && a.store.empty())
        throw ConfigError("adapters." + role + ".store is required in " + a.mode + " mode");
    return a;
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    PipelineConfig cfg;
    try {
        cfg.backend = doc.value("backend", cfg.backend);
        if (cfg.backend != "toy" && cfg.backend != "http")
            throw ConfigError("backend must be 'toy' or 'http', got '" + cfg.backend + "'");
        if (doc.contains("toy")) {
            const auto& t      = doc["toy"];
            cfg.toy.channels      = t.value("channels", cfg.toy.channels);
            cfg.toy.factor        = t.value("factor", cfg.toy.factor);
            cfg.toy.embedding_dim = t.value("embedding_dim", cfg.toy.embedding_dim);
            cfg.toy.row_scale     = t.value("row_scale", cfg.toy.row_scale);
            cfg.toy.gain          = t.value("gain", cfg.toy.gain);
            cfg.toy.seed          = t.value("seed", cfg.toy.seed);
        }
        if (doc.contains("remote")) {
            const auto& r                   = doc["remote"];
            cfg.backend_endpoint            = endpoint_from(r, "exchange");
            cfg.remote_profile.name         = r.value("name", cfg.remote_profile.name);
            cfg.remote_profile.latent_channels   = r.value("latent_channels", cfg.remote_profile.latent_channels);
            cfg.remote_profile.downsample_factor = r.value("downsample_factor", cfg.remote_profile.downsample_factor);
            cfg.remote_profile.embedding_dim     = r.value("embedding_dim", cfg.remote_profile.embedding_dim);
        }
        if (doc.contains("adapters")) {
            const auto& a = doc["adapters"];
            if (a.contains("generator")) cfg.generator = adapter_from(a["generator"], "generator");
            if (a.contains("segmenter")) cfg.segmenter = adapter_from(a["segmenter"], "segmenter");
            cfg.generator_resolution = a.value("resolution", cfg.generator_resolution);
            cfg.retries              = a.value("retries", cfg.retries);
        }
        cfg.pool_size     = doc.value("pool_size", cfg.pool_size);
        cfg.artifact_root = doc.value("artifact_root", cfg.artifact_root.string());
    } catch (const json::type_error& e) {
        throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
    }
    if (cfg.pool_size < 1) throw ConfigError("pool_size must be at least 1");
    if (cfg.retries < 0) throw ConfigError("adapters.retries must be non-negative");
    if (cfg.generator_resolution < 0) throw ConfigError("adapters.resolution must be non-negative");
    return cfg;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& path) {
    std::filesystem::path source;
    if (path) {
        source = *path;
    } else if (const char* env = std::getenv(kConfigEnvVar); env && *env) {
        source = env;
    } else {
        return {};
    }
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file(source);
    } catch (const NotFoundError&) {
        throw ConfigError("config file " + source.string() + " not found");
    }
    return parse_config(std::string(bytes.begin(), bytes.end()));
}

BackendFactory make_backend_factory(const PipelineConfig& cfg) {
    if (cfg.backend == "http") {
        if (cfg.backend_endpoint.base_url.empty()) throw ConfigError("backend 'http' needs remote.endpoint");
        return [ep = cfg.backend_endpoint, prof = cfg.remote_profile] {
            return std::unique_ptr<Backend>(std::make_unique<RemoteBackend>(ep, prof));
        };
    }
    ToyBackend probe(cfg.toy);  // validates options up front
    return [opts = cfg.toy] { return std::unique_ptr<Backend>(std::make_unique<ToyBackend>(opts)); };
}

AdapterSet make_adapters(const PipelineConfig& cfg) {
    AdapterSet set = stub_adapters();
    set.resolution = cfg.generator_resolution;
    set.retries    = cfg.retries;

    auto wrap_generator = [&](const AdapterConfig& a) -> std::shared_ptr<SketchGenerator> {
        std::shared_ptr<SketchGenerator> inner = std::make_shared<EchoGenerator>();
        if (a.mode == "http" || (a.mode == "record" && !a.endpoint.base_url.empty()))
            inner = std::make_shared<HttpGenerator>(a.endpoint);
        if (a.mode == "record" || a.mode == "replay") {
            auto store = std::make_shared<ReplayStore>(a.store, a.mode == "record" ? ReplayMode::Record : ReplayMode::Replay);
            return std::make_shared<RecordingGenerator>(inner, store);
        }
        return inner;
    };
    auto wrap_segmenter = [&](const AdapterConfig& a) -> std::shared_ptr<Segmenter> {
        std::shared_ptr<Segmenter> inner = std::make_shared<InkSegmenter>();
        if (a.mode == "http" || (a.mode == "record" && !a.endpoint.base_url.empty()))
            inner = std::make_shared<HttpSegmenter>(a.endpoint);
        if (a.mode == "record" || a.mode == "replay") {
            auto store = std::make_shared<ReplayStore>(a.store, a.mode == "record" ? ReplayMode::Record : ReplayMode::Replay);
            return std::make_shared<RecordingSegmenter>(inner, store);
        }
        return inner;
    };
    set.generator = wrap_generator(cfg.generator);
    set.segmenter = wrap_segmenter(cfg.segmenter);
    return set;
}

}  // namespace sketchscene
