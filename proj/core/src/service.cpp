#include "sketchscene/service.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sketchscene/compose.hpp"
#include "sketchscene/errors.hpp"
#include "sketchscene/hash.hpp"
#include "sketchscene/identity.hpp"

using json = nlohmann::json;

namespace sketchscene {

std::string_view to_string(JobKind kind) {
    switch (kind) {
        case JobKind::GenerateObject: return "generate_object";
        case JobKind::TrainIdentities: return "train_identities";
        case JobKind::Compose: return "compose";
        case JobKind::Render: return "render";
        case JobKind::AlphaSweep: return "alpha_sweep";
    }
    return "unknown";
}

std::string_view to_string(JobStatus status) {
    switch (status) {
        case JobStatus::Queued: return "queued";
        case JobStatus::Running: return "running";
        case JobStatus::Succeeded: return "succeeded";
        case JobStatus::Failed: return "failed";
    }
    return "unknown";
}

namespace {

JobKind parse_kind(const std::string& s) {
    for (auto k : {JobKind::GenerateObject, JobKind::TrainIdentities, JobKind::Compose, JobKind::Render,
                   JobKind::AlphaSweep})
        if (to_string(k) == s) return k;
    throw ParseError("unknown job kind '" + s + "'", 0);
}

JobStatus parse_status(const std::string& s) {
    for (auto st : {JobStatus::Queued, JobStatus::Running, JobStatus::Succeeded, JobStatus::Failed})
        if (to_string(st) == s) return st;
    throw ParseError("unknown job status '" + s + "'", 0);
}

bool terminal(JobStatus s) { return s == JobStatus::Succeeded || s == JobStatus::Failed; }

HttpReply json_reply(int status, const json& body) { return {status, body.dump(2) + "\n", "application/json"}; }

HttpReply error_reply(int status, const std::string& code, const std::string& message) {
    return json_reply(status, {{"error", code}, {"message", message}});
}

HttpReply validation_reply(const ValidationReport& report) {
    json list = json::array();
    for (const auto& v : report)
        list.push_back({{"invariant", v.invariant}, {"object_id", v.object_id}, {"message", v.message}});
    return json_reply(422, {{"error", "validation"}, {"report", list}});
}

json ref_json(const ArtifactRef& r) { return {{"name", r.name}, {"hash", r.hash}, {"media_type", r.media_type}}; }

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    try {
        json j = json::parse(body);
        if (!j.is_object()) throw ParseError("request body must be a JSON object", 0);
        return j;
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("request body: ") + e.what(), e.byte);
    }
}

bool safe_id(const std::string& id) {
    return !id.empty() && id.size() <= 128 && id != "." && id != ".." &&
           std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'; });
}

}  // namespace

struct PipelineService::Impl {
    struct Job {
        JobView view;
        json params;
        std::uint64_t seq = 0;
        std::vector<ProgressEvent> events;
    };
    struct SceneEntry {
        SceneSpec spec;
        int revision = 1;
    };

    ServiceOptions options;
    ArtifactStore store;
    std::filesystem::path scenes_dir, jobs_dir;

    mutable std::mutex mutex;
    mutable std::condition_variable changed;
    std::map<std::string, SceneEntry> scenes;
    std::map<std::string, Job> jobs;
    std::set<std::string> busy_scenes;
    std::map<std::string, HttpReply> idempotent;
    std::vector<JobRun> runs;
    std::uint64_t next_seq = 1;
    bool stopping          = false;

    std::vector<std::thread> workers;
    httplib::Server server;
    std::thread server_thread;
    std::atomic<int> bound_port{0};

    explicit Impl(ServiceOptions opts)
        : options(std::move(opts)),
          store(options.root / "store"),
          scenes_dir(options.root / "scenes"),
          jobs_dir(options.root / "jobs") {
        if (!options.backend_factory) throw ConfigError("service needs a backend factory");
        if (options.pool_size < 0) throw ConfigError("pool_size must be non-negative");
        std::filesystem::create_directories(scenes_dir);
        std::filesystem::create_directories(jobs_dir);
        load_scenes();
        load_jobs();
        install_routes();
        for (int i = 0; i < options.pool_size; ++i) workers.emplace_back([this] { worker_loop(); });
    }

    ~Impl() {
        server.stop();
        if (server_thread.joinable()) server_thread.join();
        {
            std::lock_guard lock(mutex);
            stopping = true;
        }
        changed.notify_all();
        for (auto& w : workers) w.join();
    }

    // ---- persistence ----------------------------------------------------

    std::filesystem::path scene_dir(const std::string& id) const { return scenes_dir / id; }
    SceneWorkspace workspace(const std::string& id) const { return SceneWorkspace(scene_dir(id) / "work"); }

    void persist_scene(const SceneEntry& e) {
        const auto dir = scene_dir(e.spec.scene_id);
        std::filesystem::create_directories(dir);
        save_scene(e.spec, dir / "scene.json");
        write_file_atomic(dir / "meta.json", json{{"revision", e.revision}}.dump() + "\n");
    }

    void load_scenes() {
        for (const auto& entry : std::filesystem::directory_iterator(scenes_dir)) {
            const auto doc = entry.path() / "scene.json";
            if (!std::filesystem::exists(doc)) continue;
            SceneEntry e;
            e.spec           = load_scene(doc);
            const auto bytes = read_file(entry.path() / "meta.json");
            e.revision       = json::parse(bytes.begin(), bytes.end()).value("revision", 1);
            scenes[e.spec.scene_id] = std::move(e);
        }
    }

    json job_json(const Job& j) const {
        json outputs = json::array();
        for (const auto& r : j.view.outputs) outputs.push_back(ref_json(r));
        return {
            {"job_id", j.view.job_id},
            {"kind", std::string(to_string(j.view.kind))},
            {"scene_id", j.view.scene_id},
            {"status", std::string(to_string(j.view.status))},
            {"progress", j.view.progress},
            {"inputs_hash", j.view.inputs_hash},
            {"outputs", outputs},
            {"error", j.view.error},
            {"restarts", j.view.restarts},
            {"params", j.params},
            {"seq", j.seq},
        };
    }

    void persist_job(const Job& j) { write_file_atomic(jobs_dir / (j.view.job_id + ".json"), job_json(j).dump(2) + "\n"); }

    void load_jobs() {
        for (const auto& entry : std::filesystem::directory_iterator(jobs_dir)) {
            if (entry.path().extension() != ".json") continue;
            const auto bytes = read_file(entry.path());
            Job j;
            try {
                const json d     = json::parse(bytes.begin(), bytes.end());
                j.view.job_id    = d.at("job_id").get<std::string>();
                j.view.kind      = parse_kind(d.at("kind").get<std::string>());
                j.view.scene_id  = d.at("scene_id").get<std::string>();
                j.view.status    = parse_status(d.at("status").get<std::string>());
                j.view.progress  = d.value("progress", 0.0);
                j.view.inputs_hash = d.value("inputs_hash", std::string{});
                j.view.error     = d.value("error", std::string{});
                j.view.restarts  = d.value("restarts", 0);
                j.params         = d.value("params", json::object());
                j.seq            = d.value("seq", std::uint64_t{0});
                for (const auto& r : d.value("outputs", json::array()))
                    j.view.outputs.push_back({r.at("name"), r.at("hash"), r.at("media_type")});
            } catch (const json::exception& e) {
                throw IoError("job record " + entry.path().string() + " is corrupt: " + e.what());
            }
            if (j.view.status == JobStatus::Running) {
                if (j.view.restarts >= 1) {
                    j.view.status = JobStatus::Failed;
                    j.view.error  = "job interrupted twice; not retried again";
                } else {
                    j.view.status = JobStatus::Queued;
                    j.view.progress = 0.0;
                    ++j.view.restarts;
                }
                persist_job(j);
            }
            next_seq = std::max(next_seq, j.seq + 1);
            jobs[j.view.job_id] = std::move(j);
        }
    }

    // ---- scenes ---------------------------------------------------------

    HttpReply create_scene(const std::string& document, const std::optional<std::string>& sketch_png) {
        SceneSpec spec;
        if (sketch_png) {
            const std::vector<std::uint8_t> bytes(sketch_png->begin(), sketch_png->end());
            const GrayImage sketch = decode_png_gray(bytes);
            spec = deserialize_scene(document, [&](const std::string&) { return sketch; });
        } else {
            spec = deserialize_scene(document);
        }
        if (auto report = validate_scene(spec); !report.empty()) return validation_reply(report);
        if (!safe_id(spec.scene_id)) return error_reply(422, "validation", "scene_id may only use [A-Za-z0-9._-]");
        std::lock_guard lock(mutex);
        if (scenes.count(spec.scene_id)) return error_reply(409, "conflict", "scene '" + spec.scene_id + "' exists");
        SceneEntry e{std::move(spec), 1};
        persist_scene(e);
        const std::string id = e.spec.scene_id;
        scenes[id]           = std::move(e);
        return json_reply(201, {{"scene_id", id}, {"revision", 1}});
    }

    json scene_json(const SceneEntry& e) const {
        return {{"scene_id", e.spec.scene_id}, {"revision", e.revision}, {"scene", json::parse(serialize_scene(e.spec))}};
    }

    HttpReply get_scene(const std::string& id) const {
        std::lock_guard lock(mutex);
        auto it = scenes.find(id);
        if (it == scenes.end()) return error_reply(404, "not_found", "no scene '" + id + "'");
        return json_reply(200, scene_json(it->second));
    }

    HttpReply get_sketch(const std::string& id) const {
        std::lock_guard lock(mutex);
        auto it = scenes.find(id);
        if (it == scenes.end()) return error_reply(404, "not_found", "no scene '" + id + "'");
        const auto png = encode_png(it->second.spec.sketch);
        return {200, std::string(png.begin(), png.end()), "image/png"};
    }

    HttpReply list_scenes() const {
        std::lock_guard lock(mutex);
        json list = json::array();
        for (const auto& [id, e] : scenes) list.push_back({{"scene_id", id}, {"revision", e.revision}});
        return json_reply(200, {{"scenes", list}});
    }

    // Replaces (or appends) one annotation under optimistic concurrency.
    HttpReply put_object(const std::string& id, const std::string& object_id, const std::string& body) {
        const json req = parse_body(body);
        if (!req.contains("revision") || !req["revision"].is_number_integer())
            return error_reply(400, "bad_request", "body needs an integer 'revision'");
        if (!req.contains("annotation") || !req["annotation"].is_object())
            return error_reply(400, "bad_request", "body needs an 'annotation' object");
        std::lock_guard lock(mutex);
        auto it = scenes.find(id);
        if (it == scenes.end()) return error_reply(404, "not_found", "no scene '" + id + "'");
        SceneEntry& entry = it->second;
        if (req["revision"].get<int>() != entry.revision)
            return json_reply(409, {{"error", "conflict"},
                                    {"message", "revision is stale"},
                                    {"revision", entry.revision}});
        json doc        = json::parse(serialize_scene(entry.spec));
        json annotation = req["annotation"];
        annotation["object_id"] = object_id;
        bool replaced = false;
        for (auto& o : doc["objects"]) {
            if (o.value("object_id", std::string{}) == object_id) {
                o        = annotation;
                replaced = true;
            }
        }
        if (!replaced) doc["objects"].push_back(annotation);
        const GrayImage sketch = entry.spec.sketch;
        SceneSpec updated      = deserialize_scene(doc.dump(), [&](const std::string&) { return sketch; });
        if (auto report = validate_scene(updated); !report.empty()) return validation_reply(report);
        entry.spec = std::move(updated);
        ++entry.revision;
        persist_scene(entry);
        return json_reply(200, scene_json(entry));
    }

    // ---- jobs -----------------------------------------------------------

    std::optional<SceneEntry> scene_copy(const std::string& id) const {
        std::lock_guard lock(mutex);
        auto it = scenes.find(id);
        if (it == scenes.end()) return std::nullopt;
        return it->second;
    }

    HttpReply submit(JobKind kind, const std::string& scene_id, json params) {
        std::lock_guard lock(mutex);
        auto it = scenes.find(scene_id);
        if (it == scenes.end()) return error_reply(404, "not_found", "no scene '" + scene_id + "'");
        Job j;
        j.seq = next_seq++;
        char id[32];
        std::snprintf(id, sizeof id, "job-%06llu", static_cast<unsigned long long>(j.seq));
        j.view.job_id   = id;
        j.view.kind     = kind;
        j.view.scene_id = scene_id;
        j.params        = std::move(params);
        const json inputs = {{"kind", std::string(to_string(kind))},
                             {"scene", json::parse(serialize_scene(it->second.spec))},
                             {"params", j.params}};
        j.view.inputs_hash = sha256_hex(inputs.dump());
        persist_job(j);
        const json body = job_json(j);
        jobs[j.view.job_id] = std::move(j);
        changed.notify_all();
        return json_reply(202, body);
    }

    RenderConfig render_config(const json& p, const SceneSpec& spec) const {
        RenderConfig cfg;
        cfg.width             = spec.canvas.width;
        cfg.height            = spec.canvas.height;
        cfg.steps             = p.value("T", cfg.steps);
        cfg.alpha             = p.value("alpha", cfg.alpha);
        cfg.seed              = p.value("seed", cfg.seed);
        cfg.guidance_scale    = p.value("guidance_scale", cfg.guidance_scale);
        cfg.global_prompt     = p.value("global_prompt", std::string{});
        cfg.background_prompt = p.value("background_prompt", std::string{});
        return cfg;
    }

    int backend_factor() const { return options.backend_factory()->profile().downsample_factor; }

    HttpReply submit_checked(JobKind kind, const std::string& scene_id, const std::string& body,
                             const std::string& object_id = {}) {
        json p = parse_body(body);
        auto scene = scene_copy(scene_id);
        if (!scene) return error_reply(404, "not_found", "no scene '" + scene_id + "'");
        try {
            switch (kind) {
                case JobKind::GenerateObject: {
                    if (!scene->spec.find(object_id))
                        return error_reply(404, "not_found", "no object '" + object_id + "' in scene " + scene_id);
                    p["object_id"] = object_id;
                    p["seed"]      = p.value("seed", std::uint64_t{0});
                    break;
                }
                case JobKind::TrainIdentities: {
                    const TrainConfig& t = options.train_defaults;
                    p["steps"]         = p.value("steps", t.steps);
                    p["learning_rate"] = p.value("learning_rate", t.learning_rate);
                    p["seed"]          = p.value("seed", t.seed);
                    if (p["steps"].get<int>() < 0 || !(p["learning_rate"].get<double>() > 0.0))
                        return error_reply(422, "validation", "steps must be >= 0 and learning_rate > 0");
                    break;
                }
                case JobKind::Compose: break;
                case JobKind::Render: {
                    const RenderConfig cfg = render_config(p, scene->spec);
                    if (auto report = validate_render_config(cfg, backend_factor()); !report.empty())
                        return validation_reply(report);
                    p["T"]     = cfg.steps;
                    p["alpha"] = cfg.alpha;
                    p["seed"]  = cfg.seed;
                    break;
                }
                case JobKind::AlphaSweep: {
                    std::vector<double> alphas(kSweepPreset.begin(), kSweepPreset.end());
                    if (p.contains("alphas")) alphas = p["alphas"].get<std::vector<double>>();
                    if (alphas.empty()) return error_reply(422, "validation", "alphas must not be empty");
                    for (double a : alphas) {
                        RenderConfig cfg = render_config(p, scene->spec);
                        cfg.alpha        = a;
                        if (auto report = validate_render_config(cfg, backend_factor()); !report.empty())
                            return validation_reply(report);
                    }
                    p["alphas"] = alphas;
                    p["T"]      = p.value("T", RenderConfig{}.steps);
                    p["seed"]   = p.value("seed", std::uint64_t{0});
                    break;
                }
            }
        } catch (const json::type_error& e) {
            return error_reply(400, "bad_request", std::string("parameter has the wrong type: ") + e.what());
        }
        if (auto report = validate_scene(scene->spec); !report.empty()) return validation_reply(report);
        return submit(kind, scene_id, std::move(p));
    }

    HttpReply get_job(const std::string& id) const {
        std::lock_guard lock(mutex);
        auto it = jobs.find(id);
        if (it == jobs.end()) return error_reply(404, "not_found", "no job '" + id + "'");
        return json_reply(200, job_json(it->second));
    }

    // NDJSON of events from index `since`; waits up to wait_ms for news.
    HttpReply job_events(const std::string& id, std::size_t since, int wait_ms) const {
        std::unique_lock lock(mutex);
        auto it = jobs.find(id);
        if (it == jobs.end()) return error_reply(404, "not_found", "no job '" + id + "'");
        changed.wait_for(lock, std::chrono::milliseconds(std::max(0, wait_ms)), [&] {
            const Job& j = jobs.at(id);
            return j.events.size() > since || terminal(j.view.status) || stopping;
        });
        const Job& j = jobs.at(id);
        std::string out;
        for (std::size_t i = since; i < j.events.size(); ++i) {
            const auto& e = j.events[i];
            out += json{{"job_id", e.job_id}, {"step", e.step}, {"total", e.total}, {"note", e.note}}.dump() + "\n";
        }
        return {200, out, "application/x-ndjson"};
    }

    // ---- workers --------------------------------------------------------

    Job* next_runnable() {
        Job* best = nullptr;
        for (auto& [id, j] : jobs) {
            if (j.view.status != JobStatus::Queued || busy_scenes.count(j.view.scene_id)) continue;
            if (!best || j.seq < best->seq) best = &j;
        }
        return best;
    }

    void worker_loop() {
        std::unique_ptr<Backend> backend = options.backend_factory();
        for (;;) {
            std::string job_id, scene_id;
            JobKind kind;
            json params;
            {
                std::unique_lock lock(mutex);
                changed.wait(lock, [&] { return stopping || next_runnable(); });
                if (stopping) return;
                Job* j        = next_runnable();
                j->view.status = JobStatus::Running;
                busy_scenes.insert(j->view.scene_id);
                persist_job(*j);
                job_id   = j->view.job_id;
                scene_id = j->view.scene_id;
                kind     = j->view.kind;
                params   = j->params;
            }
            JobRun run{job_id, scene_id, std::chrono::steady_clock::now(), {}};
            std::vector<ArtifactRef> outputs;
            std::string error;
            try {
                outputs = execute(job_id, kind, scene_id, params, *backend);
            } catch (const std::exception& e) {
                error = e.what();
            }
            run.finished = std::chrono::steady_clock::now();
            {
                std::lock_guard lock(mutex);
                Job& j = jobs.at(job_id);
                j.view.outputs = std::move(outputs);
                j.view.error   = error;
                j.view.status  = error.empty() ? JobStatus::Succeeded : JobStatus::Failed;
                if (error.empty()) j.view.progress = 1.0;
                j.events.push_back({job_id, 0, 0, error.empty() ? "succeeded" : "failed: " + error});
                persist_job(j);
                busy_scenes.erase(scene_id);
                runs.push_back(run);
            }
            changed.notify_all();
        }
    }

    void report(const std::string& job_id, int step, int total, const std::string& note) {
        {
            std::lock_guard lock(mutex);
            Job& j = jobs.at(job_id);
            j.events.push_back({job_id, step, total, note});
            if (total > 0) j.view.progress = static_cast<double>(step) / total;
        }
        changed.notify_all();
    }

    ArtifactRef keep(const std::string& scene_id, const std::string& name, std::span<const std::uint8_t> bytes) {
        return store.link(scene_id, name, store.put(bytes, media_type_for(name)));
    }
    ArtifactRef keep(const std::string& scene_id, const std::string& name, const std::string& text) {
        return store.link(scene_id, name, store.put(text, media_type_for(name)));
    }

    void keep_render(const std::string& scene_id, const std::string& prefix, const RenderArtifacts& r,
                     std::vector<ArtifactRef>& out) {
        out.push_back(keep(scene_id, prefix + "render.png", r.image_png));
        out.push_back(keep(scene_id, prefix + "manifest.json", r.manifest));
        out.push_back(keep(scene_id, prefix + "timing.json", r.timing));
    }

    // Stored assets, with missing ones generated from the render seed (not persisted).
    std::vector<ObjectAsset> scene_assets(const SceneSpec& spec, const SceneWorkspace& ws, std::uint64_t seed) {
        return complete_assets(spec, ws.load_assets(spec), options.adapters, seed);
    }

    std::vector<ArtifactRef> execute(const std::string& job_id, JobKind kind, const std::string& scene_id,
                                     const json& p, Backend& backend) {
        auto scene = scene_copy(scene_id);
        if (!scene) throw NotFoundError("scene '" + scene_id + "' vanished");
        const SceneSpec& spec = scene->spec;
        const SceneWorkspace ws = workspace(scene_id);
        std::vector<ArtifactRef> out;

        switch (kind) {
            case JobKind::GenerateObject: {
                const std::string oid = p.at("object_id");
                auto assets = generate_objects(spec, options.adapters, p.at("seed").get<std::uint64_t>(), oid);
                const ObjectAsset& a = assets.front();
                save_asset(a, ws.asset_dir(oid), options.adapters.config_hash());
                out.push_back(keep(scene_id, oid + "/image.png", encode_png(a.image)));
                out.push_back(keep(scene_id, oid + "/mask.png", encode_png(a.mask)));
                out.push_back(keep(scene_id, oid + "/asset.json", asset_metadata(a, options.adapters.config_hash())));
                report(job_id, 1, 1, "generated " + oid);
                break;
            }
            case JobKind::TrainIdentities: {
                const auto assets = ws.load_assets(spec);
                for (const auto& o : spec.objects) {
                    const bool have = std::any_of(assets.begin(), assets.end(),
                                                  [&](const ObjectAsset& a) { return a.object_id == o.object_id; });
                    if (!have) throw CompositionError("object has no generated asset", o.object_id);
                }
                std::vector<std::string> labels;
                for (const auto& a : assets) labels.push_back(spec.find(a.object_id)->class_label);
                TrainConfig cfg;
                cfg.steps         = p.at("steps");
                cfg.learning_rate = p.at("learning_rate");
                cfg.seed          = p.at("seed");
                const auto embeddings = train_identities(assets, labels, cfg, backend);
                for (std::size_t i = 0; i < embeddings.size(); ++i) {
                    const auto stem = ws.identity_stem(assets[i].object_id);
                    std::filesystem::create_directories(stem.parent_path());
                    save_embedding(embeddings[i], stem);
                    auto sst = stem, meta = stem;
                    sst += ".sst";
                    meta += ".json";
                    out.push_back(keep(scene_id, "identities/" + assets[i].object_id + ".sst", read_file(sst)));
                    out.push_back(keep(scene_id, "identities/" + assets[i].object_id + ".json", read_file(meta)));
                    report(job_id, static_cast<int>(i + 1), static_cast<int>(embeddings.size()),
                           "trained " + embeddings[i].token);
                }
                break;
            }
            case JobKind::Compose: {
                const auto assets = ws.load_assets(spec);
                const auto guide  = compose_guide(spec, assets, backend.profile().downsample_factor);
                Mask latent(guide.latent_mask.width, guide.latent_mask.height);
                latent.bits = guide.latent_mask.bits;
                json placements = json::array();
                for (const auto& pl : guide.placement_log)
                    placements.push_back({{"object_id", pl.object_id},
                                          {"box", {pl.box.left, pl.box.top, pl.box.width, pl.box.height}},
                                          {"scale", pl.scale},
                                          {"z_index", pl.z_index}});
                out.push_back(keep(scene_id, "guide/x_init.png", encode_png(guide.x_init)));
                out.push_back(keep(scene_id, "guide/M_init.png", encode_png(guide.full_mask)));
                out.push_back(keep(scene_id, "guide/m_init.png", encode_png(latent)));
                out.push_back(keep(scene_id, "guide/placement.json",
                                   json{{"guide_hash", guide_hash(guide)}, {"placements", placements}}.dump(2) + "\n"));
                report(job_id, 1, 1, "composed");
                break;
            }
            case JobKind::Render: {
                const RenderConfig cfg = render_config(p, spec);
                const auto assets      = scene_assets(spec, ws, cfg.seed);
                const auto embeddings  = ws.load_identities(spec);
                const auto r = render_scene(spec, assets, embeddings, cfg, backend,
                                            [&](int step, int total, const std::string& note) {
                                                report(job_id, step, total, note);
                                            });
                write_render(r, ws.render_dir(render_name(cfg)));
                keep_render(scene_id, "", r, out);
                break;
            }
            case JobKind::AlphaSweep: {
                const auto alphas = p.at("alphas").get<std::vector<double>>();
                RenderConfig base = render_config(p, spec);
                const auto assets     = scene_assets(spec, ws, base.seed);
                const auto embeddings = ws.load_identities(spec);
                std::vector<RgbImage> tiles;
                const int total = static_cast<int>(alphas.size()) * base.steps;
                int done        = 0;
                for (double a : alphas) {
                    RenderConfig cfg = base;
                    cfg.alpha        = a;
                    const auto r = render_scene(spec, assets, embeddings, cfg, backend,
                                                [&](int, int, const std::string& note) {
                                                    report(job_id, ++done, total, note);
                                                });
                    write_render(r, ws.render_dir(render_name(cfg)));
                    keep_render(scene_id, render_name(cfg) + "/", r, out);
                    tiles.push_back(r.inference.image);
                }
                out.push_back(keep(scene_id, "grid.png", encode_png(make_grid(tiles))));
                break;
            }
        }
        return out;
    }

    // ---- HTTP -----------------------------------------------------------

    static void send(httplib::Response& res, const HttpReply& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    }

    template <typename Fn>
    void guarded(const httplib::Request& req, httplib::Response& res, Fn&& fn) {
        const std::string key = req.get_header_value("Idempotency-Key");
        const std::string scoped = key.empty() ? std::string{} : req.method + " " + req.path + " " + key;
        if (!scoped.empty()) {
            std::lock_guard lock(mutex);
            if (auto it = idempotent.find(scoped); it != idempotent.end()) {
                send(res, it->second);
                return;
            }
        }
        HttpReply reply;
        try {
            reply = fn();
        } catch (const ParseError& e) {
            reply = error_reply(400, "parse_error", e.what());
        } catch (const VersionError& e) {
            reply = error_reply(422, "version", e.what());
        } catch (const NotFoundError& e) {
            reply = error_reply(404, "not_found", e.what());
        } catch (const Error& e) {
            reply = error_reply(422, "invalid", e.what());
        } catch (const std::exception& e) {
            reply = error_reply(500, "internal", e.what());
        }
        if (!scoped.empty() && reply.status < 500) {
            std::lock_guard lock(mutex);
            idempotent.emplace(scoped, reply);
        }
        send(res, reply);
    }

    void install_routes() {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                    {"Access-Control-Allow-Headers", "Content-Type, Idempotency-Key"},
                                    {"Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS"}});
        server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server.Get("/scenes", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] { return list_scenes(); });
        });
        server.Post("/scenes", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] {
                if (req.is_multipart_form_data()) {
                    if (!req.has_file("scene")) return error_reply(400, "bad_request", "multipart body needs a 'scene' part");
                    std::optional<std::string> sketch;
                    if (req.has_file("sketch")) sketch = req.get_file_value("sketch").content;
                    return create_scene(req.get_file_value("scene").content, sketch);
                }
                return create_scene(req.body, std::nullopt);
            });
        });
        server.Get("/scenes/:id", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] { return get_scene(req.path_params.at("id")); });
        });
        server.Get("/scenes/:id/sketch", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] { return get_sketch(req.path_params.at("id")); });
        });
        server.Get("/scenes/:id/artifacts", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] {
                json list = json::array();
                for (const auto& r : store.scene_artifacts(req.path_params.at("id"))) list.push_back(ref_json(r));
                return json_reply(200, {{"artifacts", list}});
            });
        });
        server.Put("/scenes/:id/objects/:oid", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] { return put_object(req.path_params.at("id"), req.path_params.at("oid"), req.body); });
        });
        server.Post("/scenes/:id/objects/:oid/generate", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] {
                return submit_checked(JobKind::GenerateObject, req.path_params.at("id"), req.body,
                                      req.path_params.at("oid"));
            });
        });
        server.Post("/scenes/:id/identities/train", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] { return submit_checked(JobKind::TrainIdentities, req.path_params.at("id"), req.body); });
        });
        server.Post("/scenes/:id/compose", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] { return submit_checked(JobKind::Compose, req.path_params.at("id"), req.body); });
        });
        server.Post("/scenes/:id/render", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] { return submit_checked(JobKind::Render, req.path_params.at("id"), req.body); });
        });
        server.Post("/scenes/:id/sweep", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] { return submit_checked(JobKind::AlphaSweep, req.path_params.at("id"), req.body); });
        });
        server.Get("/jobs/:id", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] { return get_job(req.path_params.at("id")); });
        });
        server.Get("/jobs/:id/events", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] {
                const std::size_t since = req.has_param("since") ? std::stoul(req.get_param_value("since")) : 0;
                const int wait_ms       = req.has_param("wait_ms") ? std::stoi(req.get_param_value("wait_ms")) : 0;
                return job_events(req.path_params.at("id"), since, std::min(wait_ms, 30000));
            });
        });
        server.Get("/artifacts/:hash", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(req, res, [&] {
                const std::string hash = req.path_params.at("hash");
                auto blob              = store.get(hash);
                if (!blob) return error_reply(404, "not_found", "no artifact " + hash);
                return HttpReply{200, std::string(blob->bytes.begin(), blob->bytes.end()), blob->media_type};
            });
        });
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"status\":\"ok\"}\n", "application/json");
        });
    }
};

PipelineService::PipelineService(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

PipelineService::~PipelineService() = default;

int PipelineService::start(const std::string& host, int port) {
    auto& srv = impl_->server;
    const int bound = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    impl_->bound_port    = bound;
    impl_->server_thread = std::thread([&srv] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    return bound;
}

void PipelineService::listen(const std::string& host, int port) {
    impl_->bound_port = port;
    if (!impl_->server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void PipelineService::stop() { impl_->server.stop(); }

int PipelineService::port() const { return impl_->bound_port; }

std::optional<JobView> PipelineService::job(const std::string& job_id) const {
    std::lock_guard lock(impl_->mutex);
    auto it = impl_->jobs.find(job_id);
    if (it == impl_->jobs.end()) return std::nullopt;
    return it->second.view;
}

std::optional<JobView> PipelineService::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(impl_->mutex);
    auto it = impl_->jobs.find(job_id);
    if (it == impl_->jobs.end()) return std::nullopt;
    impl_->changed.wait_for(lock, timeout, [&] { return terminal(it->second.view.status); });
    return it->second.view;
}

std::vector<ProgressEvent> PipelineService::events(const std::string& job_id, std::size_t since) const {
    std::lock_guard lock(impl_->mutex);
    auto it = impl_->jobs.find(job_id);
    if (it == impl_->jobs.end()) return {};
    const auto& ev = it->second.events;
    if (since >= ev.size()) return {};
    return {ev.begin() + static_cast<std::ptrdiff_t>(since), ev.end()};
}

std::vector<JobRun> PipelineService::runs() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->runs;
}

ArtifactStore& PipelineService::store() { return impl_->store; }

}  // namespace sketchscene
