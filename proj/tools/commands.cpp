#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sketchscene/compose.hpp"
#include "sketchscene/errors.hpp"
#include "sketchscene/identity.hpp"
#include "sketchscene/pipeline.hpp"
#include "sketchscene/service.hpp"

namespace sketchscene::cli {

namespace {

struct InvalidInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const InvalidInput& e) {
        std::cerr << "invalid: " << e.what() << "\n";
        return kInvalid;
    } catch (const ParseError& e) {
        std::cerr << "invalid document: " << e.what() << "\n";
        return kInvalid;
    } catch (const VersionError& e) {
        std::cerr << "invalid document: " << e.what() << "\n";
        return kInvalid;
    } catch (const NotFoundError& e) {
        std::cerr << "missing input: " << e.what() << "\n";
        return kFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}

SceneSpec load_valid_scene(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw NotFoundError(path.string());
    SceneSpec spec = load_scene(path);
    if (auto report = validate_scene(spec); !report.empty()) {
        for (const auto& v : report) std::cerr << describe(v) << "\n";
        throw InvalidInput("scene " + path.string() + " has " + std::to_string(report.size()) + " violation(s)");
    }
    return spec;
}

RenderConfig make_render_config(const RenderArgs& args, const SceneSpec& spec, int factor) {
    RenderConfig cfg;
    cfg.steps             = args.steps;
    cfg.alpha             = args.alpha;
    cfg.seed              = args.seed;
    cfg.width             = spec.canvas.width;
    cfg.height            = spec.canvas.height;
    cfg.global_prompt     = args.global_prompt;
    cfg.background_prompt = args.background_prompt;
    cfg.guidance_scale    = args.guidance_scale;
    if (auto report = validate_render_config(cfg, factor); !report.empty()) {
        for (const auto& v : report) std::cerr << describe(v) << "\n";
        throw InvalidInput("render configuration rejected");
    }
    return cfg;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

PipelineConfig Common::resolve() const {
    PipelineConfig cfg = load_config(config_path);
    if (!backend.empty()) {
        if (backend != "toy" && backend != "http") throw ConfigError("unknown backend '" + backend + "'");
        cfg.backend = backend;
    }
    if (pool_size > 0) cfg.pool_size = pool_size;
    return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    auto number = [](const std::string& s) {
        if (s.empty() || !std::all_of(s.begin(), s.end(), ::isdigit)) throw std::invalid_argument("bad seed '" + s + "'");
        return static_cast<std::uint64_t>(std::stoull(s));
    };
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const auto lo = number(text.substr(0, dots)), hi = number(text.substr(dots + 2));
        if (hi < lo) throw std::invalid_argument("seed range " + text + " is empty");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(number(item));
    if (out.empty()) throw std::invalid_argument("no seeds given");
    return out;
}

std::vector<double> parse_alphas(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v         = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad alpha '" + item + "'");
        }
        if (used != item.size()) throw std::invalid_argument("bad alpha '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("alpha list is empty");
    return out;
}

int scene_validate(const Common&, const std::filesystem::path& scene) {
    return guarded([&] {
        if (!std::filesystem::exists(scene)) throw NotFoundError(scene.string());
        const SceneSpec spec = load_scene(scene);
        const auto report    = validate_scene(spec);
        for (const auto& v : report) std::cout << describe(v) << "\n";
        if (!report.empty()) return static_cast<int>(kInvalid);
        std::cout << spec.scene_id << ": ok (" << spec.objects.size() << " objects)\n";
        return static_cast<int>(kOk);
    });
}

int objects_generate(const Common& common, const std::filesystem::path& scene, std::uint64_t seed,
                     const std::optional<std::string>& object_id) {
    return guarded([&] {
        const PipelineConfig cfg = common.resolve();
        const SceneSpec spec     = load_valid_scene(scene);
        const AdapterSet adapters = make_adapters(cfg);
        const SceneWorkspace ws(common.out);
        for (const auto& a : generate_objects(spec, adapters, seed, object_id)) {
            save_asset(a, ws.asset_dir(a.object_id), adapters.config_hash());
            std::cout << ws.asset_dir(a.object_id).string() << " (attempts " << a.attempts << ")\n";
        }
        return static_cast<int>(kOk);
    });
}

int identity_train(const Common& common, const std::filesystem::path& scene, std::optional<int> steps,
                   std::optional<double> lr, std::uint64_t seed) {
    return guarded([&] {
        const PipelineConfig cfg = common.resolve();
        const SceneSpec spec     = load_valid_scene(scene);
        const SceneWorkspace ws(common.out);
        const auto assets = ws.load_assets(spec);
        std::vector<std::string> labels;
        for (const auto& o : spec.objects) {
            const bool have = std::any_of(assets.begin(), assets.end(),
                                          [&](const ObjectAsset& a) { return a.object_id == o.object_id; });
            if (!have) throw NotFoundError("no asset for object '" + o.object_id + "'; run objects generate first");
        }
        for (const auto& a : assets) labels.push_back(spec.find(a.object_id)->class_label);
        TrainConfig tc    = default_train_config(cfg.backend);
        tc.steps          = steps.value_or(tc.steps);
        tc.learning_rate  = lr.value_or(tc.learning_rate);
        tc.seed           = seed;
        auto backend      = make_backend_factory(cfg)();
        const auto trained = train_identities(assets, labels, tc, *backend);
        for (std::size_t i = 0; i < trained.size(); ++i) {
            const auto stem = ws.identity_stem(assets[i].object_id);
            std::filesystem::create_directories(stem.parent_path());
            save_embedding(trained[i], stem);
            const auto& trace = trained[i].loss_trace;
            std::cout << trained[i].token << ": " << trace.size() << " steps";
            if (!trace.empty()) std::cout << ", loss " << fixed(trace.front(), 5) << " -> " << fixed(trace.back(), 5);
            std::cout << "\n";
        }
        return static_cast<int>(kOk);
    });
}

int scene_compose(const Common& common, const std::filesystem::path& scene) {
    return guarded([&] {
        const PipelineConfig cfg = common.resolve();
        const SceneSpec spec     = load_valid_scene(scene);
        const SceneWorkspace ws(common.out);
        auto backend      = make_backend_factory(cfg)();
        const auto assets = ws.load_assets(spec);
        const auto guide  = compose_guide(spec, assets, backend->profile().downsample_factor);
        Mask latent(guide.latent_mask.width, guide.latent_mask.height);
        latent.bits    = guide.latent_mask.bits;
        const auto dir = common.out / "guide";
        write_file_atomic(dir / "x_init.png", encode_png(guide.x_init));
        write_file_atomic(dir / "M_init.png", encode_png(guide.full_mask));
        write_file_atomic(dir / "m_init.png", encode_png(latent));
        std::cout << dir.string() << " (guide " << guide_hash(guide).substr(0, 12) << ")\n";
        return static_cast<int>(kOk);
    });
}

int scene_render(const Common& common, const RenderArgs& args) {
    return guarded([&] {
        const PipelineConfig cfg = common.resolve();
        const SceneSpec spec     = load_valid_scene(args.scene);
        auto backend             = make_backend_factory(cfg)();
        const RenderConfig rc    = make_render_config(args, spec, backend->profile().downsample_factor);
        const SceneWorkspace ws(common.out);
        const auto assets     = complete_assets(spec, ws.load_assets(spec), make_adapters(cfg), rc.seed);
        const auto embeddings = ws.load_identities(spec);
        const auto r          = render_scene(spec, assets, embeddings, rc, *backend);
        const auto dir        = ws.render_dir(render_name(rc));
        write_render(r, dir);
        std::cout << (dir / "render.png").string() << " fg_fidelity=" << fixed(r.diagnostics.fg_fidelity, 4)
                  << " seam_score=" << fixed(r.diagnostics.seam_score, 4) << "\n";
        return static_cast<int>(kOk);
    });
}

int scene_sweep(const Common& common, const RenderArgs& args, const std::vector<double>& alphas) {
    return guarded([&] {
        const PipelineConfig cfg = common.resolve();
        const SceneSpec spec     = load_valid_scene(args.scene);
        auto backend             = make_backend_factory(cfg)();
        const int f              = backend->profile().downsample_factor;
        std::vector<RenderConfig> configs;
        for (double a : alphas) {
            RenderArgs one = args;
            one.alpha      = a;
            configs.push_back(make_render_config(one, spec, f));
        }
        const SceneWorkspace ws(common.out);
        const auto assets     = complete_assets(spec, ws.load_assets(spec), make_adapters(cfg), args.seed);
        const auto embeddings = ws.load_identities(spec);
        std::vector<RgbImage> tiles;
        for (const auto& rc : configs) {
            const auto r   = render_scene(spec, assets, embeddings, rc, *backend);
            const auto dir = ws.render_dir(render_name(rc));
            write_render(r, dir);
            tiles.push_back(r.inference.image);
            std::cout << (dir / "render.png").string() << " alpha=" << fixed(rc.alpha, 3)
                      << " fg_fidelity=" << fixed(r.diagnostics.fg_fidelity, 4)
                      << " seam_score=" << fixed(r.diagnostics.seam_score, 4) << "\n";
        }
        char name[64];
        std::snprintf(name, sizeof name, "sweep_s%llu_T%d", static_cast<unsigned long long>(args.seed), args.steps);
        const auto grid = common.out / "renders" / name / "grid.png";
        write_file_atomic(grid, encode_png(make_grid(tiles)));
        std::cout << grid.string() << "\n";
        return static_cast<int>(kOk);
    });
}

int bench_run(const Common& common, const BenchArgs& args) {
    return guarded([&] {
        const PipelineConfig cfg = common.resolve();
        if (!std::filesystem::is_directory(args.scenes_dir)) throw NotFoundError(args.scenes_dir.string());
        std::vector<std::filesystem::path> docs;
        for (const auto& e : std::filesystem::directory_iterator(args.scenes_dir))
            if (e.is_regular_file() && e.path().extension() == ".json") docs.push_back(e.path());
        std::sort(docs.begin(), docs.end());
        if (docs.empty()) throw NotFoundError("no scene documents (*.json) in " + args.scenes_dir.string());

        std::vector<SceneSpec> scenes;
        for (const auto& d : docs) scenes.push_back(load_valid_scene(d));
        const BackendFactory factory = make_backend_factory(cfg);
        const AdapterSet adapters    = make_adapters(cfg);
        const int factor             = factory()->profile().downsample_factor;
        const std::string backend_name = factory()->profile().name;

        std::vector<std::vector<std::string>> rows(scenes.size());
        std::atomic<std::size_t> next{0};
        std::mutex error_mutex;
        std::string first_error;

        auto work = [&] {
            auto backend = factory();
            for (std::size_t i = next++; i < scenes.size(); i = next++) {
                try {
                    const SceneSpec& spec = scenes[i];
                    const SceneWorkspace ws(common.out / "bench" / spec.scene_id);
                    for (double alpha : args.alphas) {
                        for (std::uint64_t seed : args.seeds) {
                            RenderArgs ra;
                            ra.scene  = docs[i];
                            ra.alpha  = alpha;
                            ra.seed   = seed;
                            ra.steps  = args.steps;
                            const RenderConfig rc = make_render_config(ra, spec, factor);
                            const auto start      = std::chrono::steady_clock::now();
                            const auto assets = complete_assets(spec, ws.load_assets(spec), adapters, seed);
                            const auto r = render_scene(spec, assets, ws.load_identities(spec), rc, *backend);
                            const auto dir = ws.render_dir(render_name(rc));
                            write_render(r, dir);
                            const double ms = std::chrono::duration<double, std::milli>(
                                                  std::chrono::steady_clock::now() - start)
                                                  .count();
                            rows[i].push_back(spec.scene_id + "," + fixed(alpha, 3) + "," + std::to_string(seed) + "," +
                                              std::to_string(rc.steps) + "," + backend_name + "," +
                                              fixed(r.diagnostics.fg_fidelity, 6) + "," +
                                              fixed(r.diagnostics.seam_score, 6) + "," + fixed(ms, 3) + "," +
                                              (dir / "render.png").string());
                        }
                    }
                } catch (const std::exception& e) {
                    std::lock_guard lock(error_mutex);
                    if (first_error.empty()) first_error = scenes[i].scene_id + ": " + e.what();
                }
            }
        };
        const int n_threads = std::max(1, std::min<int>(args.jobs, static_cast<int>(scenes.size())));
        std::vector<std::thread> threads;
        for (int t = 1; t < n_threads; ++t) threads.emplace_back(work);
        work();
        for (auto& t : threads) t.join();
        if (!first_error.empty()) throw std::runtime_error(first_error);

        std::string csv = "scene_id,alpha,seed,T,backend,fg_fidelity,seam_score,wall_ms,output_path\n";
        std::size_t count = 0;
        for (const auto& per_scene : rows)
            for (const auto& line : per_scene) {
                csv += line + "\n";
                ++count;
            }
        const auto path = common.out / "bench.csv";
        write_file_atomic(path, csv);
        std::cout << path.string() << " (" << count << " runs)\n";
        return static_cast<int>(kOk);
    });
}

int serve(const Common& common, const std::string& host, int port, const std::optional<std::filesystem::path>& root) {
    return guarded([&] {
        const PipelineConfig cfg = common.resolve();
        ServiceOptions opts;
        opts.root            = root ? *root : cfg.artifact_root;
        opts.pool_size       = cfg.pool_size;
        opts.backend_factory = make_backend_factory(cfg);
        opts.adapters        = make_adapters(cfg);
        opts.train_defaults  = default_train_config(cfg.backend);
        PipelineService service(std::move(opts));
        std::cout << "serving on http://" << host << ":" << port << std::endl;
        service.listen(host, port);
        return static_cast<int>(kOk);
    });
}

}  // namespace sketchscene::cli
