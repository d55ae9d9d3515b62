#include "sketchscene/pipeline.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "sketchscene/errors.hpp"
#include "sketchscene/hash.hpp"
#include "sketchscene/object_gen.hpp"

using json = nlohmann::json;

namespace sketchscene {

int AdapterSet::resolution_for(const SceneSpec& spec) const {
    return resolution > 0 ? resolution : std::max(spec.canvas.width, spec.canvas.height);
}

std::string AdapterSet::config_hash() const {
    const json doc = {
        {"generator", generator ? generator->config_id() : "none"},
        {"segmenter", segmenter ? segmenter->config_id() : "none"},
        {"resolution", resolution},
        {"retries", retries},
    };
    return sha256_hex(doc.dump()).substr(0, 16);
}

AdapterSet stub_adapters() {
    AdapterSet set;
    set.generator = std::make_shared<EchoGenerator>();
    set.segmenter = std::make_shared<InkSegmenter>();
    return set;
}

std::vector<ObjectAsset> generate_objects(const SceneSpec& spec, const AdapterSet& adapters, std::uint64_t scene_seed,
                                          const std::optional<std::string>& only) {
    if (!adapters.generator || !adapters.segmenter) throw ConnectivityError("object adapters are not configured");
    if (only && !spec.find(*only)) throw NotFoundError("object '" + *only + "' not in scene " + spec.scene_id);
    std::vector<ObjectAsset> out;
    const int res = adapters.resolution_for(spec);
    for (const auto& o : spec.objects) {
        if (only && o.object_id != *only) continue;
        const auto req = make_object_request(spec, o.object_id, scene_seed, res, adapters.retries);
        out.push_back(generate_object(req, *adapters.generator, *adapters.segmenter));
    }
    return out;
}

namespace {

json geometry_json(const CropGeometry& g) {
    return {
        {"box", {{"l", g.box.left}, {"t", g.box.top}, {"w", g.box.width}, {"h", g.box.height}}},
        {"offset_x", g.offset_x},
        {"offset_y", g.offset_y},
        {"scaled_width", g.scaled_width},
        {"scaled_height", g.scaled_height},
        {"resolution", g.resolution},
    };
}

CropGeometry geometry_from(const json& j) {
    CropGeometry g;
    const auto& b   = j.at("box");
    g.box           = Rect{b.at("l").get<int>(), b.at("t").get<int>(), b.at("w").get<int>(), b.at("h").get<int>()};
    g.offset_x      = j.at("offset_x").get<int>();
    g.offset_y      = j.at("offset_y").get<int>();
    g.scaled_width  = j.at("scaled_width").get<int>();
    g.scaled_height = j.at("scaled_height").get<int>();
    g.resolution    = j.at("resolution").get<int>();
    return g;
}

json parse_document(std::span<const std::uint8_t> bytes) {
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
}

}  // namespace

std::string asset_metadata(const ObjectAsset& asset, const std::string& generator_config_hash) {
    const std::size_t pixels = asset.mask.count();
    const double total       = static_cast<double>(asset.mask.width) * asset.mask.height;
    json doc = {
        {"object_id", asset.object_id},
        {"seed", asset.seed},
        {"attempts", asset.attempts},
        {"identity_token", asset.identity_token},
        {"generator_config_hash", generator_config_hash},
        {"mask_stats", {{"pixels", pixels}, {"coverage", total > 0 ? pixels / total : 0.0}}},
    };
    if (asset.embedding_id) doc["embedding_id"] = *asset.embedding_id;
    if (asset.geometry) doc["geometry"] = geometry_json(*asset.geometry);
    return doc.dump(2) + "\n";
}

void save_asset(const ObjectAsset& asset, const std::filesystem::path& dir, const std::string& generator_config_hash) {
    write_file_atomic(dir / "image.png", encode_png(asset.image));
    write_file_atomic(dir / "mask.png", encode_png(asset.mask));
    write_file_atomic(dir / "asset.json", asset_metadata(asset, generator_config_hash));
}

ObjectAsset load_asset(const std::filesystem::path& dir) {
    const json meta = parse_document(read_file(dir / "asset.json"));
    ObjectAsset a;
    try {
        a.object_id      = meta.at("object_id").get<std::string>();
        a.seed           = meta.value("seed", std::uint64_t{0});
        a.attempts       = meta.value("attempts", 1);
        a.identity_token = meta.value("identity_token", identity_token_for(a.object_id));
        if (meta.contains("embedding_id")) a.embedding_id = meta["embedding_id"].get<std::string>();
        if (meta.contains("geometry")) a.geometry = geometry_from(meta["geometry"]);
    } catch (const json::exception& e) {
        throw ParseError(std::string("asset metadata: ") + e.what(), 0);
    }
    a.image = decode_png_rgb(read_file(dir / "image.png"));
    a.mask  = decode_png_mask(read_file(dir / "mask.png"));
    return a;
}

std::vector<ObjectAsset> SceneWorkspace::load_assets(const SceneSpec& spec) const {
    std::vector<ObjectAsset> out;
    for (const auto& o : spec.objects) {
        const auto dir = asset_dir(o.object_id);
        if (std::filesystem::exists(dir / "asset.json")) out.push_back(load_asset(dir));
    }
    return out;
}

std::vector<IdentityEmbedding> SceneWorkspace::load_identities(const SceneSpec& spec) const {
    std::vector<IdentityEmbedding> out;
    for (const auto& o : spec.objects) {
        auto meta = identity_stem(o.object_id);
        meta += ".json";
        if (std::filesystem::exists(meta)) out.push_back(load_embedding(identity_stem(o.object_id)));
    }
    return out;
}

std::vector<ObjectAsset> complete_assets(const SceneSpec& spec, std::vector<ObjectAsset> assets,
                                         const AdapterSet& adapters, std::uint64_t scene_seed) {
    std::vector<ObjectAsset> out;
    for (const auto& o : spec.objects) {
        auto it = std::find_if(assets.begin(), assets.end(), [&](const ObjectAsset& a) { return a.object_id == o.object_id; });
        if (it != assets.end()) {
            out.push_back(std::move(*it));
        } else {
            auto generated = generate_objects(spec, adapters, scene_seed, o.object_id);
            out.push_back(std::move(generated.front()));
        }
    }
    return out;
}

std::string render_name(const RenderConfig& cfg) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "a%.3f_s%llu_T%d", cfg.alpha, static_cast<unsigned long long>(cfg.seed), cfg.steps);
    return buf;
}

RenderArtifacts render_scene(const SceneSpec& spec, std::span<const ObjectAsset> assets,
                             std::span<const IdentityEmbedding> embeddings, const RenderConfig& cfg, Backend& backend,
                             const ProgressFn& progress) {
    if (auto report = validate_scene(spec); !report.empty()) throw ConfigError("invalid scene: " + describe(report.front()));
    if (cfg.width != spec.canvas.width || cfg.height != spec.canvas.height)
        throw ShapeError("render resolution " + std::to_string(cfg.width) + "x" + std::to_string(cfg.height) +
                         " differs from canvas " + std::to_string(spec.canvas.width) + "x" +
                         std::to_string(spec.canvas.height));

    RenderArtifacts out;
    const int f = backend.profile().downsample_factor;
    out.guide   = compose_guide(spec, assets, f);

    out.prompts = build_prompts(spec, embeddings, true);
    if (!cfg.global_prompt.empty()) out.prompts.global_prompt = cfg.global_prompt;
    if (!cfg.background_prompt.empty()) out.prompts.background_prompt = cfg.background_prompt;
    EmbeddingBindings bindings = to_bindings(embeddings);

    const NoiseSchedule sched = make_schedule(cfg.steps);
    int done                  = 0;
    StepObserver observer;
    if (progress) {
        observer = [&](const StepTrace& tr) {
            progress(++done, cfg.steps, tr.phase == Phase::Blended ? "blended" : "customized");
        };
    }
    out.inference   = run_scene_inference(out.guide, cfg, out.prompts, bindings, backend, sched, observer);
    out.diagnostics = compute_diagnostics(out.inference.image, out.guide);
    out.image_png   = encode_png(out.inference.image);

    const auto& prof = backend.profile();
    const json manifest = {
        {"scene_id", spec.scene_id},
        {"config",
         {{"T", cfg.steps},
          {"alpha", cfg.alpha},
          {"seed", cfg.seed},
          {"resolution", {cfg.width, cfg.height}},
          {"guidance_scale", cfg.guidance_scale},
          {"global_prompt", out.prompts.global_prompt},
          {"background_prompt", out.prompts.background_prompt},
          {"schedule", std::string(to_string(sched.kind))}}},
        {"guide_hash", guide_hash(out.guide)},
        {"backend",
         {{"name", prof.name}, {"latent_channels", prof.latent_channels}, {"downsample_factor", prof.downsample_factor}}},
        {"blended_steps", out.inference.blended_steps},
        {"diagnostics", {{"fg_fidelity", out.diagnostics.fg_fidelity}, {"seam_score", out.diagnostics.seam_score}}},
        {"output", {{"path", "render.png"}, {"sha256", sha256_hex(std::span<const std::uint8_t>(out.image_png))}}},
        {"timing_path", "timing.json"},
    };
    out.manifest = manifest.dump(2) + "\n";

    double total = 0.0;
    for (double ms : out.inference.step_ms) total += ms;
    const json timing = {{"per_step_ms", out.inference.step_ms}, {"total_ms", total}};
    out.timing        = timing.dump(2) + "\n";
    return out;
}

void write_render(const RenderArtifacts& artifacts, const std::filesystem::path& dir) {
    write_file_atomic(dir / "render.png", artifacts.image_png);
    write_file_atomic(dir / "manifest.json", artifacts.manifest);
    write_file_atomic(dir / "timing.json", artifacts.timing);
}

RgbImage make_grid(std::span<const RgbImage> images) {
    constexpr int gutter = 4;
    int width = 0, height = 0;
    for (const auto& im : images) {
        width += im.width;
        height = std::max(height, im.height);
    }
    if (images.empty()) return {};
    width += gutter * static_cast<int>(images.size() - 1);
    RgbImage grid(width, height, 255);
    int x0 = 0;
    for (const auto& im : images) {
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x)
                for (int c = 0; c < 3; ++c) grid.at(x0 + x, y, c) = im.at(x, y, c);
        x0 += im.width + gutter;
    }
    return grid;
}

}  // namespace sketchscene
