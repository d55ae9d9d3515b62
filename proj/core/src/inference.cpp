#include "sketchscene/inference.hpp"

#include <array>
#include <chrono>
#include <cmath>

#include "sketchscene/errors.hpp"
#include "sketchscene/rng.hpp"

namespace sketchscene {

std::string background_noun_phrase(const std::string& background_text) {
    static constexpr std::array<std::string_view, 16> prepositions = {
        "in",     "on",     "at",    "under", "by",    "near",  "inside", "beside",
        "over",   "behind", "above", "below", "along", "among", "across", "within"};
    auto words = tokenize(background_text);
    if (words.size() > 1) {
        for (auto p : prepositions) {
            if (words.front() == p) {
                words.erase(words.begin());
                break;
            }
        }
    }
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

PromptPair build_prompts(const SceneSpec& spec, std::span<const IdentityEmbedding> embeddings,
                         bool allow_class_labels) {
    std::vector<std::string> names;
    for (const auto& o : spec.objects) {
        const std::string token = identity_token_for(o.object_id);
        bool trained            = false;
        for (const auto& e : embeddings) trained = trained || e.token == token;
        if (trained) {
            names.push_back(token);
        } else if (allow_class_labels) {
            names.push_back(o.class_label);
        } else {
            throw BindingError("object '" + o.object_id + "' has no trained identity embedding");
        }
    }
    PromptPair p;
    p.global_prompt = "a photo of a";
    for (std::size_t i = 0; i < names.size(); ++i) p.global_prompt += (i ? " and " : " ") + names[i];
    const auto bg = tokenize(spec.background_text);
    if (!bg.empty()) {
        for (const auto& w : bg) p.global_prompt += " " + w;
    }
    const std::string noun = background_noun_phrase(spec.background_text);
    p.background_prompt    = noun.empty() ? "a photo" : "a photo of " + noun;
    return p;
}

LatentTensor initial_noise(std::uint64_t seed, int channels, int height, int width) {
    Rng rng(seed, 0);
    return gaussian_latent(channels, height, width, rng);
}

LatentTensor foreground_noise(std::uint64_t seed, int t, int channels, int height, int width) {
    Rng rng(seed, 0x10000ull + static_cast<std::uint64_t>(t));
    return gaussian_latent(channels, height, width, rng);
}

bool is_blended_step(int t, double alpha, int steps) {
    return static_cast<double>(t) > alpha * static_cast<double>(steps);
}

namespace {

void check_finite(const LatentTensor& z, int t) {
    if (!z.all_finite()) throw NumericError("non-finite latent at level " + std::to_string(t), t);
}

}  // namespace

InferenceResult run_scene_inference(const CompositeGuide& guide, const RenderConfig& cfg, const PromptPair& prompts,
                                    const EmbeddingBindings& bindings, Backend& backend, const NoiseSchedule& sched,
                                    const StepObserver& observer) {
    const auto& prof = backend.profile();
    if (auto report = validate_render_config(cfg, prof.downsample_factor); !report.empty())
        throw ConfigError(describe(report.front()));
    if (sched.steps != cfg.steps) throw ShapeError("schedule has " + std::to_string(sched.steps) + " steps, config " +
                                                   std::to_string(cfg.steps));
    if (guide.x_init.width != cfg.width || guide.x_init.height != cfg.height)
        throw ShapeError("guide is " + std::to_string(guide.x_init.width) + "x" + std::to_string(guide.x_init.height) +
                         ", render resolution " + std::to_string(cfg.width) + "x" + std::to_string(cfg.height));
    const int h = cfg.height / prof.downsample_factor, w = cfg.width / prof.downsample_factor;
    if (guide.latent_mask.height != h || guide.latent_mask.width != w)
        throw ShapeError("guide latent mask does not match the backend latent geometry");
    backend.set_guidance_scale(cfg.guidance_scale);

    const LatentTensor z_init = backend.encode_image(guide.x_init);
    const PromptEncoding cond_bg = backend.encode_prompt(prompts.background_prompt, bindings);
    const PromptEncoding cond_g  = backend.encode_prompt(prompts.global_prompt, bindings);

    InferenceResult result;
    LatentTensor z = initial_noise(cfg.seed, prof.latent_channels, h, w);
    for (int t = cfg.steps; t >= 1; --t) {
        const auto start = std::chrono::steady_clock::now();
        StepTrace trace;
        trace.t   = t;
        trace.z_t = &z;
        LatentTensor next;
        if (is_blended_step(t, cfg.alpha, cfg.steps)) {
            const LatentTensor bg = sampler_step(z, backend.predict_noise(z, t, cond_bg), t, sched);
            const LatentTensor fg =
                forward_noise(z_init, t - 1, foreground_noise(cfg.seed, t, z.channels, h, w), sched);
            next             = blend_latents(bg, fg, guide.latent_mask);
            trace.phase      = Phase::Blended;
            trace.background = &bg;
            trace.foreground = &fg;
            ++result.blended_steps;
            check_finite(next, t - 1);
            trace.z_prev = &next;
            if (observer) observer(trace);
        } else {
            next        = sampler_step(z, backend.predict_noise(z, t, cond_g), t, sched);
            trace.phase = Phase::Customized;
            check_finite(next, t - 1);
            trace.z_prev = &next;
            if (observer) observer(trace);
        }
        z = std::move(next);
        result.step_ms.push_back(
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    result.image = backend.decode_latent(z);
    result.z0    = std::move(z);
    return result;
}

InferenceResult sample_prompt_only(const RenderConfig& cfg, const std::string& prompt,
                                   const EmbeddingBindings& bindings, Backend& backend, const NoiseSchedule& sched) {
    const auto& prof = backend.profile();
    const int h = cfg.height / prof.downsample_factor, w = cfg.width / prof.downsample_factor;
    backend.set_guidance_scale(cfg.guidance_scale);
    const PromptEncoding cond = backend.encode_prompt(prompt, bindings);
    InferenceResult result;
    LatentTensor z = initial_noise(cfg.seed, prof.latent_channels, h, w);
    for (int t = cfg.steps; t >= 1; --t) {
        z = sampler_step(z, backend.predict_noise(z, t, cond), t, sched);
        check_finite(z, t - 1);
    }
    result.image = backend.decode_latent(z);
    result.z0    = std::move(z);
    return result;
}

RenderDiagnostics compute_diagnostics(const RgbImage& output, const CompositeGuide& guide) {
    RenderDiagnostics d;
    const Mask& m = guide.full_mask;
    if (output.width != m.width || output.height != m.height) throw ShapeError("diagnostics: output/guide size mismatch");

    double dev          = 0.0;
    std::size_t inside  = 0;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            ++inside;
            for (int c = 0; c < 3; ++c) dev += std::abs(static_cast<int>(output.at(x, y, c)) - guide.x_init.at(x, y, c));
        }
    d.fg_fidelity = inside ? dev / (3.0 * inside) : 0.0;

    const GrayImage luma = to_gray(output);
    auto lum             = [&](int x, int y) {
        x = std::clamp(x, 0, luma.width - 1);
        y = std::clamp(y, 0, luma.height - 1);
        return static_cast<double>(luma.at(x, y));
    };
    double grad         = 0.0;
    std::size_t border  = 0;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            const bool edge = (x > 0 && !m.at(x - 1, y)) || (x + 1 < m.width && !m.at(x + 1, y)) ||
                              (y > 0 && !m.at(x, y - 1)) || (y + 1 < m.height && !m.at(x, y + 1));
            if (!edge) continue;
            ++border;
            const double gx = 0.5 * (lum(x + 1, y) - lum(x - 1, y));
            const double gy = 0.5 * (lum(x, y + 1) - lum(x, y - 1));
            grad += std::sqrt(gx * gx + gy * gy);
        }
    d.seam_score = border ? grad / border : 0.0;
    return d;
}

std::vector<SweepEntry> render_alpha_sweep(const CompositeGuide& guide, const RenderConfig& base_cfg,
                                           std::span<const double> alphas, const PromptPair& prompts,
                                           const EmbeddingBindings& bindings, Backend& backend) {
    std::vector<SweepEntry> out;
    if (alphas.empty()) return out;
    const NoiseSchedule sched = make_schedule(base_cfg.steps);
    for (double alpha : alphas) {
        SweepEntry entry;
        entry.alpha = alpha;
        try {
            RenderConfig cfg = base_cfg;
            cfg.alpha        = alpha;
            entry.result     = run_scene_inference(guide, cfg, prompts, bindings, backend, sched);
            entry.diagnostics = compute_diagnostics(entry.result->image, guide);
        } catch (const Error& e) {
            entry.error = e.what();
        }
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace sketchscene
