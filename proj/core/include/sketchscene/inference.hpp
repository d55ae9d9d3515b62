#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sketchscene/backend.hpp"
#include "sketchscene/compose.hpp"
#include "sketchscene/diffusion.hpp"
#include "sketchscene/identity.hpp"
#include "sketchscene/scene_model.hpp"

namespace sketchscene {

struct PromptPair {
    std::string global_prompt;      // identity tokens (or class labels) + background
    std::string background_prompt;  // background only

    friend bool operator==(const PromptPair&, const PromptPair&) = default;
};

// Drops a leading preposition: "in a room" -> "a room", "on the road" -> "the road".
std::string background_noun_phrase(const std::string& background_text);

// P_g = "a photo of a {o1} and {o2} ... {background_text}",
// P_b = "a photo of {background noun phrase}".
// Objects with an embedding (matched by identity token) use the token; the
// rest use their class label when allow_class_labels is set, otherwise
// BindingError.
PromptPair build_prompts(const SceneSpec& spec, std::span<const IdentityEmbedding> embeddings,
                         bool allow_class_labels);

// Noise sources for one render. z_T comes from stream 0 of the seed; the
// foreground re-noising eps_t for level t comes from its own per-level
// stream, so alpha changes never perturb z_T.
LatentTensor initial_noise(std::uint64_t seed, int channels, int height, int width);
LatentTensor foreground_noise(std::uint64_t seed, int t, int channels, int height, int width);

enum class Phase { Blended, Customized };

// Observer hook; sees every iteration's intermediates (level t -> t-1).
struct StepTrace {
    int t = 0;
    Phase phase = Phase::Customized;
    const LatentTensor* z_t        = nullptr;
    const LatentTensor* background = nullptr;  // P_b sampler step (blended only)
    const LatentTensor* foreground = nullptr;  // noised z_init at t-1 (blended only)
    const LatentTensor* z_prev     = nullptr;  // resulting level t-1 latent
};
using StepObserver = std::function<void(const StepTrace&)>;

struct InferenceResult {
    LatentTensor z0;
    RgbImage image;
    std::vector<double> step_ms;  // wall time per iteration, T entries
    int blended_steps = 0;
};

bool is_blended_step(int t, double alpha, int steps);

// Two-phase scene inference. For t = T..1: if t > alpha*T the P_b sampler
// step is blended with forward_noise(z_init, t-1, eps_t) under m_init,
// otherwise the latent is denoised freely under P_g. Returns decode(z_0).
InferenceResult run_scene_inference(const CompositeGuide& guide, const RenderConfig& cfg, const PromptPair& prompts,
                                    const EmbeddingBindings& bindings, Backend& backend, const NoiseSchedule& sched,
                                    const StepObserver& observer = {});

// Plain P_g-only sampling from the same z_T.
InferenceResult sample_prompt_only(const RenderConfig& cfg, const std::string& prompt,
                                   const EmbeddingBindings& bindings, Backend& backend, const NoiseSchedule& sched);

struct RenderDiagnostics {
    double fg_fidelity = 0.0;  // mean |output - x_init| inside M_init, 0..255 units
    double seam_score  = 0.0;  // mean luminance gradient magnitude on the mask boundary

    friend bool operator==(const RenderDiagnostics&, const RenderDiagnostics&) = default;
};

RenderDiagnostics compute_diagnostics(const RgbImage& output, const CompositeGuide& guide);

struct SweepEntry {
    double alpha = 0.0;
    std::optional<InferenceResult> result;
    RenderDiagnostics diagnostics;
    std::string error;  // set when this render failed
};

// One render per alpha with the shared seed; failures are recorded per entry.
std::vector<SweepEntry> render_alpha_sweep(const CompositeGuide& guide, const RenderConfig& base_cfg,
                                           std::span<const double> alphas, const PromptPair& prompts,
                                           const EmbeddingBindings& bindings, Backend& backend);

}  // namespace sketchscene
