#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sketchscene/backend.hpp"
#include "sketchscene/diffusion.hpp"
#include "sketchscene/scene_model.hpp"

namespace sketchscene {

struct IdentityEmbedding {
    std::string token;
    Embedding vector;
    std::string init_source;  // class word the vector started from
    int train_steps = 0;
    std::vector<double> loss_trace;  // one entry per applied step
    double learning_rate = 0.0;

    friend bool operator==(const IdentityEmbedding&, const IdentityEmbedding&) = default;
};

struct TrainConfig {
    int steps            = 50;  // per identity
    double learning_rate = 1e-2;
    int schedule_steps   = 50;  // timesteps are drawn uniformly from [1, schedule_steps]
    ScheduleKind schedule = ScheduleKind::ScaledLinear;
    std::uint64_t seed   = 0;
};

// Toy backend: TrainConfig{}. Any other backend: 400 steps at 5e-3.
TrainConfig default_train_config(std::string_view backend);

IdentityEmbedding init_identity(const std::string& token, const std::string& class_label, Backend& backend);

// Mean over all C*h*w elements of ((eps - eps_hat) * m)^2.
double masked_diffusion_loss(const LatentTensor& eps, const LatentTensor& eps_hat, const LatentMask& m);

// d loss / d eps_hat for masked_diffusion_loss.
LatentTensor masked_loss_gradient(const LatentTensor& eps, const LatentTensor& eps_hat, const LatentMask& m);

// Training prompt for one identity.
std::string training_prompt(const std::string& token);

struct IdentityStep {
    double loss = 0.0;
    Embedding gradient;  // d loss / d vector, summed over every slot the token occupies
};

// Loss and embedding gradient for one (latent, timestep, noise) sample.
IdentityStep identity_step(const LatentTensor& z0, const LatentMask& mask, int t, const LatentTensor& eps,
                           const IdentityEmbedding& embedding, const NoiseSchedule& sched, Backend& backend);

// Round-robin over assets for cfg.steps steps per asset; each step updates
// only that asset's vector by plain gradient descent. Embeddings start from init_identity with the
// annotation's class label (parallel to `assets`).
std::vector<IdentityEmbedding> train_identities(std::span<const ObjectAsset> assets,
                                                std::span<const std::string> class_labels, const TrainConfig& cfg,
                                                Backend& backend);

// Same loop starting from caller-supplied embeddings.
std::vector<IdentityEmbedding> train_identities_from(std::span<const ObjectAsset> assets,
                                                     std::vector<IdentityEmbedding> embeddings,
                                                     const TrainConfig& cfg, Backend& backend);

// <stem>.sst (vector) and <stem>.json {token, dim, steps, lr, init_source, final_loss, loss_trace}.
void save_embedding(const IdentityEmbedding& e, const std::filesystem::path& stem);
IdentityEmbedding load_embedding(const std::filesystem::path& stem);

EmbeddingBindings to_bindings(std::span<const IdentityEmbedding> embeddings);

}  // namespace sketchscene
