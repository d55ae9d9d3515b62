#pragma once

#include <map>
#include <memory>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sketchscene/diffusion.hpp"
#include "sketchscene/raster.hpp"

namespace sketchscene {

struct BackendProfile {
    std::string name;
    int latent_channels  = 0;
    int downsample_factor = 0;
    bool supports_identity_embeddings = false;
    int max_prompt_tokens = 77;
    int embedding_dim     = 0;

    friend bool operator==(const BackendProfile&, const BackendProfile&) = default;
};

using Embedding = std::vector<double>;

// Trained vectors keyed by identity token ("<obj-chair>").
struct EmbeddingBindings {
    std::map<std::string, Embedding, std::less<>> vectors;
    // Unbound identity tokens fall back to their untrained token embedding
    // instead of raising BindingError.
    bool allow_untrained = false;
};

struct PromptEncoding {
    std::string prompt_text;
    std::vector<std::string> tokens;
    std::vector<std::uint32_t> token_ids;
    std::vector<Embedding> embedding_matrix;  // one row per token
    std::vector<int> identity_slots;          // token positions holding identity tokens
};

// Whitespace tokenizer; identity tokens are "<...>" words.
std::vector<std::string> tokenize(std::string_view text);
bool is_identity_token(std::string_view token);
std::uint32_t token_id(std::string_view token);

// Tokenizes and assembles the embedding matrix: vocabulary rows come from
// `lookup`, identity rows from `bindings`.
PromptEncoding encode_tokens(std::string_view text, const EmbeddingBindings& bindings, const BackendProfile& profile,
                             const std::function<Embedding(std::string_view)>& lookup);

// Denoiser stack: codec, text conditioning and noise prediction.
// Instances are stateful and must be confined to one thread at a time.
class Backend {
public:
    virtual ~Backend() = default;

    virtual const BackendProfile& profile() const = 0;

    virtual LatentTensor encode_image(const RgbImage& image) = 0;
    virtual RgbImage decode_latent(const LatentTensor& z) = 0;

    virtual PromptEncoding encode_prompt(std::string_view text, const EmbeddingBindings& bindings) = 0;
    virtual LatentTensor predict_noise(const LatentTensor& z_t, int t, const PromptEncoding& cond) = 0;

    // Embedding of a plain vocabulary word (identity initialisation).
    virtual Embedding token_embedding(std::string_view token) = 0;

    // Vector-Jacobian product of predict_noise with respect to each identity
    // slot row: returns d<upstream, eps_hat>/d row, one entry per slot in
    // cond.identity_slots. Backends without the capability throw CapabilityError.
    virtual std::vector<Embedding> identity_gradient(const LatentTensor& z_t, int t, const PromptEncoding& cond,
                                                     const LatentTensor& upstream);

    virtual void set_guidance_scale(double) {}
};

struct ToyOptions {
    int channels       = 2;
    int factor         = 2;
    int embedding_dim  = 16;
    double row_scale   = 0.25;  // std of vocabulary embedding entries
    double gain        = 8.0;   // scale of the conditioning projection
    std::uint64_t seed = 0;     // model parameters
};

// Analytic affine denoiser: eps_hat = A z + b_cond.
//   A      fixed per-channel diagonal (a_c = 1 - 0.05 (c mod 4)).
//   b_cond gain * W e, where e is the mean of the prompt's embedding rows and
//          W is a hash-seeded projection whose first `channels` columns are
//          per-channel constants, so identity rows steer the prediction.
// Codec: block-average encode, nearest-upsample decode, pixel v -> v/127.5 - 1.
class ToyBackend final : public Backend {
public:
    explicit ToyBackend(ToyOptions options = {});

    const BackendProfile& profile() const override { return profile_; }
    const ToyOptions& options() const { return options_; }

    LatentTensor encode_image(const RgbImage& image) override;
    RgbImage decode_latent(const LatentTensor& z) override;
    PromptEncoding encode_prompt(std::string_view text, const EmbeddingBindings& bindings) override;
    LatentTensor predict_noise(const LatentTensor& z_t, int t, const PromptEncoding& cond) override;
    Embedding token_embedding(std::string_view token) override;
    std::vector<Embedding> identity_gradient(const LatentTensor& z_t, int t, const PromptEncoding& cond,
                                             const LatentTensor& upstream) override;

    double diagonal(int channel) const { return 1.0 - 0.05 * (channel % 4); }
    // b_cond for a conditioning at the given latent geometry.
    LatentTensor offset(const PromptEncoding& cond, int height, int width);
    // Projection entry W(k, d) for latent element (c, y, x).
    double projection(int c, int y, int x, int d) const;

private:
    Embedding pooled(const PromptEncoding& cond) const;
    const std::vector<double>& projection_table(int height, int width);

    ToyOptions options_;
    BackendProfile profile_;
    std::map<std::pair<int, int>, std::vector<double>> projections_;
};

// Creates independent backend instances for worker pools.
using BackendFactory = std::function<std::unique_ptr<Backend>()>;

}  // namespace sketchscene
