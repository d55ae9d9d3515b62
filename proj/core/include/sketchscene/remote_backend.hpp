#pragma once

#include <map>
#include <string>

#include "sketchscene/adapters.hpp"
#include "sketchscene/backend.hpp"

namespace sketchscene {

// Backend served by an out-of-process model over the adapter wire contract.
// Latents and embeddings travel as tensor files in the exchange directory:
//   encode_image    payload [image.png]                 -> [latent.sst]
//   decode_latent   payload [latent.sst]                -> [image.png]
//   token_embedding prompt_text = token                 -> [vector.sst]
//   predict_noise   payload [z_t.sst, cond.sst], "t"    -> [eps.sst]
// Identity gradients are not offered; training needs the in-process backend.
class RemoteBackend final : public Backend {
public:
    RemoteBackend(HttpEndpoint endpoint, BackendProfile profile);

    const BackendProfile& profile() const override { return profile_; }

    LatentTensor encode_image(const RgbImage& image) override;
    RgbImage decode_latent(const LatentTensor& z) override;
    PromptEncoding encode_prompt(std::string_view text, const EmbeddingBindings& bindings) override;
    LatentTensor predict_noise(const LatentTensor& z_t, int t, const PromptEncoding& cond) override;
    Embedding token_embedding(std::string_view token) override;
    void set_guidance_scale(double scale) override { guidance_scale_ = scale; }

private:
    std::filesystem::path stage(const std::string& name, std::span<const std::uint8_t> bytes);

    HttpEndpoint endpoint_;
    BackendProfile profile_;
    double guidance_scale_ = 7.5;
    std::map<std::string, Embedding, std::less<>> vocabulary_;
    std::uint64_t calls_ = 0;
};

}  // namespace sketchscene
