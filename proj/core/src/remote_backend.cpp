#include "sketchscene/remote_backend.hpp"

#include <unistd.h>

#include "sketchscene/errors.hpp"
#include "sketchscene/hash.hpp"
#include "sketchscene/tensor_io.hpp"
#include "wire.hpp"

using json = nlohmann::json;

namespace sketchscene {

RemoteBackend::RemoteBackend(HttpEndpoint endpoint, BackendProfile profile)
    : endpoint_(std::move(endpoint)), profile_(std::move(profile)) {
    if (profile_.latent_channels < 1 || profile_.downsample_factor < 1 || profile_.embedding_dim < 1)
        throw ConfigError("remote backend profile needs latent_channels, downsample_factor and embedding_dim");
    profile_.supports_identity_embeddings = false;
}

std::filesystem::path RemoteBackend::stage(const std::string& name, std::span<const std::uint8_t> bytes) {
    std::filesystem::create_directories(endpoint_.exchange_dir);
    const auto path = std::filesystem::absolute(endpoint_.exchange_dir /
                                                (std::to_string(::getpid()) + "-" + std::to_string(++calls_) + "-" + name));
    write_file_atomic(path, bytes);
    return path;
}

LatentTensor RemoteBackend::encode_image(const RgbImage& image) {
    const auto in  = stage("image.png", encode_png(image));
    const auto out = wire::invoke(endpoint_, {{"op", "encode_image"}, {"payload", {in.string()}}});
    LatentTensor z = to_latent(decode_tensor(out));
    const int f    = profile_.downsample_factor;
    if (z.channels != profile_.latent_channels || z.height != image.height / f || z.width != image.width / f)
        throw ContractViolation("encode_image returned a latent of the wrong shape");
    return z;
}

RgbImage RemoteBackend::decode_latent(const LatentTensor& z) {
    const auto in    = stage("latent.sst", encode_tensor(to_tensor_file(z)));
    const auto out   = wire::invoke(endpoint_, {{"op", "decode_latent"}, {"payload", {in.string()}}});
    RgbImage image   = decode_png_rgb(out);
    const int f      = profile_.downsample_factor;
    if (image.width != z.width * f || image.height != z.height * f)
        throw ContractViolation("decode_latent returned an image of the wrong size");
    return image;
}

Embedding RemoteBackend::token_embedding(std::string_view token) {
    if (auto it = vocabulary_.find(token); it != vocabulary_.end()) return it->second;
    const auto out = wire::invoke(endpoint_, {{"op", "token_embedding"}, {"prompt_text", std::string(token)}, {"payload", json::array()}});
    const TensorFile t = decode_tensor(out);
    if (t.data.size() != static_cast<std::size_t>(profile_.embedding_dim))
        throw ContractViolation("token_embedding returned " + std::to_string(t.data.size()) + " values");
    return vocabulary_.emplace(std::string(token), t.data).first->second;
}

PromptEncoding RemoteBackend::encode_prompt(std::string_view text, const EmbeddingBindings& bindings) {
    return encode_tokens(text, bindings, profile_, [this](std::string_view tok) { return token_embedding(tok); });
}

LatentTensor RemoteBackend::predict_noise(const LatentTensor& z_t, int t, const PromptEncoding& cond) {
    TensorFile rows;
    rows.shape = {cond.embedding_matrix.size(), static_cast<std::uint64_t>(profile_.embedding_dim)};
    for (const auto& r : cond.embedding_matrix) rows.data.insert(rows.data.end(), r.begin(), r.end());
    const auto z_path    = stage("z.sst", encode_tensor(to_tensor_file(z_t)));
    const auto cond_path = stage("cond.sst", encode_tensor(rows));
    const json body      = {
        {"op", "predict_noise"},
        {"payload", {z_path.string(), cond_path.string()}},
        {"prompt_text", cond.prompt_text},
        {"t", t},
        {"guidance_scale", guidance_scale_},
    };
    LatentTensor eps = to_latent(decode_tensor(wire::invoke(endpoint_, body)));
    if (!eps.same_shape(z_t)) throw ContractViolation("predict_noise returned a tensor of the wrong shape");
    return eps;
}

}  // namespace sketchscene
