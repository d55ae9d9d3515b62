#include "sketchscene/identity.hpp"

#include <cmath>

#include <json.hpp>

#include "sketchscene/errors.hpp"
#include "sketchscene/rng.hpp"
#include "sketchscene/tensor_io.hpp"

using json = nlohmann::json;

namespace sketchscene {

IdentityEmbedding init_identity(const std::string& token, const std::string& class_label, Backend& backend) {
    const auto words = tokenize(class_label);
    if (words.empty()) throw TokenizationError("class label '" + class_label + "' has no tokens");
    IdentityEmbedding e;
    e.token       = token;
    e.init_source = words.front();
    e.vector      = backend.token_embedding(words.front());
    return e;
}

namespace {

void check_loss_shapes(const LatentTensor& eps, const LatentTensor& eps_hat, const LatentMask& m) {
    if (!eps.same_shape(eps_hat)) throw ShapeError("masked loss: eps and eps_hat differ in shape");
    if (m.height != eps.height || m.width != eps.width) throw ShapeError("masked loss: mask not aligned");
    if (!m.is_binary()) throw MaskError("masked loss: mask is not binary");
}

}  // namespace

double masked_diffusion_loss(const LatentTensor& eps, const LatentTensor& eps_hat, const LatentMask& m) {
    check_loss_shapes(eps, eps_hat, m);
    const std::size_t plane = eps.plane();
    double sum = 0.0;
    for (int c = 0; c < eps.channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
            if (!m.bits[p]) continue;
            const double d = eps.data[c * plane + p] - eps_hat.data[c * plane + p];
            sum += d * d;
        }
    }
    return eps.size() ? sum / static_cast<double>(eps.size()) : 0.0;
}

LatentTensor masked_loss_gradient(const LatentTensor& eps, const LatentTensor& eps_hat, const LatentMask& m) {
    check_loss_shapes(eps, eps_hat, m);
    LatentTensor g(eps.channels, eps.height, eps.width);
    const std::size_t plane = eps.plane();
    const double scale      = 2.0 / static_cast<double>(eps.size());
    for (int c = 0; c < eps.channels; ++c)
        for (std::size_t p = 0; p < plane; ++p)
            if (m.bits[p]) g.data[c * plane + p] = scale * (eps_hat.data[c * plane + p] - eps.data[c * plane + p]);
    return g;
}

TrainConfig default_train_config(std::string_view backend) {
    TrainConfig cfg;
    if (backend != "toy") {
        cfg.steps         = 400;
        cfg.learning_rate = 5e-3;
    }
    return cfg;
}

std::string training_prompt(const std::string& token) {
    return "a photo of a " + token;
}

IdentityStep identity_step(const LatentTensor& z0, const LatentMask& mask, int t, const LatentTensor& eps,
                           const IdentityEmbedding& embedding, const NoiseSchedule& sched, Backend& backend) {
    EmbeddingBindings bindings;
    bindings.vectors.emplace(embedding.token, embedding.vector);
    const PromptEncoding cond = backend.encode_prompt(training_prompt(embedding.token), bindings);
    const LatentTensor z_t    = forward_noise(z0, t, eps, sched);
    const LatentTensor eps_hat = backend.predict_noise(z_t, t, cond);

    IdentityStep step;
    step.loss = masked_diffusion_loss(eps, eps_hat, mask);
    step.gradient.assign(embedding.vector.size(), 0.0);
    const LatentTensor upstream = masked_loss_gradient(eps, eps_hat, mask);
    const auto per_slot         = backend.identity_gradient(z_t, t, cond, upstream);
    for (std::size_t s = 0; s < per_slot.size(); ++s) {
        if (cond.tokens[cond.identity_slots[s]] != embedding.token) continue;
        for (std::size_t d = 0; d < step.gradient.size(); ++d) step.gradient[d] += per_slot[s][d];
    }
    return step;
}

std::vector<IdentityEmbedding> train_identities(std::span<const ObjectAsset> assets,
                                                std::span<const std::string> class_labels, const TrainConfig& cfg,
                                                Backend& backend) {
    if (class_labels.size() != assets.size()) throw ShapeError("train_identities: one class label per asset required");
    std::vector<IdentityEmbedding> init;
    for (std::size_t i = 0; i < assets.size(); ++i)
        init.push_back(init_identity(assets[i].identity_token, class_labels[i], backend));
    return train_identities_from(assets, std::move(init), cfg, backend);
}

std::vector<IdentityEmbedding> train_identities_from(std::span<const ObjectAsset> assets,
                                                     std::vector<IdentityEmbedding> embeddings,
                                                     const TrainConfig& cfg, Backend& backend) {
    if (cfg.steps < 0) throw ConfigError("training steps must be >= 0");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (embeddings.size() != assets.size()) throw ShapeError("train_identities: one embedding per asset required");
    for (auto& e : embeddings) e.learning_rate = cfg.learning_rate;
    if (cfg.steps == 0 || assets.empty()) return embeddings;
    if (!backend.profile().supports_identity_embeddings)
        throw CapabilityError("backend '" + backend.profile().name + "' cannot train identity embeddings");

    const NoiseSchedule sched = make_schedule(cfg.schedule_steps, cfg.schedule);
    const int f               = backend.profile().downsample_factor;
    std::vector<LatentTensor> latents;
    std::vector<LatentMask> masks;
    for (const auto& a : assets) {
        latents.push_back(backend.encode_image(a.image));
        masks.push_back(downsample_mask(a.mask, f));
    }

    const int total = cfg.steps * static_cast<int>(assets.size());
    for (int s = 0; s < total; ++s) {
        const std::size_t i = static_cast<std::size_t>(s) % assets.size();
        Rng rng(cfg.seed, static_cast<std::uint64_t>(s));
        const int t            = static_cast<int>(rng.uniform_int(1, sched.steps));
        const LatentTensor eps = gaussian_latent(latents[i].channels, latents[i].height, latents[i].width, rng);

        auto& emb             = embeddings[i];
        const IdentityStep st = identity_step(latents[i], masks[i], t, eps, emb, sched, backend);
        if (!std::isfinite(st.loss)) throw NumericError("identity training loss is not finite", t);
        for (std::size_t d = 0; d < emb.vector.size(); ++d) emb.vector[d] -= cfg.learning_rate * st.gradient[d];
        emb.loss_trace.push_back(st.loss);
        ++emb.train_steps;
    }
    return embeddings;
}

void save_embedding(const IdentityEmbedding& e, const std::filesystem::path& stem) {
    auto vec_path = stem;
    vec_path += ".sst";
    auto meta_path = stem;
    meta_path += ".json";
    write_file_atomic(vec_path, encode_tensor(TensorFile{{e.vector.size()}, e.vector}));
    const json meta = {
        {"token", e.token},
        {"dim", e.vector.size()},
        {"steps", e.train_steps},
        {"lr", e.learning_rate},
        {"init_source", e.init_source},
        {"final_loss", e.loss_trace.empty() ? json(nullptr) : json(e.loss_trace.back())},
        {"loss_trace", e.loss_trace},
    };
    write_file_atomic(meta_path, meta.dump(2) + "\n");
}

IdentityEmbedding load_embedding(const std::filesystem::path& stem) {
    auto vec_path = stem;
    vec_path += ".sst";
    auto meta_path = stem;
    meta_path += ".json";
    const auto tensor = decode_tensor(read_file(vec_path));
    const auto bytes  = read_file(meta_path);
    json meta;
    try {
        meta = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    IdentityEmbedding e;
    e.token         = meta.at("token").get<std::string>();
    e.init_source   = meta.value("init_source", std::string{});
    e.train_steps   = meta.value("steps", 0);
    e.learning_rate = meta.value("lr", 0.0);
    e.loss_trace    = meta.value("loss_trace", std::vector<double>{});
    e.vector        = tensor.data;
    if (meta.value("dim", std::size_t{0}) != e.vector.size()) throw ShapeError("embedding dim mismatch in " + stem.string());
    return e;
}

EmbeddingBindings to_bindings(std::span<const IdentityEmbedding> embeddings) {
    EmbeddingBindings b;
    for (const auto& e : embeddings) b.vectors[e.token] = e.vector;
    return b;
}

}  // namespace sketchscene
