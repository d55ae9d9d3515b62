#include "sketchscene/backend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sketchscene/errors.hpp"
#include "sketchscene/hash.hpp"

namespace sketchscene {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

bool is_identity_token(std::string_view token) {
    return token.size() > 2 && token.front() == '<' && token.back() == '>';
}

std::uint32_t token_id(std::string_view token) {
    return static_cast<std::uint32_t>(fnv1a64(token) & 0xffffffffu);
}

std::vector<Embedding> Backend::identity_gradient(const LatentTensor&, int, const PromptEncoding&, const LatentTensor&) {
    throw CapabilityError("backend '" + profile().name + "' cannot differentiate identity embeddings");
}

namespace {

// Standard normal from a 64-bit key (Box-Muller over two derived uniforms).
double hash_normal(std::uint64_t key) {
    const std::uint64_t a = splitmix64(key);
    const std::uint64_t b = splitmix64(a ^ 0xd1b54a32d192ed03ull);
    const double u1       = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
    const double u2       = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint8_t to_pixel(double z) {
    const double v = std::clamp((z + 1.0) * 127.5, 0.0, 255.0);
    return static_cast<std::uint8_t>(std::lround(v));
}

}  // namespace

ToyBackend::ToyBackend(ToyOptions options) : options_(options) {
    if (options_.channels < 1 || options_.factor < 1 || options_.embedding_dim < options_.channels)
        throw ConfigError("toy backend: invalid geometry");
    profile_.name                         = "toy";
    profile_.latent_channels              = options_.channels;
    profile_.downsample_factor            = options_.factor;
    profile_.supports_identity_embeddings = true;
    profile_.max_prompt_tokens            = 77;
    profile_.embedding_dim                = options_.embedding_dim;
}

LatentTensor ToyBackend::encode_image(const RgbImage& image) {
    const int f = options_.factor;
    if (image.width % f != 0 || image.height % f != 0 || image.empty())
        throw ShapeError("toy encode: " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                         " not divisible by factor " + std::to_string(f));
    LatentTensor z(options_.channels, image.height / f, image.width / f);
    const double block = static_cast<double>(f) * f;
    for (int c = 0; c < options_.channels; ++c) {
        if (c >= 3) continue;  // spare channels stay zero
        for (int y = 0; y < z.height; ++y) {
            for (int x = 0; x < z.width; ++x) {
                int sum = 0;
                for (int dy = 0; dy < f; ++dy)
                    for (int dx = 0; dx < f; ++dx) sum += image.at(x * f + dx, y * f + dy, c);
                z.at(c, y, x) = (sum / block) / 127.5 - 1.0;
            }
        }
    }
    return z;
}

RgbImage ToyBackend::decode_latent(const LatentTensor& z) {
    if (z.channels != options_.channels) throw ShapeError("toy decode: channel count mismatch");
    const int f       = options_.factor;
    const int present = std::min(z.channels, 3);
    RgbImage out(z.width * f, z.height * f);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            double mean = 0.0;
            for (int c = 0; c < present; ++c) mean += z.at(c, y / f, x / f);
            mean /= present;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = to_pixel(c < present ? z.at(c, y / f, x / f) : mean);
        }
    }
    return out;
}

Embedding ToyBackend::token_embedding(std::string_view token) {
    Embedding e(options_.embedding_dim);
    const std::uint64_t base = mix_keys(fnv1a64(token), options_.seed);
    for (int d = 0; d < options_.embedding_dim; ++d) e[d] = options_.row_scale * hash_normal(mix_keys(base, d));
    return e;
}

PromptEncoding encode_tokens(std::string_view text, const EmbeddingBindings& bindings, const BackendProfile& profile,
                             const std::function<Embedding(std::string_view)>& lookup) {
    PromptEncoding enc;
    enc.prompt_text = std::string(text);
    enc.tokens      = tokenize(text);
    if (enc.tokens.empty()) throw TokenizationError("prompt has no tokens");
    if (static_cast<int>(enc.tokens.size()) > profile.max_prompt_tokens)
        throw TokenizationError("prompt exceeds " + std::to_string(profile.max_prompt_tokens) + " tokens");
    for (std::size_t i = 0; i < enc.tokens.size(); ++i) {
        const auto& tok = enc.tokens[i];
        enc.token_ids.push_back(token_id(tok));
        if (!is_identity_token(tok)) {
            enc.embedding_matrix.push_back(lookup(tok));
            continue;
        }
        enc.identity_slots.push_back(static_cast<int>(i));
        if (auto it = bindings.vectors.find(tok); it != bindings.vectors.end()) {
            if (static_cast<int>(it->second.size()) != profile.embedding_dim)
                throw ShapeError("embedding for " + tok + " has dim " + std::to_string(it->second.size()));
            enc.embedding_matrix.push_back(it->second);
        } else if (bindings.allow_untrained) {
            enc.embedding_matrix.push_back(lookup(tok));
        } else {
            throw BindingError("identity token " + tok + " has no bound embedding");
        }
    }
    return enc;
}

PromptEncoding ToyBackend::encode_prompt(std::string_view text, const EmbeddingBindings& bindings) {
    return encode_tokens(text, bindings, profile_, [this](std::string_view tok) { return token_embedding(tok); });
}

Embedding ToyBackend::pooled(const PromptEncoding& cond) const {
    Embedding e(options_.embedding_dim, 0.0);
    if (cond.embedding_matrix.empty()) return e;
    for (const auto& row : cond.embedding_matrix) {
        if (static_cast<int>(row.size()) != options_.embedding_dim) throw ShapeError("embedding row has wrong dim");
        for (int d = 0; d < options_.embedding_dim; ++d) e[d] += row[d];
    }
    const double n = static_cast<double>(cond.embedding_matrix.size());
    for (auto& v : e) v /= n;
    return e;
}

double ToyBackend::projection(int c, int y, int x, int d) const {
    if (d < options_.channels) return d == c ? 1.0 : 0.0;
    const std::uint64_t key = mix_keys(mix_keys(mix_keys(options_.seed ^ 0x5eed, c), mix_keys(y, x)), d);
    return hash_normal(key);
}

const std::vector<double>& ToyBackend::projection_table(int height, int width) {
    auto [it, inserted] = projections_.try_emplace({height, width});
    if (inserted) {
        const int dim = options_.embedding_dim;
        auto& table   = it->second;
        table.resize(static_cast<std::size_t>(options_.channels) * height * width * dim);
        std::size_t k = 0;
        for (int c = 0; c < options_.channels; ++c)
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x)
                    for (int d = 0; d < dim; ++d) table[k++] = projection(c, y, x, d);
    }
    return it->second;
}

LatentTensor ToyBackend::offset(const PromptEncoding& cond, int height, int width) {
    const Embedding e   = pooled(cond);
    const auto& table   = projection_table(height, width);
    const int dim       = options_.embedding_dim;
    LatentTensor b(options_.channels, height, width);
    for (std::size_t k = 0; k < b.size(); ++k) {
        double acc       = 0.0;
        const double* w  = table.data() + k * dim;
        for (int d = 0; d < dim; ++d) acc += w[d] * e[d];
        b.data[k] = options_.gain * acc;
    }
    return b;
}

LatentTensor ToyBackend::predict_noise(const LatentTensor& z_t, int t, const PromptEncoding& cond) {
    if (z_t.channels != options_.channels)
        throw ShapeError("toy predict_noise: expected " + std::to_string(options_.channels) + " channels, got " +
                         std::to_string(z_t.channels));
    if (t < 0) throw RangeError("toy predict_noise: negative level");
    LatentTensor out = offset(cond, z_t.height, z_t.width);
    const std::size_t plane = z_t.plane();
    for (int c = 0; c < z_t.channels; ++c) {
        const double a = diagonal(c);
        for (std::size_t p = 0; p < plane; ++p) out.data[c * plane + p] += a * z_t.data[c * plane + p];
    }
    return out;
}

std::vector<Embedding> ToyBackend::identity_gradient(const LatentTensor& z_t, int, const PromptEncoding& cond,
                                                     const LatentTensor& upstream) {
    if (!upstream.same_shape(z_t)) throw ShapeError("identity_gradient: upstream shape mismatch");
    const auto& table = projection_table(z_t.height, z_t.width);
    const int dim     = options_.embedding_dim;
    Embedding de(dim, 0.0);
    for (std::size_t k = 0; k < upstream.size(); ++k) {
        const double g = upstream.data[k];
        if (g == 0.0) continue;
        const double* w = table.data() + k * dim;
        for (int d = 0; d < dim; ++d) de[d] += g * w[d];
    }
    const double scale = options_.gain / static_cast<double>(cond.embedding_matrix.size());
    for (auto& v : de) v *= scale;
    return std::vector<Embedding>(cond.identity_slots.size(), de);
}

}  // namespace sketchscene
