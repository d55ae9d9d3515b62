#include "oracles.hpp"

#include <cmath>

namespace sketchscene::testing {

std::vector<double> reference_alpha_bar(int steps, bool scaled_linear) {
    const int n = 1000;
    std::vector<long double> cum(n + 1);
    cum[0] = 1.0L;
    for (int i = 1; i <= n; ++i) {
        long double beta;
        if (scaled_linear) {
            const long double lo = std::sqrt(0.00085L), hi = std::sqrt(0.012L);
            const long double r  = lo + (hi - lo) * (i - 1) / (n - 1);
            beta                 = r * r;
        } else {
            beta = 1e-4L + (0.02L - 1e-4L) * (i - 1) / (n - 1);
        }
        cum[i] = cum[i - 1] * (1.0L - beta);
    }
    std::vector<double> out;
    for (int t = 0; t <= steps; ++t) {
        // nearest training index to t * n / steps, ties rounded up
        const long long idx = static_cast<long long>(std::floor(static_cast<long double>(t) * n / steps + 0.5L));
        out.push_back(static_cast<double>(cum[idx]));
    }
    return out;
}

RecurrenceInputs toy_recurrence_inputs(const CompositeGuide& guide, const RenderConfig& cfg, const PromptPair& prompts,
                                       const EmbeddingBindings& bindings, ToyBackend& toy,
                                       const std::vector<double>& alpha_bar) {
    const auto& o = toy.options();
    RecurrenceInputs in;
    in.channels  = o.channels;
    in.height    = cfg.height / o.factor;
    in.width     = cfg.width / o.factor;
    in.steps     = cfg.steps;
    in.alpha     = cfg.alpha;
    in.alpha_bar = alpha_bar;
    in.z_T       = initial_noise(cfg.seed, in.channels, in.height, in.width).data;
    in.z_init    = reference_toy_encode(guide.x_init, o.channels, o.factor).data;
    in.fg_eps.resize(cfg.steps + 1);
    for (int t = 1; t <= cfg.steps; ++t) in.fg_eps[t] = foreground_noise(cfg.seed, t, in.channels, in.height, in.width).data;
    in.mask = std::vector<int>(guide.latent_mask.bits.begin(), guide.latent_mask.bits.end());
    for (int c = 0; c < in.channels; ++c) in.diag.push_back(1.0 - 0.05 * (c % 4));
    in.b_background = toy.offset(toy.encode_prompt(prompts.background_prompt, bindings), in.height, in.width).data;
    in.b_global     = toy.offset(toy.encode_prompt(prompts.global_prompt, bindings), in.height, in.width).data;
    return in;
}

std::vector<double> reference_recurrence(const RecurrenceInputs& in) {
    const int plane = in.height * in.width;
    std::vector<double> z = in.z_T;
    for (int t = in.steps; t >= 1; --t) {
        const double ab_t = in.alpha_bar[t], ab_p = in.alpha_bar[t - 1];
        const bool blended = t > in.alpha * in.steps;
        std::vector<double> next(z.size());
        for (int c = 0; c < in.channels; ++c) {
            for (int p = 0; p < plane; ++p) {
                const int i      = c * plane + p;
                const double off = blended ? in.b_background[i] : in.b_global[i];
                const double eps = in.diag[c] * z[i] + off;
                const double x0  = (z[i] - std::sqrt(1.0 - ab_t) * eps) / std::sqrt(ab_t);
                const double den = std::sqrt(ab_p) * x0 + std::sqrt(1.0 - ab_p) * eps;
                if (blended && in.mask[p]) {
                    next[i] = std::sqrt(ab_p) * in.z_init[i] + std::sqrt(1.0 - ab_p) * in.fg_eps[t][i];
                } else {
                    next[i] = den;
                }
            }
        }
        z = std::move(next);
    }
    return z;
}

LatentMask reference_downsample(const Mask& full, int factor) {
    LatentMask out(full.height / factor, full.width / factor);
    for (int by = 0; by < out.height; ++by)
        for (int bx = 0; bx < out.width; ++bx) {
            double mean = 0.0;
            for (int y = by * factor; y < (by + 1) * factor; ++y)
                for (int x = bx * factor; x < (bx + 1) * factor; ++x) mean += full.at(x, y);
            mean /= static_cast<double>(factor * factor);
            out.at(by, bx) = mean >= 0.5 ? 1 : 0;
        }
    return out;
}

LatentTensor reference_toy_encode(const RgbImage& image, int channels, int factor) {
    LatentTensor z(channels, image.height / factor, image.width / factor);
    for (int c = 0; c < channels && c < 3; ++c)
        for (int by = 0; by < z.height; ++by)
            for (int bx = 0; bx < z.width; ++bx) {
                double mean = 0.0;
                for (int y = 0; y < factor; ++y)
                    for (int x = 0; x < factor; ++x) mean += image.at(bx * factor + x, by * factor + y, c);
                mean /= factor * factor;
                z.at(c, by, bx) = mean / 127.5 - 1.0;
            }
    return z;
}

std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       const std::vector<double>& x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto up = x, down = x;
        up[i] += h;
        down[i] -= h;
        g[i] = (f(up) - f(down)) / (2.0 * h);
    }
    return g;
}

}  // namespace sketchscene::testing
