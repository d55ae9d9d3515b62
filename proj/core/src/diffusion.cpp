#include "sketchscene/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sketchscene/errors.hpp"
#include "sketchscene/rng.hpp"

namespace sketchscene {

bool LatentTensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

bool LatentMask::is_binary() const {
    return std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b <= 1; });
}

std::size_t LatentMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

ScheduleKind parse_schedule_kind(std::string_view name) {
    if (name == "scaled_linear" || name.empty()) return ScheduleKind::ScaledLinear;
    if (name == "linear") return ScheduleKind::Linear;
    throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

std::string_view to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::ScaledLinear: return "scaled_linear";
        case ScheduleKind::Linear: return "linear";
    }
    return "unknown";
}

double NoiseSchedule::signal(int t) const {
    return std::sqrt(alpha_bar[t]);
}

double NoiseSchedule::noise(int t) const {
    return std::sqrt(1.0 - alpha_bar[t]);
}

NoiseSchedule make_schedule(int steps, ScheduleKind kind) {
    constexpr int n = NoiseSchedule::kTrainingSteps;
    if (steps < 1 || steps > n) throw ConfigError("schedule step count must lie in [1, 1000], got " + std::to_string(steps));

    // beta_1..beta_N; linspace endpoints as in the reference LDM configs.
    std::vector<double> betas(n);
    for (int i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / (n - 1);
        switch (kind) {
            case ScheduleKind::ScaledLinear: {
                const double lo = std::sqrt(0.00085), hi = std::sqrt(0.012);
                const double b  = lo + (hi - lo) * frac;
                betas[i]        = b * b;
                break;
            }
            case ScheduleKind::Linear: betas[i] = 1e-4 + (0.02 - 1e-4) * frac; break;
        }
    }
    std::vector<double> cumulative(n + 1, 1.0);
    for (int i = 1; i <= n; ++i) cumulative[i] = cumulative[i - 1] * (1.0 - betas[i - 1]);

    NoiseSchedule sched;
    sched.kind  = kind;
    sched.steps = steps;
    sched.alpha_bar.resize(steps + 1);
    for (int t = 0; t <= steps; ++t) sched.alpha_bar[t] = cumulative[(t * n + steps / 2) / steps];
    return sched;
}

namespace {

void require_same_shape(const LatentTensor& a, const LatentTensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.channels) + "x" +
                         std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " + std::to_string(b.channels) +
                         "x" + std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
    }
}

}  // namespace

LatentTensor forward_noise(const LatentTensor& z0, int t, const LatentTensor& eps, const NoiseSchedule& sched) {
    require_same_shape(z0, eps, "forward_noise");
    if (t < 0 || t > sched.steps) throw RangeError("forward_noise: level " + std::to_string(t) + " out of range");
    if (t == 0) return z0;
    const double a = sched.signal(t), s = sched.noise(t);
    LatentTensor out(z0.channels, z0.height, z0.width);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a * z0.data[i] + s * eps.data[i];
    return out;
}

LatentTensor sampler_step(const LatentTensor& z_t, const LatentTensor& eps_hat, int t, const NoiseSchedule& sched) {
    require_same_shape(z_t, eps_hat, "sampler_step");
    if (t < 1 || t > sched.steps) throw RangeError("sampler_step: level " + std::to_string(t) + " out of range");
    if (!eps_hat.all_finite()) throw NumericError("sampler_step: non-finite noise prediction", t);
    const double a_t = sched.signal(t), s_t = sched.noise(t);
    const double a_p = sched.signal(t - 1), s_p = sched.noise(t - 1);
    LatentTensor out(z_t.channels, z_t.height, z_t.width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x0 = (z_t.data[i] - s_t * eps_hat.data[i]) / a_t;
        out.data[i]     = a_p * x0 + s_p * eps_hat.data[i];
    }
    return out;
}

LatentTensor blend_latents(const LatentTensor& z_bg, const LatentTensor& z_fg, const LatentMask& m) {
    require_same_shape(z_bg, z_fg, "blend_latents");
    if (m.height != z_bg.height || m.width != z_bg.width) throw ShapeError("blend_latents: mask not spatially aligned");
    if (!m.is_binary()) throw MaskError("blend_latents: mask is not binary");
    LatentTensor out(z_bg.channels, z_bg.height, z_bg.width);
    const std::size_t plane = z_bg.plane();
    for (int c = 0; c < z_bg.channels; ++c) {
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t i = c * plane + p;
            out.data[i]         = m.bits[p] ? z_fg.data[i] : z_bg.data[i];
        }
    }
    return out;
}

LatentMask downsample_mask(const Mask& full, int factor) {
    if (factor < 1) throw ShapeError("downsample_mask: factor must be >= 1");
    if (full.width % factor != 0 || full.height % factor != 0)
        throw ShapeError("downsample_mask: " + std::to_string(full.width) + "x" + std::to_string(full.height) +
                         " not divisible by " + std::to_string(factor));
    if (!full.is_binary()) throw MaskError("downsample_mask: mask is not binary");
    LatentMask out(full.height / factor, full.width / factor);
    const int block = factor * factor;
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            int sum = 0;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx) sum += full.at(x * factor + dx, y * factor + dy);
            out.at(y, x) = 2 * sum >= block ? 1 : 0;
        }
    }
    return out;
}

LatentTensor gaussian_latent(int channels, int height, int width, Rng& rng) {
    LatentTensor out(channels, height, width);
    for (auto& v : out.data) v = rng.normal();
    return out;
}

}  // namespace sketchscene
