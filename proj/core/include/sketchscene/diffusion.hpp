#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "sketchscene/raster.hpp"

namespace sketchscene {

class Rng;

// Latent array of shape (channels, height, width), channel-major.
struct LatentTensor {
    int channels = 0;
    int height   = 0;
    int width    = 0;
    std::vector<double> data;

    LatentTensor() = default;
    LatentTensor(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    std::size_t index(int c, int y, int x) const { return c * plane() + static_cast<std::size_t>(y) * width + x; }
    double& at(int c, int y, int x) { return data[index(c, y, x)]; }
    double at(int c, int y, int x) const { return data[index(c, y, x)]; }

    bool same_shape(const LatentTensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    bool all_finite() const;

    friend bool operator==(const LatentTensor&, const LatentTensor&) = default;
};

// Binary (1, h, w) mask broadcast over latent channels.
struct LatentMask {
    int height = 0;
    int width  = 0;
    std::vector<std::uint8_t> bits;

    LatentMask() = default;
    LatentMask(int h, int w, std::uint8_t fill = 0) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill) {}

    std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int y, int x) { return bits[static_cast<std::size_t>(y) * width + x]; }
    bool is_binary() const;
    std::size_t count() const;

    friend bool operator==(const LatentMask&, const LatentMask&) = default;
};

enum class ScheduleKind { ScaledLinear, Linear };

ScheduleKind parse_schedule_kind(std::string_view name);
std::string_view to_string(ScheduleKind kind);

// Cumulative signal coefficients alpha_bar[0..T] over T inference levels.
// Levels are evenly spaced over a 1000-step training discretization, so
// alpha_bar[T] is the base model's terminal value regardless of T.
struct NoiseSchedule {
    static constexpr int kTrainingSteps = 1000;

    ScheduleKind kind = ScheduleKind::ScaledLinear;
    int steps         = 0;
    std::vector<double> alpha_bar;

    double signal(int t) const;  // sqrt(alpha_bar[t])
    double noise(int t) const;   // sqrt(1 - alpha_bar[t])
};

// Throws ConfigError if T is outside [1, 1000].
NoiseSchedule make_schedule(int steps, ScheduleKind kind = ScheduleKind::ScaledLinear);

LatentTensor forward_noise(const LatentTensor& z0, int t, const LatentTensor& eps, const NoiseSchedule& sched);

// Deterministic variance-free (DDIM) update from level t to level t-1.
LatentTensor sampler_step(const LatentTensor& z_t, const LatentTensor& eps_hat, int t, const NoiseSchedule& sched);

// z_bg * (1 - m) + z_fg * m, with m broadcast across channels.
LatentTensor blend_latents(const LatentTensor& z_bg, const LatentTensor& z_fg, const LatentMask& m);

// Cell is set iff at least half of its factor x factor block is set.
LatentMask downsample_mask(const Mask& full, int factor);

LatentTensor gaussian_latent(int channels, int height, int width, Rng& rng);

}  // namespace sketchscene
