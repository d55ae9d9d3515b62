#pragma once

#include <cstdint>
#include <random>

namespace sketchscene {

// Seeded generator with bit-reproducible uniform and normal draws.
// std::normal_distribution is implementation-defined, so Gaussians come from
// Box-Muller over the raw mt19937_64 stream instead.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [0, 1).
    double uniform();
    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_   = 0.0;
};

}  // namespace sketchscene
