#include "sketchscene/rng.hpp"

#include <cmath>
#include <numbers>

#include "sketchscene/hash.hpp"

namespace sketchscene {

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(mix_keys(seed, stream)) {}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r  = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_          = r * std::sin(th);
    has_spare_      = true;
    return r * std::cos(th);
}

}  // namespace sketchscene
