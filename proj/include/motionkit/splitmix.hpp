#pragma once

#include <cmath>
#include <cstdint>

namespace motionkit {

// SplitMix64 stream. The draw mapping below (shift-and-scale doubles,
// floor-based index draws) is part of the on-disk plan contract: two
// implementations seeded identically must produce identical plans.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n); one next_double() draw mapped through floor(u * n).
    std::uint64_t next_index(std::uint64_t n) {
        const auto i = static_cast<std::uint64_t>(next_double() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    // Uniform in [lo, hi); one draw.
    double next_uniform(double lo, double hi) {
        return lo + next_double() * (hi - lo);
    }

private:
    std::uint64_t state_;
};

// Standard normal deviates on top of SplitMix64 (Box-Muller, cached spare).
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = rng_.next_double();
        while (u1 <= 0.0) u1 = rng_.next_double();
        const double u2 = rng_.next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    SplitMix64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace motionkit
