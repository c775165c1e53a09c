#pragma once

#include <cmath>
#include <cstdint>

namespace ravit {

// splitmix64 + Box-Muller. Self-contained so identical seeds give
// bitwise-identical weight streams regardless of platform or stdlib.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    float uniform() {
        return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
    }

    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    float normal(float mean, float stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586 * u2;
        spare_ = static_cast<float>(r * std::sin(a));
        has_spare_ = true;
        return mean + stddev * static_cast<float>(r * std::cos(a));
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    float spare_ = 0.f;
};

} // namespace ravit
