// Copyright 2026 hexring contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

// Self-contained RNG and samplers. std::poisson_distribution and friends are
// implementation-defined, which would break byte-identical outputs across
// toolchains, so the samplers are spelled out here.
namespace hexring::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class Stream {
  public:
    explicit Stream(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        splitmix64(state_);
        splitmix64(state_);
    }

    // Derive an independent stream, e.g. one per image row.
    static Stream substream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t s = seed;
        splitmix64(s);
        s ^= 0xD1B54A32D192ED03ull * (index + 1);
        return Stream(s);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal, Box-Muller (no cached spare: keeps the consumption
    // pattern independent of call history)
    double next_normal() {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Poisson sample; Knuth multiplication below mean 64, Gaussian
    // approximation above (counts that large are noise-dominated anyway).
    std::uint32_t next_poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 64.0) {
            const double limit = std::exp(-mean);
            double prod = next_double();
            std::uint32_t k = 0;
            while (prod > limit) {
                ++k;
                prod *= next_double();
            }
            return k;
        }
        const double g = mean + std::sqrt(mean) * next_normal();
        if (g <= 0.0) return 0;
        return static_cast<std::uint32_t>(std::llround(g));
    }

  private:
    std::uint64_t state_;
};

}  // namespace hexring::rng
