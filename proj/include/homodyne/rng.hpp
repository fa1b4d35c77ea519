#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "homodyne/constants.hpp"

namespace homodyne {

/// splitmix64 step; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for substream `stream` of a base seed. Distinct streams are
/// statistically independent for mt19937_64 seeding purposes.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t s = base;
    (void)splitmix64(s);
    s ^= 0xd1b54a32d192ed03ULL * (stream + 1);
    (void)splitmix64(s);
    return splitmix64(s);
}

/// Deterministic standard-normal sampler. mt19937_64's output sequence is
/// fixed by the standard; Box-Muller on top of it keeps traces bit-identical
/// across standard libraries (std::normal_distribution is not portable).
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform in [0,1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace homodyne
