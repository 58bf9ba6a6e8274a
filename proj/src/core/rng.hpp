#ifndef ADSIM_CORE_RNG_HPP
#define ADSIM_CORE_RNG_HPP

#include <cstdint>
#include <cmath>

namespace adsim {

/// Deterministic 64-bit generator (splitmix64). The standard engines are
/// portable but the standard distributions are not, so all stochastic
/// choices in the simulator go through this one class.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return n == 0 ? 0 : next_u64() % n;
    }

    /// Standard normal via Box-Muller (one value per call, cache discarded).
    double normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    bool bernoulli(double p) { return next_double() < p; }

private:
    std::uint64_t state_;
};

} // namespace adsim

#endif
