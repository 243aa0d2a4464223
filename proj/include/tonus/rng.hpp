#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tonus {

// Deterministic random source. The distribution helpers are written out by
// hand instead of using <random> distributions so that a given seed produces
// the same sequence on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n ? gen_() % n : 0; }

    bool chance(double p) { return uniform() < p; }

    // Box-Muller, one value per call (the twin is discarded to keep the
    // consumption pattern simple and reproducible).
    double gaussian(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return mean + stddev * z;
    }

    // Knuth's product method; adequate for the small rates used here.
    std::uint32_t poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda > 64.0) {
            // Split large rates to avoid underflow of exp(-lambda).
            std::uint32_t n = poisson(lambda / 2.0);
            return n + poisson(lambda - lambda / 2.0);
        }
        const double limit = std::exp(-lambda);
        std::uint32_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace tonus
