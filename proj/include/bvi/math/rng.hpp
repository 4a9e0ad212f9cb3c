#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic random number generation. The engine is std::mt19937_64 whose
// output sequence is pinned by the standard; all variate transforms are
// implemented here rather than through std::*_distribution (whose algorithms
// are implementation-defined), so a (seed, stream) pair reproduces identical
// draws on any platform.

namespace bvi::math {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Independent substream keyed by (this seed, ids...). Used to give each
    /// experiment cell / chain / draw its own reproducible stream.
    static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
        std::uint64_t h = splitmix64(seed);
        for (auto id : ids) h = splitmix64(h ^ splitmix64(id));
        return Rng(h);
    }

    std::uint64_t bits() { return engine_(); }

    /// Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1); never returns 0 (safe for logs and quantiles).
    double uniform_pos() {
        double u;
        do { u = uniform(); } while (u == 0.0);
        return u;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool fair_sign() { return (engine_() >> 63) != 0; }

    /// Standard normal via Box-Muller (both values used).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double c = std::cos(2.0 * 3.14159265358979323846 * u2);
        double s = std::sin(2.0 * 3.14159265358979323846 * u2);
        spare_ = r * s;
        have_spare_ = true;
        return r * c;
    }

    /// Gamma(shape, 1) by Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = uniform_pos();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace bvi::math
