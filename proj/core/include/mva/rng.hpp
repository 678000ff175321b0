#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mva {

// Deterministic RNG. std::*_distribution output is implementation defined,
// so uniform/gaussian draws are built directly from the mt19937_64 stream
// to keep seeded datasets bit-identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0,1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one spare value cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 2.0 * M_PI * u2;
        spare_ = r * std::sin(th);
        has_spare_ = true;
        return r * std::cos(th);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    // Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) { return gen_() % n; }

    Rng fork() { return Rng(gen_() ^ 0x9e3779b97f4a7c15ull); }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mva
