#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ourgan/tensor.hpp"

namespace ourgan {

/// Deterministic random source. std::mt19937_64 supplies the bit stream; the
/// distributions are written out explicitly because the standard library
/// leaves std::normal_distribution's algorithm implementation-defined and run
/// manifests promise bit-reproducible sampling.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; one value per call, cached pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard against log(0).
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    Tensor normal_tensor(std::vector<int64_t> dims, float stddev = 1.0f) {
        Tensor t(std::move(dims));
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = stddev * static_cast<float>(normal());
        return t;
    }

    Tensor uniform_tensor(std::vector<int64_t> dims, float lo, float hi) {
        Tensor t(std::move(dims));
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(uniform(lo, hi));
        return t;
    }

    /// Integer in [0, n).
    int64_t index(int64_t n) {
        return static_cast<int64_t>(uniform() * static_cast<double>(n)) % n;
    }

    /// Derive an independent stream; used to hand one seed per pipeline stage.
    static uint64_t derive(uint64_t master, uint64_t counter) {
        // splitmix64 over master + counter
        uint64_t z = master + 0x9e3779b97f4a7c15ULL * (counter + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ourgan
