#pragma once

#include <cstdint>
#include <random>

#include "saldiff/tensor.hpp"

namespace saldiff {

// Deterministic random stream: mt19937_64 (fully specified by the standard)
// plus hand-rolled uniform/normal transforms, so the same seed and call
// sequence produce the same doubles on every platform. std::*_distribution
// is avoided on purpose -- its algorithms are implementation-defined.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Standard normal via Marsaglia polar; second deviate is cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double k = std::sqrt(-2.0 * std::log(s) / s);
        cached_ = v * k;
        has_cached_ = true;
        return u * k;
    }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw ArgumentError("uniform_int: hi < lo");
        int span = hi - lo + 1;
        int r = lo + static_cast<int>(uniform() * span);
        return r > hi ? hi : r;
    }

    Tensor normal_tensor(std::vector<int> shape) {
        Tensor t(std::move(shape));
        for (auto& x : t.data) x = normal();
        return t;
    }

    Tensor uniform_tensor(std::vector<int> shape, double lo, double hi) {
        Tensor t(std::move(shape));
        for (auto& x : t.data) x = lo + (hi - lo) * uniform();
        return t;
    }

private:
    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace saldiff
