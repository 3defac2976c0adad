#pragma once

#include <cstdint>
#include <random>

#include "bvlab/algebra.hpp"

namespace bvlab::testing {

// Seeded uniform draws for the property tests.
class Draw {
public:
    explicit Draw(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    Vector vector(std::size_t n, double lo = -1.0, double hi = 1.0) {
        Vector v(n);
        for (double& x : v) x = uniform(lo, hi);
        return v;
    }
    // M M^T + shift I with M uniform in [-1, 1].
    Matrix spd(std::size_t n, double shift = 0.5) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) m(i, j) = uniform(-1.0, 1.0);
        Matrix s = m * m.transposed();
        for (std::size_t i = 0; i < n; ++i) s(i, i) += shift;
        return s;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace bvlab::testing
