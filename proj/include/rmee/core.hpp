#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmee {

// Invalid configuration value (bad sigma, bad proportion, ...).
struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid runtime input (empty sample, dimension mismatch, parse failure, ...).
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Non-finite value encountered during optimization.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    const double* row(std::size_t i) const { return data.data() + i * cols; }
    double* row(std::size_t i) { return data.data() + i * cols; }
};

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

/// Numerically stable logistic function. Never overflows, and the output is
/// clamped to the open interval (0, 1) at double precision so model errors
/// t - y stay strictly inside (-1, 1) even for saturated inputs.
inline double sigmoid(double z) {
    constexpr double lo = 0x1p-53;
    constexpr double hi = 1.0 - 0x1p-53;
    double y;
    if (z >= 0.0) {
        y = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double ez = std::exp(z);
        y = ez / (1.0 + ez);
    }
    return y < lo ? lo : (y > hi ? hi : y);
}

/// Deterministic random source. The raw 64-bit stream is bit-identical for
/// equal seeds; derived real-valued draws use fixed algorithms (no
/// implementation-defined std distributions) so sequences reproduce across
/// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    /// Standard normal via Box-Muller (one value per pair of uniforms).
    double gaussian() {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Unbiased integer in [0, n) by rejection sampling.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw InvalidParameter("Rng::below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Partial Fisher-Yates: first k entries of a random permutation of 0..n-1.
    std::vector<std::size_t> choose(std::size_t n, std::size_t k) {
        if (k > n) throw InvalidParameter("Rng::choose: k exceeds n");
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

    /// Independent substream seed derived from (master, stream) via splitmix64.
    static std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
        std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace rmee
