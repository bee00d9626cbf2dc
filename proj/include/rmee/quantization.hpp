#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "rmee/core.hpp"

namespace rmee {

/// Quantization codebook: distinct words c_1..c_M and the number of samples
/// assigned to each word. Counts always sum to the quantized sample size.
struct Codebook {
    std::vector<double> words;
    std::vector<std::int64_t> counts;

    std::size_t size() const { return words.size(); }
    std::int64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }
};

struct QuantizerConfig {
    double epsilon = 0.05;  // relative threshold on the sample range

    explicit QuantizerConfig(double eps = 0.05) : epsilon(eps) {
        if (!(eps >= 0.0)) throw InvalidParameter("QuantizerConfig: epsilon must be nonnegative");
    }
};

/// Online adaptive quantizer. Seeds the codebook with the first sample; each
/// later sample merges into the nearest word when within epsilon * range,
/// otherwise founds a new word (counted once for itself). Ties on distance go
/// to the earliest word. Sequential, so the result depends on input order.
inline std::pair<Codebook, std::vector<std::size_t>> quantize(const std::vector<double>& samples,
                                                              const QuantizerConfig& cfg) {
    if (samples.empty()) throw InvalidInput("quantize: empty input");
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    const double threshold = cfg.epsilon * (*mx - *mn);

    Codebook book;
    std::vector<std::size_t> assignment(samples.size());
    book.words.push_back(samples[0]);
    book.counts.push_back(1);
    assignment[0] = 0;

    for (std::size_t i = 1; i < samples.size(); ++i) {
        std::size_t best = 0;
        double best_dist = std::abs(samples[i] - book.words[0]);
        for (std::size_t j = 1; j < book.words.size(); ++j) {
            const double d = std::abs(samples[i] - book.words[j]);
            if (d < best_dist) {
                best_dist = d;
                best = j;
            }
        }
        if (best_dist <= threshold) {
            ++book.counts[best];
            assignment[i] = best;
        } else {
            book.words.push_back(samples[i]);
            book.counts.push_back(1);
            assignment[i] = book.words.size() - 1;
        }
    }
    return {std::move(book), std::move(assignment)};
}

/// The predetermined three-word codebook (0, -1, 1) with given weights.
/// (N, 0, 0) reproduces the C-Loss configuration.
inline Codebook restricted_codebook(std::int64_t phi0, std::int64_t phi_neg1, std::int64_t phi1) {
    if (phi0 < 0 || phi_neg1 < 0 || phi1 < 0)
        throw InvalidParameter("restricted_codebook: counts must be nonnegative");
    if (phi0 + phi_neg1 + phi1 <= 0)
        throw InvalidParameter("restricted_codebook: counts must not all be zero");
    return Codebook{{0.0, -1.0, 1.0}, {phi0, phi_neg1, phi1}};
}

}  // namespace rmee
