#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rmee/core.hpp"
#include "rmee/kernel_density.hpp"
#include "rmee/quantization.hpp"

namespace rmee {

enum class Criterion { CE, MSE, CLoss, QMEE, RMEE };

inline const char* criterion_name(Criterion c) {
    switch (c) {
        case Criterion::CE: return "ce";
        case Criterion::MSE: return "mse";
        case Criterion::CLoss: return "closs";
        case Criterion::QMEE: return "qmee";
        case Criterion::RMEE: return "rmee";
    }
    return "?";
}

inline Criterion criterion_from_name(const std::string& s) {
    if (s == "ce") return Criterion::CE;
    if (s == "mse") return Criterion::MSE;
    if (s == "closs") return Criterion::CLoss;
    if (s == "qmee") return Criterion::QMEE;
    if (s == "rmee") return Criterion::RMEE;
    throw InvalidParameter("unknown criterion: " + s);
}

/// Peak weights (phi_0, phi_-1, phi_1) of the restricted codebook.
struct Phi {
    double at0 = 0.0;
    double atNeg1 = 0.0;
    double atPos1 = 0.0;

    double total() const { return at0 + atNeg1 + atPos1; }
    bool valid() const { return at0 >= 0.0 && atNeg1 >= 0.0 && atPos1 >= 0.0 && total() > 0.0; }
};

/// Which objective to evaluate/fit, with its kernel parameters. sigma is
/// ignored by CE/MSE; phi is used by RMEE/CLoss; quantizer_epsilon by QMEE.
struct CriterionSpec {
    Criterion kind = Criterion::RMEE;
    double sigma = 0.25;
    Phi phi{1.0, 0.0, 0.0};
    double quantizer_epsilon = 0.05;
};

/// Targets in {0,1}, probabilities in (0,1), and their errors t - y.
struct PredictionBatch {
    std::vector<int> targets;
    std::vector<double> probs;
    std::vector<double> errors;

    std::size_t size() const { return targets.size(); }
};

inline PredictionBatch make_batch(std::vector<int> targets, std::vector<double> probs) {
    if (targets.size() != probs.size()) throw InvalidInput("make_batch: length mismatch");
    PredictionBatch b;
    b.errors.resize(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] != 0 && targets[i] != 1) throw InvalidInput("make_batch: targets must be 0 or 1");
        if (!(probs[i] > 0.0 && probs[i] < 1.0))
            throw InvalidInput("make_batch: probabilities must lie strictly inside (0,1)");
        b.errors[i] = static_cast<double>(targets[i]) - probs[i];
    }
    b.targets = std::move(targets);
    b.probs = std::move(probs);
    return b;
}

/// Cross-entropy empirical risk, the unnormalized sum over samples.
/// Probabilities are clamped to [1e-12, 1-1e-12] so the risk stays finite.
inline double ce_risk(const PredictionBatch& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double y = std::min(std::max(b.probs[i], 1e-12), 1.0 - 1e-12);
        acc -= b.targets[i] == 1 ? std::log(y) : std::log(1.0 - y);
    }
    return acc;
}

/// Mean squared error of the batch; at most 1 under the {0,1} scheme.
inline double mse_risk(const PredictionBatch& b) {
    if (b.size() == 0) return 0.0;
    double acc = 0.0;
    for (double e : b.errors) acc += e * e;
    return acc / static_cast<double>(b.size());
}

/// Quantized information potential (1/N^2) sum_i sum_j phi_j kappa(e_i - c_j)
/// for an arbitrary codebook. Shared by the QMEE and RMEE objectives.
inline double quantized_potential(const std::vector<double>& errors, const Codebook& book,
                                  const KernelParams& k) {
    const std::size_t n = errors.size();
    if (n == 0) throw InvalidInput("quantized_potential: empty error sample");
    double acc = 0.0;
    for (double e : errors)
        for (std::size_t j = 0; j < book.size(); ++j)
            acc += static_cast<double>(book.counts[j]) * gaussian_kernel(e - book.words[j], k);
    return acc / (static_cast<double>(n) * static_cast<double>(n));
}

namespace detail {
inline double weighted_restricted_potential(const std::vector<double>& errors, const Phi& phi,
                                            double sigma) {
    const KernelParams k(sigma);
    const std::size_t n = errors.size();
    double acc = 0.0;
    for (double e : errors)
        acc += phi.at0 * gaussian_kernel(e, k) + phi.atNeg1 * gaussian_kernel(e + 1.0, k) +
               phi.atPos1 * gaussian_kernel(e - 1.0, k);
    return acc / (static_cast<double>(n) * static_cast<double>(n));
}
}  // namespace detail

/// Restricted quadratic information potential over the codebook (0,-1,1):
/// (1/N^2) sum_i [phi_0 k(e_i) + phi_-1 k(e_i+1) + phi_1 k(e_i-1)]. This is
/// the quantity the optimizer maximizes; the 1/(sqrt(2 pi) sigma) kernel
/// constant is kept so reported values are comparable across bandwidths.
/// phi = (N,0,0) makes it the C-Loss kernel mean.
inline double rmee_objective(const PredictionBatch& b, const CriterionSpec& spec) {
    if (spec.kind != Criterion::RMEE && spec.kind != Criterion::CLoss)
        throw InvalidParameter("rmee_objective: spec kind must be RMEE or CLoss");
    if (!spec.phi.valid()) throw InvalidParameter("rmee_objective: invalid phi weights");
    if (b.size() == 0) throw InvalidInput("rmee_objective: empty batch");
    return detail::weighted_restricted_potential(b.errors, spec.phi, spec.sigma);
}

/// QMEE objective: quantizes the current errors adaptively, then evaluates
/// the quantized potential against the resulting codebook.
inline double qmee_objective(const PredictionBatch& b, const CriterionSpec& spec) {
    if (spec.kind != Criterion::QMEE) throw InvalidParameter("qmee_objective: spec kind must be QMEE");
    const auto [book, assignment] = quantize(b.errors, QuantizerConfig(spec.quantizer_epsilon));
    return quantized_potential(b.errors, book, KernelParams(spec.sigma));
}

/// Empirical inner-product similarity between the Parzen error density and
/// the three-peak target: zeta_0 f(0) + zeta_-1 f(-1) + zeta_1 f(1).
inline double inner_product_similarity(const PredictionBatch& b, const std::array<double, 3>& zeta,
                                       const KernelParams& k) {
    const double sum = zeta[0] + zeta[1] + zeta[2];
    if (zeta[0] < 0.0 || zeta[1] < 0.0 || zeta[2] < 0.0 || std::abs(sum - 1.0) > 1e-9)
        throw InvalidParameter("inner_product_similarity: zeta must be nonnegative and sum to 1");
    return zeta[0] * parzen_pdf(0.0, b.errors, k) + zeta[1] * parzen_pdf(-1.0, b.errors, k) +
           zeta[2] * parzen_pdf(1.0, b.errors, k);
}

}  // namespace rmee
