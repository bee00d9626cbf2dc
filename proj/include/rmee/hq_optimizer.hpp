#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "rmee/core.hpp"
#include "rmee/criteria.hpp"
#include "rmee/data.hpp"
#include "rmee/models.hpp"

namespace rmee {

/// Auxiliary variables of the half-quadratic bound, one (u, v, s) triple per
/// sample for the peaks at 0, -1, +1. Every entry lies in [-1, 0).
struct HQAux {
    std::vector<double> u;
    std::vector<double> v;
    std::vector<double> s;
};

/// Closed-form auxiliary update: the supremum of the conjugate bound is
/// attained at -exp(-(.)^2 / (2 sigma^2)) for each peak.
inline HQAux hq_aux_update(const ErrorSample& errors, double sigma) {
    if (!(sigma > 0.0)) throw InvalidParameter("hq_aux_update: sigma must be positive");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    HQAux aux;
    aux.u.resize(errors.size());
    aux.v.resize(errors.size());
    aux.s.resize(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const double e = errors[i];
        aux.u[i] = -std::exp(-e * e * inv);
        aux.v[i] = -std::exp(-(e + 1.0) * (e + 1.0) * inv);
        aux.s[i] = -std::exp(-(e - 1.0) * (e - 1.0) * inv);
    }
    return aux;
}

/// Inner maximization target with the auxiliaries held fixed:
/// sum_i [phi_0 u_i e_i^2 + phi_-1 v_i (e_i+1)^2 + phi_1 s_i (e_i-1)^2].
/// Nonpositive by construction (negative auxiliaries times squares).
inline double jr2_objective(const PredictionBatch& b, const HQAux& aux, const Phi& phi) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double e = b.errors[i];
        acc += phi.at0 * aux.u[i] * e * e + phi.atNeg1 * aux.v[i] * (e + 1.0) * (e + 1.0) +
               phi.atPos1 * aux.s[i] * (e - 1.0) * (e - 1.0);
    }
    return acc;
}

/// Gradient of jr2_objective over the trainable weights. Rows of `features`
/// are the per-sample inputs: augmented raw attributes for the logistic
/// model, hidden activations for the ELM (the chain rule swaps x_i for h_i).
inline std::vector<double> jr2_gradient(const Matrix& features, const PredictionBatch& b,
                                        const HQAux& aux, const Phi& phi) {
    if (features.rows != b.size()) throw InvalidInput("jr2_gradient: feature/batch size mismatch");
    std::vector<double> grad(features.cols, 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double e = b.errors[i];
        const double y = b.probs[i];
        const double bracket = phi.at0 * aux.u[i] * e + phi.atNeg1 * aux.v[i] * (e + 1.0) +
                               phi.atPos1 * aux.s[i] * (e - 1.0);
        const double coeff = -2.0 * bracket * y * (1.0 - y);
        const double* x = features.row(i);
        for (std::size_t k = 0; k < features.cols; ++k) grad[k] += coeff * x[k];
    }
    return grad;
}

struct AdamParams {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One Adam ascent step with bias-corrected moments. Callers minimizing a
/// risk pass the negated gradient.
inline void adam_step(std::vector<double>& weights, const std::vector<double>& gradient,
                      AdamState& state, const AdamParams& p) {
    if (weights.size() != gradient.size() || weights.size() != state.m.size())
        throw InvalidInput("adam_step: shape mismatch");
    for (double g : gradient)
        if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
    ++state.t;
    const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double g = gradient[i];
        state.m[i] = p.beta1 * state.m[i] + (1.0 - p.beta1) * g;
        state.v[i] = p.beta2 * state.v[i] + (1.0 - p.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        weights[i] += p.learning_rate * m_hat / (std::sqrt(v_hat) + p.eps_hat);
    }
}

/// Optimizer knobs. sigma is used by the entry points that have no separate
/// CriterionSpec argument (fit_rmee_full, cross_validate_sigma); hq_fit takes
/// the criterion parameters from its spec.
struct FitConfig {
    double sigma = 0.25;
    std::size_t max_outer_iters = 200;
    std::size_t inner_steps = 50;
    double varsigma = 1e-6;  // convergence threshold on the objective difference
    AdamParams adam;
    std::uint64_t seed = 0;
};

/// One objective value per completed outer iteration. For the HQ-fitted
/// kernel criteria the sequence is nondecreasing; for CE/MSE it records the
/// (minimized) risk with no monotonicity guarantee.
struct FitTrace {
    std::vector<double> objective_per_iter;
    bool converged = false;
    std::size_t iters_used = 0;
};

inline std::vector<double> predict_probs(const Matrix& X, const std::vector<double>& w) {
    if (X.cols != w.size()) throw InvalidInput("predict_probs: dimension mismatch");
    std::vector<double> p(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) p[i] = sigmoid(dot(X.row(i), w.data(), X.cols));
    return p;
}

namespace detail {

// -exp(-(e_i - c_j)^2 / (2 sigma^2)) for every sample/word pair; the
// restricted triple generalized to an arbitrary codebook.
inline Matrix aux_matrix(const std::vector<double>& errors, const std::vector<double>& words,
                         double sigma) {
    const double inv = 1.0 / (2.0 * sigma * sigma);
    Matrix aux(errors.size(), words.size());
    for (std::size_t i = 0; i < errors.size(); ++i)
        for (std::size_t j = 0; j < words.size(); ++j) {
            const double d = errors[i] - words[j];
            aux(i, j) = -std::exp(-d * d * inv);
        }
    return aux;
}

inline double weighted_quadratic(const PredictionBatch& b, const Matrix& aux,
                                 const std::vector<double>& words,
                                 const std::vector<double>& weights) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
        for (std::size_t j = 0; j < words.size(); ++j) {
            const double d = b.errors[i] - words[j];
            acc += weights[j] * aux(i, j) * d * d;
        }
    return acc;
}

inline std::vector<double> weighted_quadratic_gradient(const Matrix& X, const PredictionBatch& b,
                                                       const Matrix& aux,
                                                       const std::vector<double>& words,
                                                       const std::vector<double>& weights) {
    std::vector<double> grad(X.cols, 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) {
        double bracket = 0.0;
        for (std::size_t j = 0; j < words.size(); ++j)
            bracket += weights[j] * aux(i, j) * (b.errors[i] - words[j]);
        const double coeff = -2.0 * bracket * b.probs[i] * (1.0 - b.probs[i]);
        const double* x = X.row(i);
        for (std::size_t k = 0; k < X.cols; ++k) grad[k] += coeff * x[k];
    }
    return grad;
}

inline PredictionBatch batch_at(const Matrix& X, const std::vector<int>& targets,
                                const std::vector<double>& w) {
    PredictionBatch b;
    b.probs = predict_probs(X, w);
    b.errors.resize(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!std::isfinite(b.probs[i])) throw NumericError("fit: non-finite prediction");
        b.errors[i] = static_cast<double>(targets[i]) - b.probs[i];
    }
    b.targets = targets;
    return b;
}

// Kernel objective of the effective spec at the current predictions.
inline double kernel_objective(const PredictionBatch& b, const CriterionSpec& spec) {
    if (spec.kind == Criterion::QMEE) return qmee_objective(b, spec);
    return rmee_objective(b, spec);
}

struct Phase {
    std::vector<double> w;
    PredictionBatch batch;
    double jr2 = 0.0;
    double outer = 0.0;
};

inline Phase run_inner_phase(const Matrix& X, const std::vector<int>& targets,
                             const std::vector<double>& w0, const Matrix& aux,
                             const std::vector<double>& words, const std::vector<double>& weights,
                             const CriterionSpec& spec, const FitConfig& cfg, double lr) {
    Phase ph;
    ph.w = w0;
    AdamParams adam = cfg.adam;
    adam.learning_rate = lr;
    AdamState state(ph.w.size());
    for (std::size_t step = 0; step < cfg.inner_steps; ++step) {
        const PredictionBatch b = batch_at(X, targets, ph.w);
        const std::vector<double> grad = weighted_quadratic_gradient(X, b, aux, words, weights);
        adam_step(ph.w, grad, state, adam);
    }
    ph.batch = batch_at(X, targets, ph.w);
    ph.jr2 = weighted_quadratic(ph.batch, aux, words, weights);
    ph.outer = kernel_objective(ph.batch, spec);
    if (!std::isfinite(ph.jr2) || !std::isfinite(ph.outer))
        throw NumericError("hq_fit: non-finite objective");
    return ph;
}

inline CriterionSpec effective_spec(const CriterionSpec& spec, std::size_t n) {
    CriterionSpec out = spec;
    if (spec.kind == Criterion::CLoss) out.phi = Phi{static_cast<double>(n), 0.0, 0.0};
    return out;
}

}  // namespace detail

/// Half-quadratic alternating maximization over an explicit feature matrix
/// (criterion kinds CLoss, RMEE, QMEE). Each outer iteration fixes the
/// codebook and auxiliaries at the current errors, runs inner_steps Adam
/// ascent steps on the quadratic bound, and re-evaluates the kernel
/// objective. A phase whose bound or objective would decrease is retried
/// with a halved step size (five times at most, then the best admissible
/// candidate is kept), so the recorded objective never decreases. Stops when
/// the objective improves by less than varsigma.
inline FitTrace hq_fit_features(const Matrix& X, const std::vector<int>& targets,
                                const CriterionSpec& spec, const FitConfig& cfg,
                                std::vector<double>& w) {
    if (spec.kind == Criterion::CE || spec.kind == Criterion::MSE)
        throw InvalidParameter("hq_fit: criterion must be CLoss, RMEE, or QMEE");
    if (X.rows == 0) throw InvalidInput("hq_fit: empty dataset");
    if (w.empty()) w.assign(X.cols, 0.0);
    if (w.size() != X.cols) throw InvalidInput("hq_fit: weight dimension mismatch");

    const CriterionSpec espec = detail::effective_spec(spec, X.rows);
    if (espec.kind != Criterion::QMEE && !espec.phi.valid())
        throw InvalidParameter("hq_fit: invalid phi weights");

    FitTrace trace;
    PredictionBatch batch = detail::batch_at(X, targets, w);
    double obj_prev = detail::kernel_objective(batch, espec);
    if (!std::isfinite(obj_prev)) throw NumericError("hq_fit: non-finite initial objective");

    for (std::size_t k = 0; k < cfg.max_outer_iters; ++k) {
        std::vector<double> words;
        std::vector<double> weights;
        if (espec.kind == Criterion::QMEE) {
            const auto [book, assignment] =
                quantize(batch.errors, QuantizerConfig(espec.quantizer_epsilon));
            words = book.words;
            weights.assign(book.counts.begin(), book.counts.end());
        } else {
            words = {0.0, -1.0, 1.0};
            weights = {espec.phi.at0, espec.phi.atNeg1, espec.phi.atPos1};
        }
        const Matrix aux = detail::aux_matrix(batch.errors, words, espec.sigma);
        const double jr2_start = detail::weighted_quadratic(batch, aux, words, weights);

        bool accepted = false;
        detail::Phase best;
        best.w = w;
        best.outer = obj_prev;
        double lr = cfg.adam.learning_rate;
        for (int attempt = 0; attempt < 6 && !accepted; ++attempt, lr *= 0.5) {
            detail::Phase ph =
                detail::run_inner_phase(X, targets, w, aux, words, weights, espec, cfg, lr);
            if (ph.jr2 >= jr2_start && ph.outer >= obj_prev) {
                best = std::move(ph);
                accepted = true;
            } else if (ph.outer > best.outer) {
                best = std::move(ph);  // admissible fallback, still nondecreasing
            }
        }
        double obj = obj_prev;
        if (accepted || best.outer > obj_prev) {
            w = std::move(best.w);
            if (!best.batch.targets.empty()) batch = std::move(best.batch);
            obj = best.outer;
        }
        trace.objective_per_iter.push_back(obj);
        const double diff = obj - obj_prev;
        obj_prev = obj;
        trace.iters_used = k + 1;
        if (diff < cfg.varsigma) {
            trace.converged = true;
            break;
        }
    }
    return trace;
}

/// Plain Adam minimization for the analytic criteria (CE and MSE). The trace
/// records the risk after each block of inner_steps updates; convergence is
/// an absolute risk difference below varsigma.
inline FitTrace plain_fit_features(const Matrix& X, const std::vector<int>& targets, Criterion kind,
                                   const FitConfig& cfg, std::vector<double>& w) {
    if (kind != Criterion::CE && kind != Criterion::MSE)
        throw InvalidParameter("plain_fit: criterion must be CE or MSE");
    if (X.rows == 0) throw InvalidInput("plain_fit: empty dataset");
    if (w.empty()) w.assign(X.cols, 0.0);
    if (w.size() != X.cols) throw InvalidInput("plain_fit: weight dimension mismatch");

    const double n = static_cast<double>(X.rows);
    auto risk = [&](const PredictionBatch& b) {
        return kind == Criterion::CE ? ce_risk(b) : mse_risk(b);
    };
    auto gradient = [&](const PredictionBatch& b) {
        // Ascent direction on the negated risk.
        std::vector<double> g(X.cols, 0.0);
        for (std::size_t i = 0; i < b.size(); ++i) {
            const double y = b.probs[i];
            const double resid = y - static_cast<double>(b.targets[i]);
            const double coeff =
                kind == Criterion::CE ? -resid : -(2.0 / n) * resid * y * (1.0 - y);
            const double* x = X.row(i);
            for (std::size_t k = 0; k < X.cols; ++k) g[k] += coeff * x[k];
        }
        return g;
    };

    FitTrace trace;
    AdamState state(w.size());
    double risk_prev = risk(detail::batch_at(X, targets, w));
    std::size_t quiet_blocks = 0;
    for (std::size_t k = 0; k < cfg.max_outer_iters; ++k) {
        for (std::size_t step = 0; step < cfg.inner_steps; ++step)
            adam_step(w, gradient(detail::batch_at(X, targets, w)), state, cfg.adam);
        const double r = risk(detail::batch_at(X, targets, w));
        if (!std::isfinite(r)) throw NumericError("plain_fit: non-finite risk");
        trace.objective_per_iter.push_back(r);
        trace.iters_used = k + 1;
        // A single small |diff| can be an Adam oscillation crossing itself;
        // require a quiet stretch before stopping.
        quiet_blocks = std::abs(r - risk_prev) < cfg.varsigma ? quiet_blocks + 1 : 0;
        risk_prev = r;
        if (quiet_blocks >= 3) {
            trace.converged = true;
            break;
        }
    }
    return trace;
}

/// Interval counts of an error sample: (-0.5,0.5) toward the center peak,
/// (-1,-0.5) and (0.5,1) toward the outlier peaks. Errors exactly at +-0.5
/// count toward the center.
inline Phi count_phi(const ErrorSample& errors) {
    Phi phi;
    for (double e : errors) {
        if (e > 0.5)
            phi.atPos1 += 1.0;
        else if (e < -0.5)
            phi.atNeg1 += 1.0;
        else
            phi.at0 += 1.0;
    }
    return phi;
}

/// Two-stage weight estimation: fit with the C-Loss weights (N,0,0), then
/// count the resulting training errors per peak interval.
inline Phi estimate_phi_features(const Matrix& X, const std::vector<int>& targets,
                                 const FitConfig& cfg) {
    CriterionSpec stage1;
    stage1.kind = Criterion::CLoss;
    stage1.sigma = cfg.sigma;
    std::vector<double> w;
    hq_fit_features(X, targets, stage1, cfg, w);
    return count_phi(detail::batch_at(X, targets, w).errors);
}

struct RmeeFitResult {
    std::vector<double> weights;
    Phi phi;
    FitTrace trace;  // second-stage trace
};

/// The full RMEE procedure: fit with the C-Loss weights (N,0,0), count the
/// per-peak error proportions, then continue training the same parameters
/// with the estimated weights. One refinement round. The warm start matters:
/// after stage one the outlier errors already sit near the +-1 peaks, so the
/// refitted peak mass attaches to them rather than to arbitrary samples.
inline RmeeFitResult fit_rmee_full_features(const Matrix& X, const std::vector<int>& targets,
                                            const FitConfig& cfg) {
    RmeeFitResult out;
    CriterionSpec stage1;
    stage1.kind = Criterion::CLoss;
    stage1.sigma = cfg.sigma;
    hq_fit_features(X, targets, stage1, cfg, out.weights);
    out.phi = count_phi(detail::batch_at(X, targets, out.weights).errors);

    CriterionSpec stage2;
    stage2.kind = Criterion::RMEE;
    stage2.sigma = cfg.sigma;
    stage2.phi = out.phi;
    out.trace = hq_fit_features(X, targets, stage2, cfg, out.weights);
    return out;
}

// ---------------------------------------------------------------------------
// Model-level wrappers.

inline std::pair<LogisticModel, FitTrace> hq_fit(const LabeledDataset& ds,
                                                 const CriterionSpec& spec, const FitConfig& cfg) {
    const Matrix X = augment_bias(ds.features);
    LogisticModel m;
    FitTrace trace = hq_fit_features(X, ds.labels, spec, cfg, m.weights);
    return {std::move(m), std::move(trace)};
}

inline FitTrace hq_fit(ElmModel& m, const LabeledDataset& ds, const CriterionSpec& spec,
                       const FitConfig& cfg) {
    const Matrix H = elm_feature_matrix(m, ds.features);
    return hq_fit_features(H, ds.labels, spec, cfg, m.output_weights);
}

inline Phi estimate_phi(const LabeledDataset& ds, const FitConfig& cfg) {
    return estimate_phi_features(augment_bias(ds.features), ds.labels, cfg);
}

inline Phi estimate_phi(const ElmModel& m, const LabeledDataset& ds, const FitConfig& cfg) {
    return estimate_phi_features(elm_feature_matrix(m, ds.features), ds.labels, cfg);
}

inline std::pair<LogisticModel, RmeeFitResult> fit_rmee_full(const LabeledDataset& ds,
                                                             const FitConfig& cfg) {
    RmeeFitResult res = fit_rmee_full_features(augment_bias(ds.features), ds.labels, cfg);
    LogisticModel m;
    m.weights = res.weights;
    return {std::move(m), std::move(res)};
}

inline RmeeFitResult fit_rmee_full(ElmModel& m, const LabeledDataset& ds, const FitConfig& cfg) {
    RmeeFitResult res = fit_rmee_full_features(elm_feature_matrix(m, ds.features), ds.labels, cfg);
    m.output_weights = res.weights;
    return res;
}

/// Fits one criterion end to end on a feature matrix. RMEE runs the full
/// two-stage procedure; CLoss/QMEE a single HQ fit; CE/MSE plain Adam.
inline FitTrace fit_criterion_features(const Matrix& X, const std::vector<int>& targets,
                                       Criterion kind, double sigma, double quantizer_epsilon,
                                       const FitConfig& cfg, std::vector<double>& w,
                                       Phi* phi_used = nullptr) {
    if (kind == Criterion::CE || kind == Criterion::MSE)
        return plain_fit_features(X, targets, kind, cfg, w);
    if (kind == Criterion::RMEE) {
        FitConfig c = cfg;
        c.sigma = sigma;
        RmeeFitResult res = fit_rmee_full_features(X, targets, c);
        w = std::move(res.weights);
        if (phi_used) *phi_used = res.phi;
        return res.trace;
    }
    CriterionSpec spec;
    spec.kind = kind;
    spec.sigma = sigma;
    spec.quantizer_epsilon = quantizer_epsilon;
    return hq_fit_features(X, targets, spec, cfg, w);
}

/// Stratified k-fold partition: each class is shuffled and dealt round-robin,
/// so every index lands in exactly one fold and class ratios stay balanced.
inline std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& labels,
                                                              std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    if (by_class[0].size() < k || by_class[1].size() < k)
        throw InvalidInput("stratified_folds: need at least k samples per class");

    Rng shuffle_rng(Rng::derive(seed, 0x5f01d));
    std::vector<std::vector<std::size_t>> folds(k);
    for (auto& cls : by_class) {
        const std::vector<std::size_t> order = shuffle_rng.choose(cls.size(), cls.size());
        for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(cls[order[i]]);
    }
    return folds;
}

/// Stratified five-fold cross-validation over candidate bandwidths; returns
/// the candidate with the highest mean validation accuracy of the full RMEE
/// fit, preferring the smaller sigma on ties.
inline double cross_validate_sigma(const LabeledDataset& ds, std::vector<double> candidates,
                                   const FitConfig& cfg, ModelKind kind = ModelKind::Logistic,
                                   std::size_t hidden = 50) {
    if (candidates.empty()) throw InvalidParameter("cross_validate_sigma: empty candidate list");
    constexpr std::size_t kFolds = 5;
    const std::vector<std::vector<std::size_t>> folds =
        stratified_folds(ds.labels, kFolds, cfg.seed);

    auto subset = [&](const std::vector<std::size_t>& idx) {
        LabeledDataset out;
        out.features = Matrix(idx.size(), ds.dim());
        out.labels.resize(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            for (std::size_t j = 0; j < ds.dim(); ++j) out.features(r, j) = ds.features(idx[r], j);
            out.labels[r] = ds.labels[idx[r]];
        }
        return out;
    };

    std::sort(candidates.begin(), candidates.end());
    double best_sigma = candidates.front();
    double best_acc = -1.0;
    for (double sigma : candidates) {
        double acc_sum = 0.0;
        for (std::size_t f = 0; f < kFolds; ++f) {
            std::vector<std::size_t> train_idx;
            for (std::size_t g = 0; g < kFolds; ++g)
                if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
            const LabeledDataset train = subset(train_idx);
            const LabeledDataset val = subset(folds[f]);

            FitConfig c = cfg;
            c.sigma = sigma;
            std::vector<double> probs;
            if (kind == ModelKind::Elm) {
                Rng elm_rng(Rng::derive(cfg.seed, 0xe1a0 + f));
                ElmModel m = elm_init(ds.dim(), hidden, elm_rng);
                fit_rmee_full(m, train, c);
                probs = model_probs(m, val.features);
            } else {
                auto [m, res] = fit_rmee_full(train, c);
                probs = model_probs(m, val.features);
            }
            std::size_t hits = 0;
            for (std::size_t i = 0; i < val.size(); ++i)
                hits += static_cast<std::size_t>((probs[i] > 0.5 ? 1 : 0) == val.labels[i]);
            acc_sum += static_cast<double>(hits) / static_cast<double>(val.size());
        }
        const double mean_acc = acc_sum / static_cast<double>(kFolds);
        if (mean_acc > best_acc) {
            best_acc = mean_acc;
            best_sigma = sigma;
        }
    }
    return best_sigma;
}

}  // namespace rmee
