#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>

#include "rmee/core.hpp"

namespace rmee {

/// Gaussian kernel bandwidth.
struct KernelParams {
    double sigma;

    explicit KernelParams(double s) : sigma(s) {
        if (!(s > 0.0)) throw InvalidParameter("KernelParams: sigma must be positive");
    }
};

/// A sample of prediction errors e_i = t_i - y_i. For {0,1}-coded
/// regression-like classifiers every value lies in (-1, 1).
using ErrorSample = std::vector<double>;

/// Projected class-conditional Gaussian parameters: means and variances of
/// w'X given the class, plus the class-1 prior.
struct ClassGaussianParams {
    double mu0;
    double mu1;
    double var0;
    double var1;
    double p;  // prior of class 1

    ClassGaussianParams(double m0, double m1, double v0, double v1, double prior)
        : mu0(m0), mu1(m1), var0(v0), var1(v1), p(prior) {
        if (!(v0 > 0.0) || !(v1 > 0.0))
            throw InvalidParameter("ClassGaussianParams: variances must be positive");
        if (!(prior >= 0.0 && prior <= 1.0))
            throw InvalidParameter("ClassGaussianParams: prior must lie in [0,1]");
    }
};

/// Gaussian kernel exp(-x^2 / (2 sigma^2)) / (sqrt(2 pi) sigma).
inline double gaussian_kernel(double x, const KernelParams& k) {
    const double s = k.sigma;
    return std::exp(-x * x / (2.0 * s * s)) / (std::sqrt(2.0 * M_PI) * s);
}

/// Parzen window density estimate at e from the error sample.
inline double parzen_pdf(double e, const ErrorSample& errs, const KernelParams& k) {
    if (errs.empty()) throw InvalidInput("parzen_pdf: empty error sample");
    double acc = 0.0;
    for (double ej : errs) acc += gaussian_kernel(e - ej, k);
    return acc / static_cast<double>(errs.size());
}

/// Empirical quadratic information potential: the full double kernel sum
/// (1/N^2) sum_i sum_j kappa(e_i - e_j).
inline double quadratic_information_potential(const ErrorSample& errs, const KernelParams& k) {
    if (errs.empty()) throw InvalidInput("quadratic_information_potential: empty error sample");
    const std::size_t n = errs.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) acc += gaussian_kernel(errs[i] - errs[j], k);
    return acc / (static_cast<double>(n) * static_cast<double>(n));
}

/// Renyi quadratic entropy of the error sample, -log of the potential.
inline double renyi_quadratic_entropy(const ErrorSample& errs, const KernelParams& k) {
    return -std::log(quadratic_information_potential(errs, k));
}

/// Silverman's rule-of-thumb bandwidth 1.06 s N^(-1/5), with s the sample
/// standard deviation.
inline double silverman_bandwidth(const ErrorSample& errs) {
    const std::size_t n = errs.size();
    if (n < 2) throw InvalidInput("silverman_bandwidth: need at least 2 samples");
    const double mean = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double e : errs) ss += (e - mean) * (e - mean);
    const double s = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(s > 0.0)) throw InvalidInput("silverman_bandwidth: zero-variance sample");
    return 1.06 * s * std::pow(static_cast<double>(n), -0.2);
}

namespace detail {
inline double gauss_pdf(double x, double mu, double var) {
    return std::exp(-(x - mu) * (x - mu) / (2.0 * var)) / std::sqrt(2.0 * M_PI * var);
}
}  // namespace detail

/// Analytic error density of a sigmoid classifier whose projected
/// class-conditional inputs are Gaussian. The class-1 mass lives on e in
/// (0,1) via y = 1-e, the class-0 mass on (-1,0) via y = -e; each term is the
/// projected Gaussian pushed through the logit change of variables, so the
/// Jacobian 1/(y(1-y)) appears. Zero outside (-1,1), and a term vanishes
/// wherever its log argument leaves the support.
inline double theoretical_error_pdf(double e, const ClassGaussianParams& g) {
    if (!(e > -1.0 && e < 1.0)) return 0.0;
    double val = 0.0;
    if (e > 0.0 && e < 1.0) {
        const double y = 1.0 - e;             // class-1 prediction
        const double arg = std::log(y / e);   // logit of y
        val += g.p * detail::gauss_pdf(arg, g.mu1, g.var1) / (y * e);
    }
    if (e > -1.0 && e < 0.0) {
        const double y = -e;                  // class-0 prediction
        const double arg = std::log(y / (1.0 + e));
        val += (1.0 - g.p) * detail::gauss_pdf(arg, g.mu0, g.var0) / (y * (1.0 + e));
    }
    return val;
}

}  // namespace rmee
