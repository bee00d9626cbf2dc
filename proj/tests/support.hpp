#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "rmee/core.hpp"
#include "rmee/kernel_density.hpp"

namespace testsupport {

/// Composite Simpson quadrature; panels is rounded up to an even count.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      std::size_t panels) {
    if (panels % 2 != 0) ++panels;
    const double h = (b - a) / static_cast<double>(panels);
    double acc = f(a) + f(b);
    for (std::size_t i = 1; i < panels; ++i)
        acc += f(a + h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

/// Integral of the analytic error density over (-1,1), computed with the
/// logit substitution so the near-zero spikes become smooth Gaussians. Each
/// class term is integrated on its own transformed axis.
inline double integrate_theoretical_pdf(const rmee::ClassGaussianParams& g,
                                        std::size_t panels = 8192) {
    auto side = [&](double mu, double var, bool class1) {
        const double half = 12.0 * std::sqrt(var);
        auto integrand = [&](double x) {
            const double y = rmee::sigmoid(x);
            const double e = class1 ? rmee::sigmoid(-x) : -y;
            return rmee::theoretical_error_pdf(e, g) * y * (1.0 - y);
        };
        return simpson(integrand, mu - half, mu + half, panels);
    };
    return side(g.mu1, g.var1, true) + side(g.mu0, g.var0, false);
}

/// Central finite-difference gradient of a scalar function of a weight
/// vector.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> w, double step = 1e-6) {
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double keep = w[i];
        w[i] = keep + step;
        const double hi = f(w);
        w[i] = keep - step;
        const double lo = f(w);
        w[i] = keep;
        g[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

}  // namespace testsupport
