#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rmee/criteria.hpp"

using namespace rmee;
using Catch::Approx;

namespace {

PredictionBatch random_batch(Rng& rng, std::size_t n) {
    std::vector<int> t(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rng.below(2) == 1 ? 1 : 0;
        y[i] = rng.uniform(0.001, 0.999);
    }
    return make_batch(std::move(t), std::move(y));
}

}  // namespace

TEST_CASE("batch construction") {
    const PredictionBatch b = make_batch({1, 0}, {0.8, 0.3});
    CHECK(b.errors[0] == Approx(0.2).epsilon(1e-15));
    CHECK(b.errors[1] == Approx(-0.3).epsilon(1e-15));
    CHECK_THROWS_AS(make_batch({1}, {0.5, 0.5}), InvalidInput);
    CHECK_THROWS_AS(make_batch({2}, {0.5}), InvalidInput);
}

TEST_CASE("cross-entropy risk") {
    CHECK(ce_risk(make_batch({1}, {0.5})) == Approx(0.6931471805599453).epsilon(1e-12));
    CHECK(ce_risk(make_batch({1, 0}, {0.9, 0.2})) == Approx(0.3285040669720361).epsilon(1e-12));
    CHECK(ce_risk(make_batch({1}, {1.0 - 1e-15})) == Approx(0.0).margin(1e-9));

    // Clamp keeps the saturated case finite.
    const double worst = ce_risk(make_batch({1}, {1e-300}));
    CHECK(std::isfinite(worst));
    CHECK(worst == Approx(-std::log(1e-12)).epsilon(1e-9));
}

TEST_CASE("mse risk") {
    CHECK(mse_risk(make_batch({1, 0}, {1.0 - 1e-16, 1e-16})) == Approx(0.0).margin(1e-12));
    CHECK(mse_risk(make_batch({1, 0}, {1e-12, 1.0 - 1e-12})) == Approx(1.0).margin(1e-9));
    PredictionBatch b;
    b.targets = {1, 0};
    b.probs = {0.5, 0.1};
    b.errors = {0.5, -0.1};
    CHECK(mse_risk(b) == Approx(0.13).epsilon(1e-14));
}

TEST_CASE("risks improve as predictions move toward targets") {
    Rng rng(5150);
    for (int trial = 0; trial < 30; ++trial) {
        PredictionBatch b = random_batch(rng, 2 + rng.below(20));
        const std::size_t i = rng.below(b.size());
        PredictionBatch moved = b;
        moved.probs[i] += 0.2 * (static_cast<double>(b.targets[i]) - b.probs[i]);
        moved.errors[i] = static_cast<double>(moved.targets[i]) - moved.probs[i];
        CHECK(ce_risk(moved) < ce_risk(b));
        CHECK(mse_risk(moved) < mse_risk(b));
    }
}

TEST_CASE("rmee objective closed forms") {
    const std::size_t n = 7;
    PredictionBatch zero_err;
    zero_err.targets.assign(n, 1);
    zero_err.probs.assign(n, 1.0);  // formal: errors are what matters here
    zero_err.errors.assign(n, 0.0);

    CriterionSpec spec;
    spec.kind = Criterion::RMEE;
    spec.sigma = 1.0;

    spec.phi = Phi{static_cast<double>(n), 0.0, 0.0};
    CHECK(rmee_objective(zero_err, spec) == Approx(0.3989422804014327).epsilon(1e-12));

    spec.phi = Phi{0.0, static_cast<double>(n), 0.0};
    CHECK(rmee_objective(zero_err, spec) == Approx(0.2419707245191434).epsilon(1e-12));

    spec.phi = Phi{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(rmee_objective(zero_err, spec), InvalidParameter);
    spec.phi = Phi{-1.0, 1.0, 0.0};
    CHECK_THROWS_AS(rmee_objective(zero_err, spec), InvalidParameter);
}

TEST_CASE("rmee with all weight at zero equals the c-loss kernel mean") {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const PredictionBatch b = random_batch(rng, 1 + rng.below(50));
        const double sigma = rng.uniform(0.1, 1.5);
        CriterionSpec spec;
        spec.kind = Criterion::CLoss;
        spec.sigma = sigma;
        spec.phi = Phi{static_cast<double>(b.size()), 0.0, 0.0};

        const KernelParams k(sigma);
        double mean_kernel = 0.0;
        for (double e : b.errors) mean_kernel += gaussian_kernel(e, k);
        mean_kernel /= static_cast<double>(b.size());
        CHECK(rmee_objective(b, spec) == Approx(mean_kernel).epsilon(1e-13));
    }
}

TEST_CASE("qmee objective degeneracies") {
    CriterionSpec spec;
    spec.kind = Criterion::QMEE;
    spec.sigma = 1.0;

    // All errors equal: a single word at distance zero.
    PredictionBatch flat;
    flat.targets.assign(5, 0);
    flat.probs.assign(5, 0.25);
    flat.errors.assign(5, -0.25);
    spec.quantizer_epsilon = 0.05;
    CHECK(qmee_objective(flat, spec) == Approx(0.3989422804014327).epsilon(1e-12));

    // Epsilon 0 with distinct errors reproduces the full MEE double sum.
    Rng rng(88);
    for (int trial = 0; trial < 20; ++trial) {
        const PredictionBatch b = random_batch(rng, 2 + rng.below(40));
        spec.sigma = rng.uniform(0.1, 1.2);
        spec.quantizer_epsilon = 0.0;
        CHECK(qmee_objective(b, spec) ==
              Approx(quadratic_information_potential(b.errors, KernelParams(spec.sigma)))
                  .epsilon(1e-12));
    }

    // One word at 0 holding both samples.
    PredictionBatch two;
    two.targets = {0, 1};
    two.probs = {0.0, 0.0};
    two.errors = {0.0, 1.0};
    spec.sigma = 1.0;
    spec.quantizer_epsilon = 2.0;  // threshold 2 swallows everything
    const KernelParams unit(1.0);
    const double expected = 0.25 * 2.0 * (gaussian_kernel(0.0, unit) + gaussian_kernel(1.0, unit));
    CHECK(qmee_objective(two, spec) == Approx(expected).epsilon(1e-12));
    CHECK(expected == Approx(0.3204565024602880).epsilon(1e-12));
}

TEST_CASE("kernel objectives are bounded by the kernel peak") {
    Rng rng(4096);
    for (int trial = 0; trial < 30; ++trial) {
        const PredictionBatch b = random_batch(rng, 1 + rng.below(60));
        const double sigma = rng.uniform(0.1, 1.5);
        const double peak = gaussian_kernel(0.0, KernelParams(sigma));
        const double n = static_cast<double>(b.size());

        CriterionSpec rspec;
        rspec.kind = Criterion::RMEE;
        rspec.sigma = sigma;
        const double f0 = std::floor(rng.uniform(0.0, n));
        const double f1 = std::floor(rng.uniform(0.0, n - f0 + 1.0));
        rspec.phi = Phi{f0, f1, n - f0 - f1};
        if (!rspec.phi.valid()) continue;
        const double robj = rmee_objective(b, rspec);
        CHECK(robj > 0.0);
        CHECK(robj <= peak + 1e-12);

        CriterionSpec qspec;
        qspec.kind = Criterion::QMEE;
        qspec.sigma = sigma;
        qspec.quantizer_epsilon = rng.uniform(0.0, 0.2);
        const double qobj = qmee_objective(b, qspec);
        CHECK(qobj > 0.0);
        CHECK(qobj <= peak + 1e-12);
    }
}

TEST_CASE("inner-product similarity") {
    const KernelParams k(0.6);

    PredictionBatch zero_err;
    zero_err.targets.assign(4, 1);
    zero_err.probs.assign(4, 1.0);
    zero_err.errors.assign(4, 0.0);
    CHECK(inner_product_similarity(zero_err, {1.0, 0.0, 0.0}, k) ==
          Approx(gaussian_kernel(0.0, k)).epsilon(1e-13));

    PredictionBatch neg;
    neg.targets.assign(3, 0);
    neg.probs.assign(3, 1.0);
    neg.errors.assign(3, -1.0);
    CHECK(inner_product_similarity(neg, {0.0, 1.0, 0.0}, k) ==
          Approx(gaussian_kernel(0.0, k)).epsilon(1e-13));

    CHECK_THROWS_AS(inner_product_similarity(neg, {0.5, 0.2, 0.2}, k), InvalidParameter);
    CHECK_THROWS_AS(inner_product_similarity(neg, {1.5, -0.5, 0.0}, k), InvalidParameter);
}

TEST_CASE("similarity matches the restricted objective under the count scaling") {
    Rng rng(321);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 4 + rng.below(40);
        const PredictionBatch b = random_batch(rng, n);
        const double sigma = rng.uniform(0.2, 1.0);

        // Integral counts phi = N * zeta.
        const std::size_t c0 = rng.below(n + 1);
        const std::size_t c1 = rng.below(n - c0 + 1);
        const std::size_t c2 = n - c0 - c1;
        if (c0 + c1 + c2 == 0) continue;
        const std::array<double, 3> zeta{static_cast<double>(c0) / static_cast<double>(n),
                                         static_cast<double>(c1) / static_cast<double>(n),
                                         static_cast<double>(c2) / static_cast<double>(n)};
        CriterionSpec spec;
        spec.kind = Criterion::RMEE;
        spec.sigma = sigma;
        spec.phi = Phi{static_cast<double>(c0), static_cast<double>(c1), static_cast<double>(c2)};

        const double ips = inner_product_similarity(b, zeta, KernelParams(sigma));
        CHECK(ips == Approx(rmee_objective(b, spec)).epsilon(1e-12));
    }
}
