#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rmee/bench.hpp"
#include "rmee/hq_optimizer.hpp"
#include "support.hpp"

using namespace rmee;
using Catch::Approx;

namespace {

// Two well-separated Gaussian blobs along (1,1); margin around 2 * offset.
LabeledDataset separable_toy(std::size_t n, Rng& rng, double offset = 2.0) {
    LabeledDataset ds;
    ds.features = Matrix(n, 2);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int t = i % 2;
        const double sgn = t == 1 ? 1.0 : -1.0;
        ds.features(i, 0) = sgn * offset + 0.3 * rng.gaussian();
        ds.features(i, 1) = sgn * offset + 0.3 * rng.gaussian();
        ds.labels[i] = t;
    }
    return ds;
}

PredictionBatch random_batch(Rng& rng, std::size_t n) {
    std::vector<int> t(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rng.below(2) == 1 ? 1 : 0;
        y[i] = rng.uniform(0.02, 0.98);
    }
    return make_batch(std::move(t), std::move(y));
}

Phi random_phi(Rng& rng, std::size_t n) {
    const double f0 = std::floor(rng.uniform(0.0, static_cast<double>(n) + 1.0));
    const double f1 = std::floor(rng.uniform(0.0, static_cast<double>(n) - f0 + 1.0));
    Phi phi{f0, f1, static_cast<double>(n) - f0 - f1};
    if (!phi.valid()) phi = Phi{static_cast<double>(n), 0.0, 0.0};
    return phi;
}

}  // namespace

TEST_CASE("auxiliary closed form") {
    const HQAux a0 = hq_aux_update({0.0}, 0.7);
    CHECK(a0.u[0] == -1.0);

    const HQAux am = hq_aux_update({-1.0}, 0.3);
    CHECK(am.v[0] == -1.0);

    const HQAux a1 = hq_aux_update({1.0}, 1.0);
    CHECK(a1.u[0] == Approx(-0.6065306597126334).epsilon(1e-12));
    CHECK(a1.s[0] == -1.0);

    CHECK_THROWS_AS(hq_aux_update({0.0}, 0.0), InvalidParameter);
}

TEST_CASE("auxiliaries stay in [-1, 0)") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        ErrorSample errs(1 + rng.below(50));
        for (double& e : errs) e = rng.uniform(-1.0, 1.0);
        const HQAux aux = hq_aux_update(errs, rng.uniform(0.05, 2.0));
        for (const auto* seq : {&aux.u, &aux.v, &aux.s})
            for (double a : *seq) {
                CHECK(a >= -1.0);
                CHECK(a < 0.0);
            }
    }
}

TEST_CASE("conjugate bound supremum recovers the kernel term") {
    // phi-weighted sum of [a (.)^2/(2 s^2) - g(a)] at the optimal auxiliaries
    // equals the phi-weighted sum of exp(-(.)^2/(2 s^2)).
    Rng rng(606);
    auto g = [](double v) { return -v * std::log(-v) + v; };
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 1 + rng.below(30);
        ErrorSample errs(n);
        for (double& e : errs) e = rng.uniform(-0.999, 0.999);
        const double sigma = rng.uniform(0.1, 1.5);
        const Phi phi = random_phi(rng, n);
        const HQAux aux = hq_aux_update(errs, sigma);

        const double inv = 1.0 / (2.0 * sigma * sigma);
        double bound = 0.0, kernels = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = errs[i];
            bound += phi.at0 * (aux.u[i] * e * e * inv - g(aux.u[i]));
            bound += phi.atNeg1 * (aux.v[i] * (e + 1.0) * (e + 1.0) * inv - g(aux.v[i]));
            bound += phi.atPos1 * (aux.s[i] * (e - 1.0) * (e - 1.0) * inv - g(aux.s[i]));
            kernels += phi.at0 * std::exp(-e * e * inv) +
                       phi.atNeg1 * std::exp(-(e + 1.0) * (e + 1.0) * inv) +
                       phi.atPos1 * std::exp(-(e - 1.0) * (e - 1.0) * inv);
        }
        CHECK(bound == Approx(kernels).epsilon(1e-12));
    }
}

TEST_CASE("inner objective values") {
    PredictionBatch perfect;
    perfect.targets.assign(6, 1);
    perfect.probs.assign(6, 1.0);
    perfect.errors.assign(6, 0.0);
    const HQAux aux0 = hq_aux_update(perfect.errors, 0.5);
    CHECK(jr2_objective(perfect, aux0, Phi{6.0, 0.0, 0.0}) == 0.0);

    const PredictionBatch single = make_batch({1}, {0.5});
    const HQAux aux = hq_aux_update(single.errors, 1.0);
    CHECK(aux.u[0] == Approx(-0.8824969025845954).epsilon(1e-12));
    CHECK(jr2_objective(single, aux, Phi{1.0, 0.0, 0.0}) ==
          Approx(-0.2206242256461489).epsilon(1e-12));

    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const PredictionBatch b = random_batch(rng, 1 + rng.below(30));
        const HQAux a = hq_aux_update(b.errors, rng.uniform(0.1, 1.0));
        CHECK(jr2_objective(b, a, random_phi(rng, b.size())) <= 0.0);
    }
}

TEST_CASE("inner gradient matches finite differences on both backends") {
    Rng rng(117);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 2 + rng.below(19);
        const std::size_t d = 1 + rng.below(5);
        const bool use_elm = trial % 2 == 1;

        Matrix raw(n, d);
        std::vector<int> targets(n);
        for (std::size_t i = 0; i < n; ++i) {
            targets[i] = rng.below(2) == 1 ? 1 : 0;
            for (std::size_t j = 0; j < d; ++j) raw(i, j) = rng.gaussian();
        }
        Matrix X;
        if (use_elm) {
            ElmModel elm = elm_init(d, 3 + rng.below(4), rng);
            X = elm_feature_matrix(elm, raw);
        } else {
            X = augment_bias(raw);
        }

        std::vector<double> w(X.cols);
        for (double& wi : w) wi = 0.5 * rng.gaussian();
        const double sigma = rng.uniform(0.2, 1.0);
        const Phi phi = random_phi(rng, n);

        // Auxiliaries held fixed at the current errors.
        const PredictionBatch b0 = make_batch(targets, predict_probs(X, w));
        const HQAux aux = hq_aux_update(b0.errors, sigma);

        const std::vector<double> grad = jr2_gradient(X, b0, aux, phi);
        const auto objective = [&](const std::vector<double>& wt) {
            return jr2_objective(make_batch(targets, predict_probs(X, wt)), aux, phi);
        };
        const std::vector<double> fd = testsupport::fd_gradient(objective, w);
        CHECK(testsupport::max_rel_error(grad, fd) < 1e-5);
    }
}

TEST_CASE("gradient is linear in phi and vanishes at a perfect fit") {
    Rng rng(31);
    const std::size_t n = 10, d = 3;
    Matrix X(n, d);
    std::vector<int> targets(n);
    for (std::size_t i = 0; i < n; ++i) {
        targets[i] = rng.below(2) == 1 ? 1 : 0;
        for (std::size_t j = 0; j < d; ++j) X(i, j) = rng.gaussian();
    }
    std::vector<double> w{0.3, -0.7, 0.2};
    const PredictionBatch b = make_batch(targets, predict_probs(X, w));
    const HQAux aux = hq_aux_update(b.errors, 0.4);

    const Phi phi{5.0, 3.0, 2.0};
    const Phi scaled{15.0, 9.0, 6.0};
    const std::vector<double> g1 = jr2_gradient(X, b, aux, phi);
    const std::vector<double> g3 = jr2_gradient(X, b, aux, scaled);
    for (std::size_t k = 0; k < d; ++k) CHECK(g3[k] == Approx(3.0 * g1[k]).epsilon(1e-12));

    // With weight only on the zero peak the gradient is the u-term alone.
    const Phi center{7.0, 0.0, 0.0};
    const std::vector<double> gc = jr2_gradient(X, b, aux, center);
    std::vector<double> expected(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double coeff =
            -2.0 * center.at0 * aux.u[i] * b.errors[i] * b.probs[i] * (1.0 - b.probs[i]);
        for (std::size_t k = 0; k < d; ++k) expected[k] += coeff * X(i, k);
    }
    for (std::size_t k = 0; k < d; ++k) CHECK(gc[k] == Approx(expected[k]).epsilon(1e-12));

    // Zero errors with center-only weights make the objective stationary.
    PredictionBatch perfect;
    perfect.targets.assign(n, 1);
    perfect.probs.assign(n, 1.0);
    perfect.errors.assign(n, 0.0);
    for (double g : jr2_gradient(X, perfect, hq_aux_update(perfect.errors, 0.4), center))
        CHECK(g == 0.0);
}

TEST_CASE("adam step behavior") {
    AdamParams p;
    p.learning_rate = 0.1;

    std::vector<double> w{1.0, -2.0};
    AdamState st(2);
    adam_step(w, {0.0, 0.0}, st, p);
    CHECK(w == std::vector<double>{1.0, -2.0});
    CHECK(st.t == 1);

    // First step from a fresh state moves by ~lr * sign(gradient).
    std::vector<double> w2{0.0, 0.0};
    AdamState st2(2);
    adam_step(w2, {3.0, -0.004}, st2, p);
    CHECK(w2[0] == Approx(0.1).epsilon(1e-6));
    CHECK(w2[1] == Approx(-0.1).epsilon(1e-4));

    // Determinism: identical states and gradients give identical results.
    std::vector<double> wa{0.5}, wb{0.5};
    AdamState sa(1), sb(1);
    for (int i = 0; i < 7; ++i) {
        adam_step(wa, {0.3}, sa, p);
        adam_step(wb, {0.3}, sb, p);
    }
    CHECK(wa == wb);

    std::vector<double> bad{0.0};
    AdamState sbad(1);
    CHECK_THROWS_AS(adam_step(bad, {std::nan("")}, sbad, p), NumericError);
    CHECK_THROWS_AS(adam_step(bad, {1.0, 2.0}, sbad, p), InvalidInput);
}

TEST_CASE("hq fit drives a separable toy to a perfect training fit") {
    Rng rng(7117);
    const LabeledDataset ds = separable_toy(40, rng);
    CriterionSpec spec;
    spec.kind = Criterion::CLoss;
    spec.sigma = 0.5;
    FitConfig cfg;
    cfg.max_outer_iters = 300;
    cfg.adam.learning_rate = 0.05;

    const auto [model, trace] = hq_fit(ds, spec, cfg);
    const std::vector<double> probs = model_probs(model, ds.features);
    CHECK(accuracy(predict_labels(probs), ds.labels) == 1.0);

    const double peak = gaussian_kernel(0.0, KernelParams(spec.sigma));
    CHECK(trace.objective_per_iter.back() > 0.95 * peak);
}

TEST_CASE("hq fit trace is nondecreasing on random fixtures") {
    Rng rng(140);
    const Criterion kinds[] = {Criterion::CLoss, Criterion::RMEE, Criterion::QMEE};
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t n = 10 + rng.below(60);
        const std::size_t d = 1 + rng.below(6);
        LabeledDataset ds;
        ds.features = Matrix(n, d);
        ds.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            ds.labels[i] = rng.below(2) == 1 ? 1 : 0;
            for (std::size_t j = 0; j < d; ++j) ds.features(i, j) = 2.0 * rng.gaussian();
        }
        CriterionSpec spec;
        spec.kind = kinds[trial % 3];
        spec.sigma = rng.uniform(0.15, 0.8);
        if (spec.kind == Criterion::RMEE) {
            const double n_d = static_cast<double>(n);
            spec.phi = Phi{std::floor(0.8 * n_d), std::floor(0.1 * n_d),
                           n_d - std::floor(0.8 * n_d) - std::floor(0.1 * n_d)};
        }
        FitConfig cfg;
        cfg.max_outer_iters = 25;
        cfg.inner_steps = 20;

        const auto [model, trace] = hq_fit(ds, spec, cfg);
        REQUIRE_FALSE(trace.objective_per_iter.empty());
        for (std::size_t k = 1; k < trace.objective_per_iter.size(); ++k)
            CHECK(trace.objective_per_iter[k] >= trace.objective_per_iter[k - 1] - 1e-10);
    }
}

TEST_CASE("hq fit loop contract") {
    Rng rng(55);
    const LabeledDataset ds = separable_toy(20, rng);
    CriterionSpec spec;
    spec.kind = Criterion::CLoss;
    spec.sigma = 0.4;
    FitConfig cfg;
    cfg.max_outer_iters = 1;
    cfg.varsigma = 1e-12;

    const auto [model, trace] = hq_fit(ds, spec, cfg);
    CHECK(trace.iters_used == 1);
    CHECK(trace.objective_per_iter.size() == 1);
    CHECK_FALSE(trace.converged);

    CriterionSpec ce;
    ce.kind = Criterion::CE;
    CHECK_THROWS_AS(hq_fit(ds, ce, cfg), InvalidParameter);
}

TEST_CASE("gradient rejects mismatched shapes") {
    const PredictionBatch b = make_batch({1, 0}, {0.6, 0.4});
    const HQAux aux = hq_aux_update(b.errors, 0.5);
    Matrix wrong(3, 2);
    CHECK_THROWS_AS(jr2_gradient(wrong, b, aux, Phi{2.0, 0.0, 0.0}), InvalidInput);
}

TEST_CASE("identity-activation elm fits through the same path") {
    Rng rng(4242);
    const LabeledDataset ds = separable_toy(60, rng);
    ElmModel m = elm_init(2, 16, rng, ElmActivation::Identity);
    CriterionSpec spec;
    spec.kind = Criterion::CLoss;
    spec.sigma = 0.5;
    FitConfig cfg;
    cfg.max_outer_iters = 120;
    cfg.adam.learning_rate = 0.05;
    const FitTrace trace = hq_fit(m, ds, spec, cfg);
    CHECK(accuracy(predict_labels(model_probs(m, ds.features)), ds.labels) >= 0.95);
    for (std::size_t k = 1; k < trace.objective_per_iter.size(); ++k)
        CHECK(trace.objective_per_iter[k] >= trace.objective_per_iter[k - 1] - 1e-10);
}

TEST_CASE("elm hq fit trains only the output layer") {
    Rng rng(808);
    const LabeledDataset ds = separable_toy(60, rng);
    ElmModel m = elm_init(2, 20, rng);
    const std::vector<double> hidden_before = m.hidden_weights.data;
    const std::vector<double> biases_before = m.hidden_biases;

    CriterionSpec spec;
    spec.kind = Criterion::CLoss;
    spec.sigma = 0.5;
    FitConfig cfg;
    cfg.max_outer_iters = 120;
    cfg.adam.learning_rate = 0.05;
    const FitTrace trace = hq_fit(m, ds, spec, cfg);

    CHECK(m.hidden_weights.data == hidden_before);
    CHECK(m.hidden_biases == biases_before);
    const std::vector<double> probs = model_probs(m, ds.features);
    CHECK(accuracy(predict_labels(probs), ds.labels) >= 0.95);
    for (std::size_t k = 1; k < trace.objective_per_iter.size(); ++k)
        CHECK(trace.objective_per_iter[k] >= trace.objective_per_iter[k - 1] - 1e-10);
}

TEST_CASE("phi interval counting") {
    const Phi phi = count_phi({0.1, -0.2, 0.7, -0.9});
    CHECK(phi.at0 == 2.0);
    CHECK(phi.atNeg1 == 1.0);
    CHECK(phi.atPos1 == 1.0);

    // Boundaries land in the center bucket.
    const Phi edge = count_phi({0.5, -0.5});
    CHECK(edge.at0 == 2.0);
}

TEST_CASE("estimate_phi on clean and contaminated data") {
    Rng rng(2211);
    const LabeledDataset clean = separable_toy(100, rng);
    FitConfig cfg;
    cfg.sigma = 0.4;
    cfg.max_outer_iters = 150;
    cfg.adam.learning_rate = 0.05;

    const Phi phi = estimate_phi(clean, cfg);
    CHECK(phi.total() == 100.0);
    CHECK(phi.atNeg1 == 0.0);
    CHECK(phi.atPos1 == 0.0);

    // Plant label flips; the stage-one fit leaves them confidently wrong.
    LabeledDataset noisy = clean;
    for (std::size_t i = 0; i < 20; ++i) noisy.labels[5 * i] = 1 - noisy.labels[5 * i];
    const Phi phi2 = estimate_phi(noisy, cfg);
    CHECK(phi2.total() == 100.0);
    CHECK(phi2.atNeg1 + phi2.atPos1 > 0.0);

    // Pure false positives (0-class samples labeled 1) should surface as
    // errors near +1, counted at the positive peak.
    LabeledDataset fp = clean;
    std::size_t planted = 0;
    for (std::size_t i = 0; i < fp.size() && planted < 15; ++i)
        if (fp.labels[i] == 0) {
            fp.labels[i] = 1;
            ++planted;
        }
    const Phi phi3 = estimate_phi(fp, cfg);
    CHECK(phi3.atPos1 > 0.0);
    CHECK(phi3.atPos1 >= phi3.atNeg1);
}

TEST_CASE("fit_rmee_full behaves like c-loss on clean data and is deterministic") {
    Rng rng(99182);
    const LabeledDataset ds = separable_toy(80, rng);
    FitConfig cfg;
    cfg.sigma = 0.4;
    cfg.max_outer_iters = 150;
    cfg.adam.learning_rate = 0.05;

    const auto [m1, r1] = fit_rmee_full(ds, cfg);
    const auto [m2, r2] = fit_rmee_full(ds, cfg);
    CHECK(m1.weights == m2.weights);
    CHECK(r1.phi.at0 == 80.0);
    CHECK(accuracy(predict_labels(model_probs(m1, ds.features)), ds.labels) == 1.0);
    for (std::size_t k = 1; k < r1.trace.objective_per_iter.size(); ++k)
        CHECK(r1.trace.objective_per_iter[k] >= r1.trace.objective_per_iter[k - 1] - 1e-10);
}

TEST_CASE("stratified folds partition every sample exactly once") {
    std::vector<int> labels;
    for (int i = 0; i < 37; ++i) labels.push_back(i % 3 == 0 ? 1 : 0);
    const auto folds = stratified_folds(labels, 5, 42);
    std::vector<int> seen(labels.size(), 0);
    for (const auto& fold : folds)
        for (std::size_t idx : fold) ++seen[idx];
    for (int s : seen) CHECK(s == 1);

    CHECK_THROWS_AS(stratified_folds({0, 0, 0, 1}, 5, 1), InvalidInput);
}

TEST_CASE("sigma cross-validation") {
    Rng rng(7340);
    const LabeledDataset ds = separable_toy(60, rng);
    FitConfig cfg;
    cfg.max_outer_iters = 60;
    cfg.adam.learning_rate = 0.05;

    CHECK(cross_validate_sigma(ds, {0.37}, cfg) == 0.37);
    // Separable data: every candidate reaches accuracy 1, smallest wins.
    CHECK(cross_validate_sigma(ds, {0.6, 0.3}, cfg) == 0.3);
    CHECK_THROWS_AS(cross_validate_sigma(ds, {}, cfg), InvalidParameter);
}

TEST_CASE("plain adam fits for ce and mse") {
    Rng rng(515);
    const LabeledDataset ds = separable_toy(40, rng);
    const Matrix X = augment_bias(ds.features);
    FitConfig cfg;
    cfg.max_outer_iters = 100;
    cfg.adam.learning_rate = 0.05;

    for (Criterion kind : {Criterion::CE, Criterion::MSE}) {
        std::vector<double> w;
        const FitTrace trace = plain_fit_features(X, ds.labels, kind, cfg, w);
        REQUIRE_FALSE(trace.objective_per_iter.empty());
        LogisticModel m{w};
        CHECK(accuracy(predict_labels(model_probs(m, ds.features)), ds.labels) == 1.0);
    }

    std::vector<double> w;
    CHECK_THROWS_AS(plain_fit_features(X, ds.labels, Criterion::RMEE, cfg, w), InvalidParameter);
}
