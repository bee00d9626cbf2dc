#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "rmee/core.hpp"
#include "rmee/criteria.hpp"
#include "rmee/data.hpp"
#include "rmee/hq_optimizer.hpp"
#include "rmee/models.hpp"

namespace rmee {

/// Fraction of matching labels, (TP+TN)/(TP+TN+FP+FN).
inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) throw InvalidInput("accuracy: length mismatch");
    if (predicted.empty()) throw InvalidInput("accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        hits += static_cast<std::size_t>(predicted[i] == truth[i]);
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

struct SigmaPolicy {
    enum class Kind { Fixed, Silverman, CvGrid } kind = Kind::Fixed;
    double fixed = 0.25;
    std::vector<double> grid{0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};

    static SigmaPolicy fixed_value(double v) { return {Kind::Fixed, v, {}}; }
    static SigmaPolicy silverman() { return {Kind::Silverman, 0.25, {}}; }
    static SigmaPolicy cv(std::vector<double> g) { return {Kind::CvGrid, 0.25, std::move(g)}; }
};

struct ToySource {
    std::size_t n_train = 1000;
    std::size_t n_test = 1000;
    std::size_t d = 20;
    double mean_shift = 0.0;
};

struct CsvSource {
    std::string path;
    std::size_t label_column = 0;
    std::string positive_label;
    double train_fraction = 2.0 / 3.0;
};

struct ExperimentPlan {
    std::variant<ToySource, CsvSource> source;
    ModelKind model = ModelKind::Logistic;
    std::size_t hidden = 50;
    ElmActivation elm_activation = ElmActivation::Sigmoid;
    bool normalize = false;  // z-score with train statistics before contamination
    std::vector<Criterion> criteria{Criterion::CE,    Criterion::MSE, Criterion::CLoss,
                                    Criterion::QMEE,  Criterion::RMEE};
    std::vector<ContaminationSpec> grid;  // one cell per entry; proportion 0 means clean
    std::size_t repetitions = 20;
    std::uint64_t master_seed = 1;
    SigmaPolicy sigma_policy;
    double quantizer_epsilon = 0.05;
    FitConfig fit;
};

struct ResultRow {
    std::string criterion;
    std::string mode;
    std::string parameter;  // covariance scale or flip direction
    double proportion = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::size_t repetitions = 0;  // successful repetitions
};

struct FailureNote {
    std::string criterion;
    std::size_t cell = 0;
    std::size_t rep = 0;
    std::string message;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<FailureNote> failures;
};

namespace detail {

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

inline std::pair<std::string, std::string> cell_key(const ContaminationSpec& spec) {
    switch (spec.mode) {
        case ContaminationMode::Attribute:
            return {"attribute", format_number(spec.attribute_cov_scale)};
        case ContaminationMode::LabelMajToMin:
            return {"label", "maj_to_min"};
        case ContaminationMode::LabelMinToMaj:
            return {"label", "min_to_maj"};
    }
    return {"?", "?"};
}

// Numeric-aware comparison so covariance scales sort as values, not strings.
inline bool parameter_less(const std::string& a, const std::string& b) {
    double da, db;
    const bool na = parse_double(a, da);
    const bool nb = parse_double(b, db);
    if (na && nb) return da < db;
    if (na != nb) return na;  // numeric parameters first
    return a < b;
}

inline bool row_less(const ResultRow& a, const ResultRow& b) {
    if (a.criterion != b.criterion) return a.criterion < b.criterion;
    if (a.mode != b.mode) return a.mode < b.mode;
    if (a.parameter != b.parameter) return parameter_less(a.parameter, b.parameter);
    return a.proportion < b.proportion;
}

inline double resolve_sigma(const SigmaPolicy& policy, const LabeledDataset& train,
                            const ExperimentPlan& plan, std::uint64_t task_seed) {
    switch (policy.kind) {
        case SigmaPolicy::Kind::Fixed:
            return policy.fixed;
        case SigmaPolicy::Kind::Silverman: {
            // Bandwidth of the zero-initialized error sample t - 0.5.
            ErrorSample errs(train.size());
            for (std::size_t i = 0; i < train.size(); ++i)
                errs[i] = static_cast<double>(train.labels[i]) - 0.5;
            return silverman_bandwidth(errs);
        }
        case SigmaPolicy::Kind::CvGrid: {
            FitConfig cfg = plan.fit;
            cfg.seed = task_seed;
            return cross_validate_sigma(train, policy.grid, cfg, plan.model, plan.hidden);
        }
    }
    return policy.fixed;
}

struct TaskOutcome {
    std::vector<double> acc;        // per criterion
    std::vector<char> ok;           // per criterion
    std::vector<std::string> why;   // failure messages
};

inline TaskOutcome run_task(const ExperimentPlan& plan, const LabeledDataset* csv_base,
                            std::size_t cell, std::size_t rep) {
    const std::uint64_t seed = Rng::derive(Rng::derive(plan.master_seed, cell), rep);
    Rng rng(seed);

    LabeledDataset train, test;
    if (const auto* toy = std::get_if<ToySource>(&plan.source)) {
        auto [tr, te, w_true] = generate_toy(toy->n_train, toy->n_test, toy->d, toy->mean_shift, rng);
        train = std::move(tr);
        test = std::move(te);
    } else {
        std::tie(train, test) = split(*csv_base, std::get<CsvSource>(plan.source).train_fraction, rng);
    }
    if (plan.normalize) std::tie(train, test) = normalize(std::move(train), std::move(test));

    const ContaminationSpec& cspec = plan.grid[cell];
    if (cspec.proportion > 0.0) {
        train = cspec.mode == ContaminationMode::Attribute
                    ? inject_attribute_outliers(std::move(train), cspec, rng)
                    : inject_label_outliers(std::move(train), cspec, rng);
    }

    const double sigma = resolve_sigma(plan.sigma_policy, train, plan, seed);

    TaskOutcome out;
    out.acc.assign(plan.criteria.size(), 0.0);
    out.ok.assign(plan.criteria.size(), 0);
    out.why.assign(plan.criteria.size(), "");

    // One frozen hidden layer per repetition, shared across criteria.
    ElmModel elm_template;
    if (plan.model == ModelKind::Elm) {
        Rng elm_rng(Rng::derive(seed, 0xe1a));
        elm_template = elm_init(train.dim(), plan.hidden, elm_rng, plan.elm_activation);
    }

    for (std::size_t c = 0; c < plan.criteria.size(); ++c) {
        try {
            FitConfig cfg = plan.fit;
            cfg.seed = Rng::derive(seed, c);
            std::vector<double> probs;
            if (plan.model == ModelKind::Elm) {
                ElmModel m = elm_template;
                const Matrix H = elm_feature_matrix(m, train.features);
                fit_criterion_features(H, train.labels, plan.criteria[c], sigma,
                                       plan.quantizer_epsilon, cfg, m.output_weights);
                probs = model_probs(m, test.features);
            } else {
                const Matrix X = augment_bias(train.features);
                std::vector<double> w;
                fit_criterion_features(X, train.labels, plan.criteria[c], sigma,
                                       plan.quantizer_epsilon, cfg, w);
                LogisticModel m{std::move(w)};
                probs = model_probs(m, test.features);
            }
            out.acc[c] = accuracy(predict_labels(probs), test.labels);
            out.ok[c] = 1;
        } catch (const NumericError& err) {
            out.why[c] = err.what();
        }
    }
    return out;
}

}  // namespace detail

/// Runs the full grid: repetitions x cells x criteria, each repetition on a
/// freshly generated (or re-split) dataset whose training half alone is
/// contaminated. Per-task seeds derive from (master_seed, cell, rep), so the
/// result is independent of scheduling. Numeric fit failures are collected,
/// not fatal; a row's repetition count reflects successes only.
inline ExperimentResult run_experiment(const ExperimentPlan& plan, std::size_t n_threads = 1) {
    if (plan.repetitions < 1) throw InvalidParameter("run_experiment: repetitions must be >= 1");
    if (plan.criteria.empty()) throw InvalidParameter("run_experiment: no criteria selected");
    if (plan.grid.empty()) throw InvalidParameter("run_experiment: empty contamination grid");

    std::optional<LabeledDataset> csv_base;
    if (const auto* csv = std::get_if<CsvSource>(&plan.source))
        csv_base = load_csv(csv->path, csv->label_column, csv->positive_label);

    const std::size_t n_tasks = plan.grid.size() * plan.repetitions;
    std::vector<detail::TaskOutcome> outcomes(n_tasks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= n_tasks) return;
            const std::size_t cell = task / plan.repetitions;
            const std::size_t rep = task % plan.repetitions;
            try {
                outcomes[task] =
                    detail::run_task(plan, csv_base ? &*csv_base : nullptr, cell, rep);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    ExperimentResult result;
    for (std::size_t cell = 0; cell < plan.grid.size(); ++cell) {
        const auto [mode, parameter] = detail::cell_key(plan.grid[cell]);
        for (std::size_t c = 0; c < plan.criteria.size(); ++c) {
            double sum = 0.0, sumsq = 0.0;
            std::size_t n_ok = 0;
            for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
                const detail::TaskOutcome& o = outcomes[cell * plan.repetitions + rep];
                if (o.ok[c]) {
                    sum += o.acc[c];
                    sumsq += o.acc[c] * o.acc[c];
                    ++n_ok;
                } else {
                    result.failures.push_back(
                        {criterion_name(plan.criteria[c]), cell, rep, o.why[c]});
                }
            }
            ResultRow row;
            row.criterion = criterion_name(plan.criteria[c]);
            row.mode = mode;
            row.parameter = parameter;
            row.proportion = plan.grid[cell].proportion;
            row.repetitions = n_ok;
            if (n_ok > 0) {
                row.mean_accuracy = sum / static_cast<double>(n_ok);
                if (n_ok > 1) {
                    const double var = (sumsq - sum * sum / static_cast<double>(n_ok)) /
                                       static_cast<double>(n_ok - 1);
                    row.std_accuracy = var > 0.0 ? std::sqrt(var) : 0.0;
                }
            }
            result.rows.push_back(std::move(row));
        }
    }
    std::sort(result.rows.begin(), result.rows.end(), detail::row_less);
    return result;
}

/// CSV with header criterion,mode,parameter,proportion,mean_acc,std_acc,reps;
/// floats carry six decimals, lines end in LF.
inline void write_results(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidInput("cannot open for write: " + path);
    os << "criterion,mode,parameter,proportion,mean_acc,std_acc,reps\n";
    char buf[256];
    for (const ResultRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.6f,%.6f,%.6f,%zu\n", r.criterion.c_str(),
                      r.mode.c_str(), r.parameter.c_str(), r.proportion, r.mean_accuracy,
                      r.std_accuracy, r.repetitions);
        os << buf;
    }
}

/// One whitespace-separated file per (mode, parameter) group, named
/// <prefix>_<mode>_<parameter>.dat: proportion first, then mean and std per
/// criterion in sorted criterion order. Cells without data print nan.
inline std::vector<std::string> emit_plot_data(const std::vector<ResultRow>& rows,
                                               const std::string& path_prefix) {
    std::map<std::pair<std::string, std::string>, std::vector<const ResultRow*>> groups;
    for (const ResultRow& r : rows) groups[{r.mode, r.parameter}].push_back(&r);

    std::vector<std::string> written;
    for (const auto& [key, members] : groups) {
        std::set<std::string> criteria;
        std::set<double> proportions;
        std::map<std::pair<std::string, double>, const ResultRow*> lookup;
        for (const ResultRow* r : members) {
            criteria.insert(r->criterion);
            proportions.insert(r->proportion);
            lookup[{r->criterion, r->proportion}] = r;
        }

        const std::string path = path_prefix + "_" + key.first + "_" + key.second + ".dat";
        std::ofstream os(path, std::ios::binary);
        if (!os) throw InvalidInput("cannot open for write: " + path);
        os << "# proportion";
        for (const std::string& c : criteria) os << " " << c << "_mean " << c << "_std";
        os << "\n";
        char buf[64];
        for (double p : proportions) {
            std::snprintf(buf, sizeof(buf), "%.6f", p);
            os << buf;
            for (const std::string& c : criteria) {
                const auto it = lookup.find({c, p});
                if (it == lookup.end()) {
                    os << " nan nan";
                } else {
                    std::snprintf(buf, sizeof(buf), " %.6f %.6f", it->second->mean_accuracy,
                                  it->second->std_accuracy);
                    os << buf;
                }
            }
            os << "\n";
        }
        written.push_back(path);
    }
    return written;
}

}  // namespace rmee
