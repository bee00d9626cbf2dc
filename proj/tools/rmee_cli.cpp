// Command-line driver: Monte-Carlo robustness experiments, single fits,
// prediction, and bandwidth cross-validation on CSV datasets.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rmee/rmee.hpp"

namespace {

using namespace rmee;

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stod(tok));
    }
    if (out.empty()) throw InvalidParameter("empty numeric list: '" + csv + "'");
    return out;
}

std::vector<Criterion> parse_criteria(const std::string& csv) {
    std::vector<Criterion> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(criterion_from_name(tok));
    }
    if (out.empty()) throw InvalidParameter("no criteria given");
    return out;
}

// "mode=attribute,cov=100,prop=0.2" or "mode=label_maj_to_min,prop=0.1";
// "none" stands for an uncontaminated cell.
ContaminationSpec parse_contamination(const std::string& text) {
    ContaminationSpec spec;
    if (text == "none") return spec;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw InvalidParameter("bad contamination item '" + item + "' (want key=value)");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        if (key == "mode") {
            if (value == "attribute")
                spec.mode = ContaminationMode::Attribute;
            else if (value == "label_maj_to_min")
                spec.mode = ContaminationMode::LabelMajToMin;
            else if (value == "label_min_to_maj")
                spec.mode = ContaminationMode::LabelMinToMaj;
            else
                throw InvalidParameter("unknown contamination mode '" + value + "'");
        } else if (key == "prop") {
            spec.proportion = std::stod(value);
        } else if (key == "cov") {
            spec.attribute_cov_scale = std::stod(value);
        } else {
            throw InvalidParameter("unknown contamination key '" + key + "'");
        }
    }
    if (!(spec.proportion >= 0.0 && spec.proportion <= 1.0))
        throw InvalidParameter("contamination prop must lie in [0,1]");
    return spec;
}

SigmaPolicy parse_sigma_policy(const std::string& text, const std::string& grid_csv) {
    if (text == "cv") return SigmaPolicy::cv(parse_double_list(grid_csv));
    if (text == "silverman") return SigmaPolicy::silverman();
    return SigmaPolicy::fixed_value(std::stod(text));
}

void report(const ExperimentResult& res, const std::string& out_path,
            const std::string& plot_prefix) {
    write_results(res.rows, out_path);
    std::cout << "wrote " << res.rows.size() << " rows to " << out_path << "\n";
    if (!plot_prefix.empty())
        for (const std::string& f : emit_plot_data(res.rows, plot_prefix))
            std::cout << "wrote " << f << "\n";
    for (const FailureNote& f : res.failures)
        std::cerr << "note: criterion " << f.criterion << " cell " << f.cell << " rep " << f.rep
                  << " failed: " << f.message << "\n";
}

struct CsvArgs {
    std::string path;
    std::size_t label_col = 0;
    std::string positive;
};

LabeledDataset load_from(const CsvArgs& args) {
    return load_csv(args.path, args.label_col, args.positive);
}

int run(int argc, char** argv) {
    CLI::App app{"Robust binary classification benchmarks with entropy-based criteria"};
    app.require_subcommand(1);

    const std::string default_grid = "0.05,0.1,0.2,0.4,0.6,0.8,1.0";

    // --- toy ---------------------------------------------------------------
    auto* toy = app.add_subcommand("toy", "Monte-Carlo robustness sweep on a generated toy");
    std::string toy_mode = "attribute";
    std::size_t toy_d = 20, toy_n = 1000, toy_reps = 20, toy_threads = 1, toy_hidden = 50;
    double toy_shift = 0.0;
    std::string toy_cov = "5,100,1000";
    std::string toy_props;
    std::string toy_criteria = "ce,mse,closs,qmee,rmee";
    std::string toy_sigma = "0.25", toy_grid = default_grid;
    std::string toy_direction = "maj_to_min";
    std::string toy_model = "lr";
    std::uint64_t toy_seed = 1;
    std::string toy_out, toy_plot;
    double toy_qeps = 0.05;
    toy->add_option("--mode", toy_mode, "attribute|label")->check(CLI::IsMember({"attribute", "label"}));
    toy->add_option("--d", toy_d, "feature dimension");
    toy->add_option("--n", toy_n, "train and test sample count");
    toy->add_option("--mean-shift", toy_shift, "per-dimension mean of the inputs");
    toy->add_option("--cov", toy_cov, "comma list of outlier covariance scales (attribute mode)");
    toy->add_option("--props", toy_props, "comma list of contamination proportions");
    toy->add_option("--criteria", toy_criteria, "comma list of ce,mse,closs,qmee,rmee");
    toy->add_option("--reps", toy_reps, "Monte-Carlo repetitions per cell");
    toy->add_option("--seed", toy_seed, "master seed");
    toy->add_option("--out", toy_out, "output csv path")->required();
    toy->add_option("--sigma", toy_sigma, "bandwidth: value, 'cv', or 'silverman'");
    toy->add_option("--sigma-grid", toy_grid, "cv candidate grid");
    toy->add_option("--direction", toy_direction, "label flip direction")
        ->check(CLI::IsMember({"maj_to_min", "min_to_maj"}));
    toy->add_option("--model", toy_model, "lr|elm")->check(CLI::IsMember({"lr", "elm"}));
    toy->add_option("--hidden", toy_hidden, "elm hidden nodes");
    std::string toy_act = "sigmoid";
    toy->add_option("--elm-activation", toy_act, "hidden node transfer: sigmoid|identity")
        ->check(CLI::IsMember({"sigmoid", "identity"}));
    toy->add_option("--quantizer-epsilon", toy_qeps, "qmee quantization threshold");
    toy->add_option("--threads", toy_threads, "worker threads");
    toy->add_option("--plot-prefix", toy_plot, "emit plot data files with this prefix");

    // --- bench -------------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "Monte-Carlo robustness sweep on a csv dataset");
    CsvArgs bench_csv;
    std::string bench_model = "elm";
    std::size_t bench_hidden = 50, bench_reps = 20, bench_threads = 1;
    bool bench_normalize = true;
    std::vector<std::string> bench_contaminate;
    std::string bench_criteria = "ce,mse,closs,qmee,rmee";
    std::string bench_sigma = "0.25", bench_grid = default_grid;
    std::uint64_t bench_seed = 1;
    double bench_frac = 2.0 / 3.0, bench_qeps = 0.05;
    std::string bench_out, bench_plot;
    bench->add_option("--data", bench_csv.path, "csv dataset")->required();
    bench->add_option("--label-col", bench_csv.label_col, "zero-based label column")->required();
    bench->add_option("--positive", bench_csv.positive, "positive class token")->required();
    bench->add_option("--model", bench_model, "lr|elm")->check(CLI::IsMember({"lr", "elm"}));
    bench->add_option("--hidden", bench_hidden, "elm hidden nodes");
    std::string bench_act = "sigmoid";
    bench->add_option("--elm-activation", bench_act, "hidden node transfer: sigmoid|identity")
        ->check(CLI::IsMember({"sigmoid", "identity"}));
    bench->add_flag("--normalize,!--no-normalize", bench_normalize,
                    "z-score features with train statistics (default on)");
    bench->add_option("--contaminate", bench_contaminate,
                      "cell spec 'mode=attribute,cov=100,prop=0.2' (repeatable; default none)");
    bench->add_option("--criteria", bench_criteria, "comma list of criteria");
    bench->add_option("--reps", bench_reps, "Monte-Carlo repetitions per cell");
    bench->add_option("--train-frac", bench_frac, "training fraction of each split");
    bench->add_option("--seed", bench_seed, "master seed");
    bench->add_option("--sigma", bench_sigma, "bandwidth: value, 'cv', or 'silverman'");
    bench->add_option("--sigma-grid", bench_grid, "cv candidate grid");
    bench->add_option("--quantizer-epsilon", bench_qeps, "qmee quantization threshold");
    bench->add_option("--threads", bench_threads, "worker threads");
    bench->add_option("--out", bench_out, "output csv path")->required();
    bench->add_option("--plot-prefix", bench_plot, "emit plot data files with this prefix");

    // --- fit ---------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "fit one criterion on a full csv and save the model");
    CsvArgs fit_csv;
    std::string fit_criterion = "rmee", fit_sigma = "0.25", fit_grid = default_grid;
    std::string fit_model = "lr", fit_save;
    std::size_t fit_hidden = 50;
    bool fit_normalize = false;
    std::uint64_t fit_seed = 1;
    double fit_qeps = 0.05, fit_lr = 0.01, fit_varsigma = 1e-6;
    std::size_t fit_max_outer = 200, fit_inner = 50;
    fit->add_option("--data", fit_csv.path, "csv dataset")->required();
    fit->add_option("--label-col", fit_csv.label_col, "zero-based label column")->required();
    fit->add_option("--positive", fit_csv.positive, "positive class token")->required();
    fit->add_option("--criterion", fit_criterion, "ce|mse|closs|qmee|rmee");
    fit->add_option("--sigma", fit_sigma, "bandwidth: value, 'cv', or 'silverman'");
    fit->add_option("--sigma-grid", fit_grid, "cv candidate grid");
    fit->add_option("--model", fit_model, "lr|elm")->check(CLI::IsMember({"lr", "elm"}));
    fit->add_option("--hidden", fit_hidden, "elm hidden nodes");
    fit->add_flag("--normalize", fit_normalize, "z-score features before fitting");
    fit->add_option("--seed", fit_seed, "seed for the elm hidden layer");
    fit->add_option("--quantizer-epsilon", fit_qeps, "qmee quantization threshold");
    fit->add_option("--learning-rate", fit_lr, "adam learning rate");
    fit->add_option("--max-outer", fit_max_outer, "outer iteration cap");
    fit->add_option("--inner-steps", fit_inner, "adam steps per outer iteration");
    fit->add_option("--varsigma", fit_varsigma, "objective-difference stop threshold");
    fit->add_option("--save-model", fit_save, "output model path")->required();

    // --- predict -----------------------------------------------------------
    auto* predict = app.add_subcommand("predict", "apply a saved model to csv features");
    std::string pred_model_path, pred_data, pred_out;
    int pred_label_col = -1;
    predict->add_option("--model", pred_model_path, "saved model path")->required();
    predict->add_option("--data", pred_data, "csv dataset")->required();
    predict->add_option("--label-col", pred_label_col,
                        "label column to skip (and score against); -1 for none");
    predict->add_option("--out", pred_out, "output csv path")->required();

    // --- cv-sigma ----------------------------------------------------------
    auto* cv = app.add_subcommand("cv-sigma", "five-fold bandwidth selection for rmee");
    CsvArgs cv_csv;
    std::string cv_grid = default_grid, cv_model = "lr";
    std::size_t cv_hidden = 50;
    std::uint64_t cv_seed = 1;
    cv->add_option("--data", cv_csv.path, "csv dataset")->required();
    cv->add_option("--label-col", cv_csv.label_col, "zero-based label column")->required();
    cv->add_option("--positive", cv_csv.positive, "positive class token")->required();
    cv->add_option("--grid", cv_grid, "comma list of candidate bandwidths");
    cv->add_option("--model", cv_model, "lr|elm")->check(CLI::IsMember({"lr", "elm"}));
    cv->add_option("--hidden", cv_hidden, "elm hidden nodes");
    cv->add_option("--seed", cv_seed, "fold shuffling seed");

    CLI11_PARSE(app, argc, argv);

    if (toy->parsed()) {
        ExperimentPlan plan;
        plan.source = ToySource{toy_n, toy_n, toy_d, toy_shift};
        plan.model = toy_model == "elm" ? ModelKind::Elm : ModelKind::Logistic;
        plan.hidden = toy_hidden;
        plan.elm_activation =
            toy_act == "identity" ? ElmActivation::Identity : ElmActivation::Sigmoid;
        plan.criteria = parse_criteria(toy_criteria);
        plan.repetitions = toy_reps;
        plan.master_seed = toy_seed;
        plan.sigma_policy = parse_sigma_policy(toy_sigma, toy_grid);
        plan.quantizer_epsilon = toy_qeps;

        if (toy_mode == "attribute") {
            if (toy_props.empty()) toy_props = "0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5,"
                                               "0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,1.0";
            for (double cov : parse_double_list(toy_cov))
                for (double p : parse_double_list(toy_props))
                    plan.grid.emplace_back(ContaminationMode::Attribute, p, cov);
        } else {
            if (toy_props.empty()) toy_props = "0,0.025,0.05,0.075,0.1,0.125,0.15,0.175,0.2,0.225,"
                                               "0.25,0.275,0.3,0.325,0.35,0.375,0.4,0.425,0.45,"
                                               "0.475,0.5";
            const ContaminationMode mode = toy_direction == "min_to_maj"
                                               ? ContaminationMode::LabelMinToMaj
                                               : ContaminationMode::LabelMajToMin;
            for (double p : parse_double_list(toy_props)) plan.grid.emplace_back(mode, p);
        }
        report(run_experiment(plan, toy_threads), toy_out, toy_plot);
        return 0;
    }

    if (bench->parsed()) {
        ExperimentPlan plan;
        plan.source = CsvSource{bench_csv.path, bench_csv.label_col, bench_csv.positive, bench_frac};
        plan.model = bench_model == "lr" ? ModelKind::Logistic : ModelKind::Elm;
        plan.hidden = bench_hidden;
        plan.elm_activation =
            bench_act == "identity" ? ElmActivation::Identity : ElmActivation::Sigmoid;
        plan.normalize = bench_normalize;
        plan.criteria = parse_criteria(bench_criteria);
        plan.repetitions = bench_reps;
        plan.master_seed = bench_seed;
        plan.sigma_policy = parse_sigma_policy(bench_sigma, bench_grid);
        plan.quantizer_epsilon = bench_qeps;
        if (bench_contaminate.empty()) bench_contaminate.push_back("none");
        for (const std::string& c : bench_contaminate)
            plan.grid.push_back(parse_contamination(c));
        report(run_experiment(plan, bench_threads), bench_out, bench_plot);
        return 0;
    }

    if (fit->parsed()) {
        LabeledDataset ds = load_from(fit_csv);
        if (fit_normalize) {
            LabeledDataset empty;
            empty.features = Matrix(0, ds.dim());
            std::tie(ds, empty) = normalize(std::move(ds), std::move(empty));
        }
        FitConfig cfg;
        cfg.adam.learning_rate = fit_lr;
        cfg.max_outer_iters = fit_max_outer;
        cfg.inner_steps = fit_inner;
        cfg.varsigma = fit_varsigma;
        cfg.seed = fit_seed;

        const Criterion kind = criterion_from_name(fit_criterion);
        const ModelKind mk = fit_model == "elm" ? ModelKind::Elm : ModelKind::Logistic;

        double sigma;
        if (fit_sigma == "cv") {
            sigma = cross_validate_sigma(ds, parse_double_list(fit_grid), cfg, mk, fit_hidden);
        } else if (fit_sigma == "silverman") {
            ErrorSample init_errs(ds.size());
            for (std::size_t i = 0; i < ds.size(); ++i)
                init_errs[i] = static_cast<double>(ds.labels[i]) - 0.5;
            sigma = silverman_bandwidth(init_errs);
        } else {
            sigma = std::stod(fit_sigma);
        }
        cfg.sigma = sigma;

        FitTrace trace;
        std::vector<double> probs;
        if (mk == ModelKind::Elm) {
            Rng rng(fit_seed);
            ElmModel m = elm_init(ds.dim(), fit_hidden, rng);
            const Matrix H = elm_feature_matrix(m, ds.features);
            trace = fit_criterion_features(H, ds.labels, kind, sigma, fit_qeps, cfg,
                                           m.output_weights);
            probs = model_probs(m, ds.features);
            save_model_file(m, fit_save);
        } else {
            const Matrix X = augment_bias(ds.features);
            LogisticModel m;
            trace = fit_criterion_features(X, ds.labels, kind, sigma, fit_qeps, cfg, m.weights);
            probs = model_probs(m, ds.features);
            save_model_file(m, fit_save);
        }
        const double acc = accuracy(predict_labels(probs), ds.labels);
        std::printf("fit criterion=%s model=%s sigma=%g n=%zu d=%zu train_acc=%.4f iters=%zu "
                    "converged=%d saved=%s\n",
                    fit_criterion.c_str(), fit_model.c_str(), sigma, ds.size(), ds.dim(), acc,
                    trace.iters_used, trace.converged ? 1 : 0, fit_save.c_str());
        return 0;
    }

    if (predict->parsed()) {
        const LoadedModel lm = load_model_file(pred_model_path);
        const Matrix features =
            pred_label_col >= 0
                ? load_csv_multiclass(pred_data, static_cast<std::size_t>(pred_label_col)).features
                : load_csv_features(pred_data);
        const std::vector<double> probs =
            lm.is_elm ? model_probs(lm.elm, features) : model_probs(lm.lr, features);
        const std::vector<int> labels = predict_labels(probs);

        std::ofstream os(pred_out, std::ios::binary);
        if (!os) throw InvalidInput("cannot open for write: " + pred_out);
        os << "index,prob,label\n";
        char buf[96];
        for (std::size_t i = 0; i < probs.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%zu,%.6f,%d\n", i, probs[i], labels[i]);
            os << buf;
        }
        std::cout << "wrote " << probs.size() << " predictions to " << pred_out << "\n";
        return 0;
    }

    if (cv->parsed()) {
        const LabeledDataset ds = load_from(cv_csv);
        FitConfig cfg;
        cfg.seed = cv_seed;
        const double sigma =
            cross_validate_sigma(ds, parse_double_list(cv_grid), cfg,
                                 cv_model == "elm" ? ModelKind::Elm : ModelKind::Logistic,
                                 cv_hidden);
        std::printf("sigma %g\n", sigma);
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
