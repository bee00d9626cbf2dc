#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "rmee/core.hpp"

namespace rmee {

/// Per-column statistics applied at normalization time (train-fitted).
struct Normalization {
    std::vector<double> mean;
    std::vector<double> std;
};

struct LabeledDataset {
    Matrix features;          // N x d
    std::vector<int> labels;  // {0,1}, length N
    std::string name;
    std::optional<Normalization> normalization;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols; }
};

enum class ContaminationMode { Attribute, LabelMajToMin, LabelMinToMaj };

inline const char* contamination_mode_name(ContaminationMode m) {
    switch (m) {
        case ContaminationMode::Attribute: return "attribute";
        case ContaminationMode::LabelMajToMin: return "label_maj_to_min";
        case ContaminationMode::LabelMinToMaj: return "label_min_to_maj";
    }
    return "?";
}

struct ContaminationSpec {
    ContaminationMode mode = ContaminationMode::Attribute;
    double proportion = 0.0;
    double attribute_cov_scale = 100.0;  // covariance c * I_d, attribute mode only
    std::uint64_t seed = 0;

    ContaminationSpec() = default;
    ContaminationSpec(ContaminationMode m, double prop, double cov = 100.0, std::uint64_t s = 0)
        : mode(m), proportion(prop), attribute_cov_scale(cov), seed(s) {
        if (!(prop >= 0.0 && prop <= 1.0))
            throw InvalidParameter("ContaminationSpec: proportion must lie in [0,1]");
    }
};

/// Linear toy problem: samples from N(mean_shift * 1, I_d), a random true
/// weight vector from N(0, I_d), and labels 1 iff w*'x >= 0. mean_shift 0
/// gives a balanced problem; 0.4 the unbalanced one.
inline std::tuple<LabeledDataset, LabeledDataset, std::vector<double>> generate_toy(
    std::size_t n_train, std::size_t n_test, std::size_t d, double mean_shift, Rng& rng) {
    if (d < 1) throw InvalidParameter("generate_toy: d must be >= 1");
    std::vector<double> w_true(d);
    for (double& w : w_true) w = rng.gaussian();

    auto make = [&](std::size_t n, const char* name) {
        LabeledDataset ds;
        ds.features = Matrix(n, d);
        ds.labels.resize(n);
        ds.name = name;
        for (std::size_t i = 0; i < n; ++i) {
            double proj = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double v = mean_shift + rng.gaussian();
                ds.features(i, j) = v;
                proj += w_true[j] * v;
            }
            ds.labels[i] = proj >= 0.0 ? 1 : 0;
        }
        return ds;
    };
    LabeledDataset train = make(n_train, "toy_train");
    LabeledDataset test = make(n_test, "toy_test");
    return {std::move(train), std::move(test), std::move(w_true)};
}

/// Replaces the features of floor(proportion * N) rows, chosen uniformly and
/// class-blind, with draws from N(0, c * I_d). Labels are untouched.
inline LabeledDataset inject_attribute_outliers(LabeledDataset ds, const ContaminationSpec& spec,
                                                Rng& rng) {
    if (spec.mode != ContaminationMode::Attribute)
        throw InvalidParameter("inject_attribute_outliers: spec mode must be attribute");
    const std::size_t n_out = static_cast<std::size_t>(spec.proportion * static_cast<double>(ds.size()));
    const double scale = std::sqrt(spec.attribute_cov_scale);
    for (std::size_t i : rng.choose(ds.size(), n_out))
        for (std::size_t j = 0; j < ds.dim(); ++j) ds.features(i, j) = scale * rng.gaussian();
    return ds;
}

/// Flips the labels of floor(proportion * N_source) uniformly chosen samples
/// of the source class (major or minor by count; ties treat class 1 as
/// major). Features are untouched.
inline LabeledDataset inject_label_outliers(LabeledDataset ds, const ContaminationSpec& spec,
                                            Rng& rng) {
    if (spec.mode == ContaminationMode::Attribute)
        throw InvalidParameter("inject_label_outliers: spec mode must be a label mode");
    std::size_t n1 = 0;
    for (int t : ds.labels) n1 += static_cast<std::size_t>(t);
    const std::size_t n0 = ds.size() - n1;
    const int major = n1 >= n0 ? 1 : 0;
    const int source =
        spec.mode == ContaminationMode::LabelMajToMin ? major : 1 - major;

    std::vector<std::size_t> source_idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.labels[i] == source) source_idx.push_back(i);
    if (source_idx.empty()) throw InvalidInput("inject_label_outliers: source class is empty");

    const std::size_t n_flip =
        static_cast<std::size_t>(spec.proportion * static_cast<double>(source_idx.size()));
    for (std::size_t pick : rng.choose(source_idx.size(), n_flip))
        ds.labels[source_idx[pick]] = 1 - source;
    return ds;
}

/// Dataset with raw label tokens, for one-vs-all conversion.
struct MulticlassDataset {
    Matrix features;
    std::vector<std::string> labels;
    std::string name;

    std::size_t size() const { return labels.size(); }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stod(t, &pos);
        if (pos != t.size()) return false;
    } catch (const std::exception&) {
        return false;
    }
    return !std::isnan(out);
}

}  // namespace detail

/// Parses a comma-separated file with one label column and numeric features.
/// A first row whose feature cells fail numeric parsing is treated as a
/// header and skipped. Missing or non-numeric feature cells are errors with
/// row/column diagnostics.
inline MulticlassDataset load_csv_multiclass(const std::string& path, std::size_t label_column) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot open csv file: " + path);

    MulticlassDataset ds;
    ds.name = path;
    std::string line;
    std::size_t row = 0;
    std::vector<double> feat_buf;
    std::size_t dim = 0;
    bool first_data_row = true;

    while (std::getline(is, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const std::vector<std::string> cells = detail::split_line(line);
        if (label_column >= cells.size())
            throw InvalidInput(path + ": row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " columns, label column " +
                               std::to_string(label_column) + " is out of range");
        if (first_data_row) {
            bool header = false;
            double tmp;
            for (std::size_t c = 0; c < cells.size(); ++c)
                if (c != label_column && !detail::parse_double(cells[c], tmp)) header = true;
            if (header) continue;  // skip it once
        }

        feat_buf.clear();
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == label_column) continue;
            double v;
            if (!detail::parse_double(cells[c], v))
                throw InvalidInput(path + ": row " + std::to_string(row) + ", column " +
                                   std::to_string(c) + ": non-numeric or missing value '" +
                                   cells[c] + "'");
            feat_buf.push_back(v);
        }
        if (first_data_row) {
            dim = feat_buf.size();
            first_data_row = false;
        } else if (feat_buf.size() != dim) {
            throw InvalidInput(path + ": row " + std::to_string(row) + " has " +
                               std::to_string(feat_buf.size()) + " features, expected " +
                               std::to_string(dim));
        }
        ds.features.data.insert(ds.features.data.end(), feat_buf.begin(), feat_buf.end());
        ds.labels.push_back(detail::trim(cells[label_column]));
    }
    if (ds.labels.empty()) throw InvalidInput(path + ": no data rows");
    ds.features.rows = ds.labels.size();
    ds.features.cols = dim;
    return ds;
}

/// Parses a csv of purely numeric columns (no label); a non-numeric first
/// row is treated as a header.
inline Matrix load_csv_features(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot open csv file: " + path);
    Matrix out;
    std::string line;
    std::size_t row = 0;
    bool first_data_row = true;
    while (std::getline(is, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const std::vector<std::string> cells = detail::split_line(line);
        if (first_data_row) {
            bool header = false;
            double tmp;
            for (const std::string& c : cells)
                if (!detail::parse_double(c, tmp)) header = true;
            if (header) continue;
        }
        std::vector<double> vals(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c)
            if (!detail::parse_double(cells[c], vals[c]))
                throw InvalidInput(path + ": row " + std::to_string(row) + ", column " +
                                   std::to_string(c) + ": non-numeric or missing value '" +
                                   cells[c] + "'");
        if (first_data_row) {
            out.cols = vals.size();
            first_data_row = false;
        } else if (vals.size() != out.cols) {
            throw InvalidInput(path + ": row " + std::to_string(row) + " has " +
                               std::to_string(vals.size()) + " columns, expected " +
                               std::to_string(out.cols));
        }
        out.data.insert(out.data.end(), vals.begin(), vals.end());
        ++out.rows;
    }
    if (out.rows == 0) throw InvalidInput(path + ": no data rows");
    return out;
}

/// One-vs-all conversion: the target class becomes 1, everything else 0.
inline LabeledDataset one_vs_all(const MulticlassDataset& mc, const std::string& target_class) {
    LabeledDataset ds;
    ds.features = mc.features;
    ds.name = mc.name + " (" + target_class + " vs all)";
    ds.labels.resize(mc.size());
    std::size_t positives = 0;
    for (std::size_t i = 0; i < mc.size(); ++i) {
        ds.labels[i] = mc.labels[i] == target_class ? 1 : 0;
        positives += static_cast<std::size_t>(ds.labels[i]);
    }
    if (positives == 0)
        throw InvalidInput("one_vs_all: class '" + target_class + "' not present in " + mc.name);
    return ds;
}

/// Binary ingestion: the positive token maps to 1, every other token to 0.
inline LabeledDataset load_csv(const std::string& path, std::size_t label_column,
                               const std::string& positive_label) {
    const MulticlassDataset mc = load_csv_multiclass(path, label_column);
    LabeledDataset ds;
    ds.features = mc.features;
    ds.name = path;
    ds.labels.resize(mc.size());
    for (std::size_t i = 0; i < mc.size(); ++i) ds.labels[i] = mc.labels[i] == positive_label ? 1 : 0;
    return ds;
}

/// Writes features plus a final 0/1 label column; the inverse of
/// load_csv(path, d, "1").
inline void save_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw InvalidInput("cannot open for write: " + path);
    for (std::size_t j = 0; j < ds.dim(); ++j) os << "f" << j << ",";
    os << "label\n";
    os.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) os << ds.features(i, j) << ",";
        os << ds.labels[i] << "\n";
    }
}

/// Z-scores every feature column using train statistics only and applies the
/// same transform to test. Constant columns are centered but left unscaled.
inline std::pair<LabeledDataset, LabeledDataset> normalize(LabeledDataset train,
                                                           LabeledDataset test) {
    const std::size_t n = train.size();
    const std::size_t d = train.dim();
    if (n < 2) throw InvalidInput("normalize: need at least 2 training rows");
    Normalization stats;
    stats.mean.resize(d);
    stats.std.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += train.features(i, j);
        m /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = train.features(i, j) - m;
            ss += dv * dv;
        }
        double s = std::sqrt(ss / static_cast<double>(n - 1));
        if (!(s > 1e-12)) s = 1.0;  // constant column: center only
        stats.mean[j] = m;
        stats.std[j] = s;
    }
    auto apply = [&](LabeledDataset& ds) {
        for (std::size_t i = 0; i < ds.size(); ++i)
            for (std::size_t j = 0; j < d; ++j)
                ds.features(i, j) = (ds.features(i, j) - stats.mean[j]) / stats.std[j];
        ds.normalization = stats;
    };
    if (test.size() > 0 && test.dim() != d) throw InvalidInput("normalize: dimension mismatch");
    apply(train);
    apply(test);
    return {std::move(train), std::move(test)};
}

/// Uniform random split without replacement into ceil(f*N) train rows and the
/// remaining test rows.
inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                       double train_fraction, Rng& rng) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw InvalidParameter("split: train_fraction must lie in (0,1)");
    const std::size_t n = ds.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n)));
    const std::vector<std::size_t> order = rng.choose(n, n);

    auto take = [&](std::size_t begin, std::size_t end, const char* suffix) {
        LabeledDataset out;
        out.features = Matrix(end - begin, ds.dim());
        out.labels.resize(end - begin);
        out.name = ds.name + suffix;
        out.normalization = ds.normalization;
        for (std::size_t k = begin; k < end; ++k) {
            const std::size_t src = order[k];
            for (std::size_t j = 0; j < ds.dim(); ++j) out.features(k - begin, j) = ds.features(src, j);
            out.labels[k - begin] = ds.labels[src];
        }
        return out;
    };
    return {take(0, n_train, "/train"), take(n_train, n, "/test")};
}

}  // namespace rmee
