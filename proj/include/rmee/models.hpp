#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rmee/core.hpp"

namespace rmee {

/// Plain logistic model y = sigmoid(w'x). The bias, when wanted, is an
/// ordinary weight paired with a constant-1 feature appended by the caller
/// (the fitting pipeline does this; see augment_bias below).
struct LogisticModel {
    std::vector<double> weights;
};

inline double lr_predict(const LogisticModel& m, std::span<const double> x) {
    if (x.size() != m.weights.size()) throw InvalidInput("lr_predict: dimension mismatch");
    return sigmoid(dot(m.weights.data(), x.data(), x.size()));
}

/// Hidden-node transfer function. Sigmoid is the default squashing node;
/// Identity keeps the raw random projection, which passes the input scale
/// through to the output layer the way the benchmark contamination results
/// require (damage that grows with outlier covariance).
enum class ElmActivation { Sigmoid, Identity };

/// Single-hidden-layer network with a frozen random hidden layer; only the
/// output weights train. The output activation is always sigmoid, so
/// predictions stay in (0,1) and errors in (-1,1).
struct ElmModel {
    Matrix hidden_weights;               // d x H, frozen after init
    std::vector<double> hidden_biases;   // H, frozen after init
    std::vector<double> output_weights;  // H, trainable
    ElmActivation activation = ElmActivation::Sigmoid;

    std::size_t input_dim() const { return hidden_weights.rows; }
    std::size_t hidden_size() const { return hidden_biases.size(); }
};

/// Draws the hidden layer i.i.d. uniform on [-1, 1]; output weights start at
/// zero so the initial prediction is 0.5 everywhere.
inline ElmModel elm_init(std::size_t d, std::size_t hidden, Rng& rng,
                         ElmActivation activation = ElmActivation::Sigmoid) {
    if (d < 1 || hidden < 1) throw InvalidParameter("elm_init: d and hidden size must be >= 1");
    ElmModel m;
    m.hidden_weights = Matrix(d, hidden);
    for (double& w : m.hidden_weights.data) w = rng.uniform(-1.0, 1.0);
    m.hidden_biases.resize(hidden);
    for (double& b : m.hidden_biases) b = rng.uniform(-1.0, 1.0);
    m.output_weights.assign(hidden, 0.0);
    m.activation = activation;
    return m;
}

inline std::vector<double> elm_hidden_map(const ElmModel& m, std::span<const double> x) {
    if (x.size() != m.input_dim()) throw InvalidInput("elm_hidden_map: dimension mismatch");
    const std::size_t h = m.hidden_size();
    std::vector<double> out(h);
    for (std::size_t k = 0; k < h; ++k) {
        double z = m.hidden_biases[k];
        for (std::size_t j = 0; j < x.size(); ++j) z += m.hidden_weights(j, k) * x[j];
        out[k] = m.activation == ElmActivation::Sigmoid ? sigmoid(z) : z;
    }
    return out;
}

inline double elm_predict(const ElmModel& m, std::span<const double> x) {
    const std::vector<double> h = elm_hidden_map(m, x);
    return sigmoid(dot(m.output_weights.data(), h.data(), h.size()));
}

/// Hard labels from probabilities: 1 iff prob > 0.5 (ties go to 0).
inline std::vector<int> predict_labels(const std::vector<double>& probs) {
    std::vector<int> labels(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) labels[i] = probs[i] > 0.5 ? 1 : 0;
    return labels;
}

/// Copies features and appends a constant-1 column so the bias trains as an
/// ordinary weight. Applied at the model boundary, never to stored datasets.
inline Matrix augment_bias(const Matrix& features) {
    Matrix out(features.rows, features.cols + 1);
    for (std::size_t i = 0; i < features.rows; ++i) {
        for (std::size_t j = 0; j < features.cols; ++j) out(i, j) = features(i, j);
        out(i, features.cols) = 1.0;
    }
    return out;
}

enum class ModelKind { Logistic, Elm };

/// Hidden activations for every row of a raw feature matrix; the design
/// matrix of the ELM's trainable output layer.
inline Matrix elm_feature_matrix(const ElmModel& m, const Matrix& raw) {
    if (raw.cols != m.input_dim()) throw InvalidInput("elm_feature_matrix: dimension mismatch");
    const std::size_t h = m.hidden_size();
    Matrix out(raw.rows, h);
    for (std::size_t i = 0; i < raw.rows; ++i) {
        const double* x = raw.row(i);
        for (std::size_t k = 0; k < h; ++k) {
            double z = m.hidden_biases[k];
            for (std::size_t j = 0; j < raw.cols; ++j) z += m.hidden_weights(j, k) * x[j];
            out(i, k) = m.activation == ElmActivation::Sigmoid ? sigmoid(z) : z;
        }
    }
    return out;
}

/// Probabilities on raw (un-augmented) feature rows.
inline std::vector<double> model_probs(const LogisticModel& m, const Matrix& raw) {
    if (raw.cols + 1 != m.weights.size()) throw InvalidInput("model_probs: dimension mismatch");
    std::vector<double> p(raw.rows);
    for (std::size_t i = 0; i < raw.rows; ++i) {
        double z = m.weights.back();  // bias slot
        const double* x = raw.row(i);
        for (std::size_t j = 0; j < raw.cols; ++j) z += m.weights[j] * x[j];
        p[i] = sigmoid(z);
    }
    return p;
}

inline std::vector<double> model_probs(const ElmModel& m, const Matrix& raw) {
    const Matrix h = elm_feature_matrix(m, raw);
    std::vector<double> p(raw.rows);
    for (std::size_t i = 0; i < raw.rows; ++i)
        p[i] = sigmoid(dot(m.output_weights.data(), h.row(i), h.cols));
    return p;
}

namespace detail {

// Shortest decimal form that round-trips to the same double.
inline std::string shortest_repr(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_weights(std::ostream& os, const std::vector<double>& w) {
    for (std::size_t i = 0; i < w.size(); ++i) os << (i ? " " : "") << shortest_repr(w[i]);
    os << "\n";
}

}  // namespace detail

/// Serialized text format:
///   model <lr|elm> dim <d> hidden <H>
/// followed by whitespace-separated weights. For lr, dim counts the full
/// weight vector (bias slot included) and hidden is 0. For elm the weights
/// are hidden_weights row-major (d rows of H), hidden_biases, output_weights.
inline void save_model(const LogisticModel& m, std::ostream& os) {
    os << "model lr dim " << m.weights.size() << " hidden 0\n";
    detail::write_weights(os, m.weights);
}

inline void save_model(const ElmModel& m, std::ostream& os) {
    if (m.activation != ElmActivation::Sigmoid)
        throw InvalidInput("save_model: the text format covers sigmoid-activation models only");
    os << "model elm dim " << m.input_dim() << " hidden " << m.hidden_size() << "\n";
    std::vector<double> flat;
    flat.reserve(m.hidden_weights.data.size() + 2 * m.hidden_size());
    flat.insert(flat.end(), m.hidden_weights.data.begin(), m.hidden_weights.data.end());
    flat.insert(flat.end(), m.hidden_biases.begin(), m.hidden_biases.end());
    flat.insert(flat.end(), m.output_weights.begin(), m.output_weights.end());
    detail::write_weights(os, flat);
}

struct LoadedModel {
    bool is_elm = false;
    LogisticModel lr;
    ElmModel elm;
};

inline LoadedModel load_model(std::istream& is) {
    std::string tag, kind, dim_tag, hidden_tag;
    std::size_t dim = 0, hidden = 0;
    is >> tag >> kind >> dim_tag >> dim >> hidden_tag >> hidden;
    if (!is || tag != "model" || dim_tag != "dim" || hidden_tag != "hidden")
        throw InvalidInput("load_model: malformed header");

    auto read_n = [&is](std::size_t n) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            if (!(is >> v[i])) throw InvalidInput("load_model: truncated weights");
        return v;
    };

    LoadedModel out;
    if (kind == "lr") {
        out.lr.weights = read_n(dim);
    } else if (kind == "elm") {
        out.is_elm = true;
        out.elm.hidden_weights = Matrix(dim, hidden);
        out.elm.hidden_weights.data = read_n(dim * hidden);
        out.elm.hidden_biases = read_n(hidden);
        out.elm.output_weights = read_n(hidden);
    } else {
        throw InvalidInput("load_model: unknown model kind '" + kind + "'");
    }
    return out;
}

inline void save_model_file(const LogisticModel& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw InvalidInput("cannot open for write: " + path);
    save_model(m, os);
}

inline void save_model_file(const ElmModel& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw InvalidInput("cannot open for write: " + path);
    save_model(m, os);
}

inline LoadedModel load_model_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidInput("cannot open model file: " + path);
    return load_model(is);
}

}  // namespace rmee
