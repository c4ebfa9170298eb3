#pragma once

// Fully connected feature extractor F(x) and prediction head D(F(x)),
// supervised losses and a JSON checkpoint format.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autodiff.hpp"
#include "errors.hpp"
#include "tensor.hpp"

namespace cdan {

enum class Activation { relu, tanh };
enum class OutputKind { classification, regression };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }
inline std::string to_string(OutputKind o) {
    return o == OutputKind::classification ? "classification" : "regression";
}

struct LayerSpec {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden = {8, 8};
    Activation activation = Activation::relu;
    OutputKind output = OutputKind::classification;
    std::size_t classes = 2;

    std::size_t output_dim() const { return output == OutputKind::classification ? classes : 1; }
    std::size_t feature_dim() const { return hidden.empty() ? 0 : hidden.back(); }

    void validate() const {
        if (input_dim < 1) throw ContractViolation("LayerSpec.input_dim: must be >= 1");
        if (hidden.empty()) throw ContractViolation("LayerSpec.hidden: need at least one hidden layer");
        for (auto u : hidden)
            if (u < 1) throw ContractViolation("LayerSpec.hidden: layer widths must be >= 1");
        if (output == OutputKind::classification && classes < 2)
            throw ContractViolation("LayerSpec.classes: need >= 2 classes");
    }
};

struct DenseLayer {
    Tensor weight;  // fan_in x fan_out
    Tensor bias;    // 1 x fan_out
};

struct ModelParams {
    LayerSpec spec;
    std::vector<DenseLayer> extractor;
    DenseLayer head;

    std::size_t feature_dim() const { return spec.feature_dim(); }

    /// Tensors in a fixed order: extractor (W, b) pairs, then head W, b.
    std::vector<Tensor> flatten() const {
        std::vector<Tensor> out;
        for (const auto& l : extractor) {
            out.push_back(l.weight);
            out.push_back(l.bias);
        }
        out.push_back(head.weight);
        out.push_back(head.bias);
        return out;
    }

    static ModelParams unflatten(const LayerSpec& spec, std::vector<Tensor> t) {
        if (t.size() != 2 * (spec.hidden.size() + 1))
            throw ContractViolation("ModelParams: wrong tensor count for spec");
        ModelParams p;
        p.spec = spec;
        for (std::size_t l = 0; l < spec.hidden.size(); ++l)
            p.extractor.push_back({std::move(t[2 * l]), std::move(t[2 * l + 1])});
        p.head = {std::move(t[t.size() - 2]), std::move(t.back())};
        p.check();
        return p;
    }

    void check() const {
        spec.validate();
        std::size_t fan_in = spec.input_dim;
        auto expect = [&](const DenseLayer& l, std::size_t out, const std::string& what) {
            if (l.weight.rows() != fan_in || l.weight.cols() != out)
                throw ShapeError(what + ".weight", l.weight.rows(), l.weight.cols(), fan_in, out);
            if (l.bias.rows() != 1 || l.bias.cols() != out)
                throw ShapeError(what + ".bias", l.bias.rows(), l.bias.cols(), 1, out);
            fan_in = out;
        };
        if (extractor.size() != spec.hidden.size())
            throw ContractViolation("ModelParams: extractor depth does not match spec");
        for (std::size_t l = 0; l < extractor.size(); ++l)
            expect(extractor[l], spec.hidden[l], "extractor[" + std::to_string(l) + "]");
        expect(head, spec.output_dim(), "head");
    }

    bool operator==(const ModelParams& o) const { return flatten() == o.flatten(); }
};

/// Glorot-uniform weights, zero biases.
inline ModelParams init_params(const LayerSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    auto dense = [&rng](std::size_t fan_in, std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        std::vector<double> w(fan_in * fan_out);
        for (auto& x : w) x = u(rng);
        return DenseLayer{Tensor(fan_in, fan_out, std::move(w)), Tensor(1, fan_out, 0.0)};
    };
    ModelParams p;
    p.spec = spec;
    std::size_t fan_in = spec.input_dim;
    for (auto units : spec.hidden) {
        p.extractor.push_back(dense(fan_in, units));
        fan_in = units;
    }
    p.head = dense(fan_in, spec.output_dim());
    return p;
}

/// Parameters placed as leaves of a graph.
struct BoundModel {
    LayerSpec spec;
    std::vector<ad::Var> leaves;  // same order as ModelParams::flatten()

    ad::Var weight(std::size_t layer) const { return leaves[2 * layer]; }
    ad::Var bias(std::size_t layer) const { return leaves[2 * layer + 1]; }
    std::size_t depth() const { return spec.hidden.size(); }
};

inline BoundModel bind(ad::Graph& g, const ModelParams& p) {
    BoundModel m{p.spec, {}};
    for (auto& t : p.flatten()) m.leaves.push_back(g.leaf(std::move(t)));
    return m;
}

namespace detail {

inline ad::Var activate(const ad::Var& x, Activation a) {
    return a == Activation::relu ? ad::relu(x) : ad::tanh(x);
}

}  // namespace detail

/// Output of the last hidden layer (N x m).
inline ad::Var extract_features(const BoundModel& m, const ad::Var& x) {
    if (x.cols() != m.spec.input_dim)
        throw ShapeError("extract_features", x.rows(), x.cols(), x.rows(), m.spec.input_dim);
    ad::Var h = x;
    for (std::size_t l = 0; l < m.depth(); ++l)
        h = detail::activate(ad::add_bias(ad::matmul(h, m.weight(l)), m.bias(l)), m.spec.activation);
    return h;
}

/// Logits (classification) or predictions (regression, N x 1).
inline ad::Var head_forward(const BoundModel& m, const ad::Var& features) {
    const auto l = m.depth();
    return ad::add_bias(ad::matmul(features, m.weight(l)), m.bias(l));
}

inline Tensor extract_features(const ModelParams& p, const Tensor& x) {
    ad::Graph g;
    auto m = bind(g, p);
    return extract_features(m, g.constant(x)).value();
}

inline Tensor predict(const ModelParams& p, const Tensor& x) {
    ad::Graph g;
    auto m = bind(g, p);
    auto out = head_forward(m, extract_features(m, g.constant(x)));
    if (p.spec.output == OutputKind::classification) out = ad::softmax_rows(out);
    return out.value();
}

inline constexpr double kProbFloor = 1e-12;

/// Mean cross-entropy of the softmax head; labels are 0-based class indices.
inline ad::Var cross_entropy_loss(const BoundModel& m, const ad::Var& features,
                                  std::span<const int> labels) {
    if (m.spec.output != OutputKind::classification)
        throw ContractViolation("cross_entropy_loss: model has a regression head");
    const auto n = features.rows(), l = m.spec.classes;
    if (labels.size() != n)
        throw ContractViolation("cross_entropy_loss: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " rows");
    if (n == 0) throw ContractViolation("cross_entropy_loss: empty batch");
    std::vector<double> onehot(n * l, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= l)
            throw ContractViolation("cross_entropy_loss: label " + std::to_string(labels[i]) +
                                    " outside [0, " + std::to_string(l) + ")");
        onehot[i * l + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    auto& g = features.graph();
    auto probs = ad::softmax_rows(head_forward(m, features));
    auto ll = ad::log(ad::clamp_min(probs, kProbFloor)) * g.constant(Tensor(n, l, std::move(onehot)));
    return ad::scale(ad::sum(ll), -1.0 / static_cast<double>(n));
}

inline ad::Var mse_loss(const BoundModel& m, const ad::Var& features, std::span<const double> targets) {
    if (m.spec.output != OutputKind::regression)
        throw ContractViolation("mse_loss: model has a classification head");
    const auto n = features.rows();
    if (targets.size() != n)
        throw ContractViolation("mse_loss: " + std::to_string(targets.size()) + " targets for " +
                                std::to_string(n) + " rows");
    if (n == 0) throw ContractViolation("mse_loss: empty batch");
    auto& g = features.graph();
    auto y = g.constant(Tensor::column({targets.begin(), targets.end()}));
    return ad::mean(ad::square(head_forward(m, features) - y));
}

// ------------------------------------------------------------- checkpoints

inline constexpr const char* kCheckpointFormat = "cdan-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json layer_spec_to_json(const LayerSpec& s) {
    return {{"input_dim", s.input_dim},
            {"hidden", s.hidden},
            {"activation", to_string(s.activation)},
            {"output", to_string(s.output)},
            {"classes", s.classes}};
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
    LayerSpec s;
    try {
        s.input_dim = j.at("input_dim").get<std::size_t>();
        s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
        const auto act = j.at("activation").get<std::string>();
        if (act != "relu" && act != "tanh") throw ConfigError("model.activation: unknown '" + act + "'");
        s.activation = act == "relu" ? Activation::relu : Activation::tanh;
        const auto out = j.at("output").get<std::string>();
        if (out != "classification" && out != "regression")
            throw ConfigError("model.output: unknown '" + out + "'");
        s.output = out == "classification" ? OutputKind::classification : OutputKind::regression;
        s.classes = j.value("classes", std::size_t{2});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    return s;
}

inline nlohmann::json params_to_json(const ModelParams& p) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& t : p.flatten())
        tensors.push_back({{"rows", t.rows()}, {"cols", t.cols()},
                           {"data", std::vector<double>(t.data().begin(), t.data().end())}});
    return {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"spec", layer_spec_to_json(p.spec)},
            {"tensors", tensors}};
}

inline ModelParams params_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat)
            throw ConfigError("checkpoint: not a model checkpoint");
        const int v = j.at("version").get<int>();
        if (v != kCheckpointVersion)
            throw ConfigError("checkpoint: unsupported version " + std::to_string(v));
        const auto spec = layer_spec_from_json(j.at("spec"));
        std::vector<Tensor> tensors;
        for (const auto& t : j.at("tensors"))
            tensors.emplace_back(t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>(),
                                 t.at("data").get<std::vector<double>>());
        return ModelParams::unflatten(spec, std::move(tensors));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
}

}  // namespace cdan
