#pragma once

// Training loop for the MLP, DAN, CORAL and CDAN objectives, evaluation
// metrics, grid search and raw-feature shift reports.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autodiff.hpp"
#include "copula.hpp"
#include "datasets.hpp"
#include "divergences.hpp"
#include "errors.hpp"
#include "nn.hpp"
#include "tensor.hpp"

namespace cdan {

enum class Method { mlp, dan, coral, cdan };

inline std::string to_string(Method m) {
    switch (m) {
        case Method::mlp: return "mlp";
        case Method::dan: return "dan";
        case Method::coral: return "coral";
        case Method::cdan: return "cdan";
    }
    return "?";
}

inline Method method_from_string(const std::string& s) {
    if (s == "mlp") return Method::mlp;
    if (s == "dan") return Method::dan;
    if (s == "coral") return Method::coral;
    if (s == "cdan") return Method::cdan;
    throw ConfigError("method: unknown '" + s + "' (expected mlp, dan, coral or cdan)");
}

struct TrainConfig {
    Method method = Method::cdan;
    double alpha = 1.0;
    double beta = 1.0;
    double lambda = 0.0;
    double learning_rate = 0.01;
    std::size_t max_epochs = 100;
    std::size_t early_stop_patience = 20;  // 0 disables early stopping
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
    DivergenceKind h1 = DivergenceKind::mmd();
    DependenceDivergenceKind h2{};
    double tanh_a = kDefaultTanhA;
    double holdout_fraction = 0.1;
    LayerSpec model;

    void validate() const {
        auto field = [](const std::string& name, const std::string& msg) {
            throw ContractViolation("TrainConfig." + name + ": " + msg);
        };
        auto nonneg = [&](const char* name, double v) {
            if (!(v >= 0.0) || !std::isfinite(v)) field(name, "must be finite and >= 0");
        };
        nonneg("alpha", alpha);
        nonneg("beta", beta);
        nonneg("lambda", lambda);
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            field("learning_rate", "must be finite and >= 0");
        if (max_epochs < 1) field("max_epochs", "must be >= 1");
        if (batch_size < 2 || batch_size % 2 != 0) field("batch_size", "must be even and >= 2");
        if (!(tanh_a > 0.0)) field("tanh_a", "must be > 0");
        if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) field("holdout_fraction", "must lie in [0, 1)");
        try {
            h1.validate();
        } catch (const ContractViolation& e) {
            field("h1", e.what());
        }
        if (!h2.has_closed_form()) field("h2", "training needs a closed-form kind (kl, chi2, w2, mmd)");
        try {
            model.validate();
        } catch (const ContractViolation& e) {
            field("model", e.what());
        }
        const auto m = to_string(method);
        switch (method) {
            case Method::mlp:
                if (alpha != 0.0) field("alpha", "must be 0 for method mlp");
                if (beta != 0.0) field("beta", "must be 0 for method mlp");
                if (lambda != 0.0) field("lambda", "must be 0 for method mlp");
                break;
            case Method::dan:
            case Method::coral:
                if (alpha != 0.0) field("alpha", "must be 0 for method " + m);
                if (beta != 0.0) field("beta", "must be 0 for method " + m);
                break;
            case Method::cdan:
                if (lambda != 0.0) field("lambda", "must be 0 for method cdan");
                if (model.feature_dim() < 2) field("model", "cdan needs a feature dimension >= 2");
                break;
        }
    }
};

/// Defaults for the regularizer weights of each method: cdan alpha = beta
/// = 1, dan/coral lambda = 1, everything else 0.
inline void apply_method_defaults(TrainConfig& c) {
    c.alpha = c.method == Method::cdan ? 1.0 : 0.0;
    c.beta = c.method == Method::cdan ? 1.0 : 0.0;
    c.lambda = (c.method == Method::dan || c.method == Method::coral) ? 1.0 : 0.0;
}

struct TraceEntry {
    std::size_t epoch = 0;
    double loss = 0.0;        // supervised + md + cd
    double supervised = 0.0;
    double md = 0.0;          // weighted marginal / baseline penalty term
    double cd = 0.0;          // weighted copula distance term
    double val = 0.0;         // source hold-out loss
    double best_val = 0.0;

    bool operator==(const TraceEntry&) const = default;
};

struct TrainResult {
    ModelParams params;
    std::vector<TraceEntry> trace;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

// ------------------------------------------------------------------- Adam

class Adam {
public:
    Adam(const std::vector<Tensor>& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        for (const auto& p : params) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }

    std::vector<Tensor> step(const std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw ContractViolation("Adam::step: parameter count changed");
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        std::vector<Tensor> out;
        out.reserve(params.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& m = m_[k];
            auto& v = v_[k];
            std::vector<double> p(params[k].data().begin(), params[k].data().end());
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double g = grads[k][i];
                m[i] = b1_ * m[i] + (1.0 - b1_) * g;
                v[i] = b2_ * v[i] + (1.0 - b2_) * g * g;
                p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
            }
            out.emplace_back(params[k].rows(), params[k].cols(), std::move(p));
        }
        return out;
    }

private:
    double lr_, b1_, b2_, eps_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finaliser
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[static_cast<std::size_t>(rng() % i)]);
    return p;
}

inline std::size_t even_at_most(std::size_t cap, std::size_t n) {
    const auto b = std::min(cap, n);
    return b - b % 2;
}

struct LossTerms {
    ad::Var total, supervised;
    double md = 0.0, cd = 0.0;
};

inline ad::Var supervised_loss(const BoundModel& bm, const ad::Var& fs, const Dataset& src) {
    if (bm.spec.output == OutputKind::classification) {
        const auto y = src.class_labels();
        return cross_entropy_loss(bm, fs, y);
    }
    return mse_loss(bm, fs, *src.labels);
}

// Objective on one (source batch, target batch) pair.
inline LossTerms objective(ad::Graph& g, const BoundModel& bm, const Dataset& src,
                           const Tensor* tgt, const TrainConfig& cfg) {
    LossTerms t;
    auto fs = extract_features(bm, g.constant(src.features));
    t.supervised = supervised_loss(bm, fs, src);
    t.total = t.supervised;
    const bool use_md = (cfg.method == Method::cdan && cfg.alpha > 0.0) ||
                        ((cfg.method == Method::dan || cfg.method == Method::coral) && cfg.lambda > 0.0);
    const bool use_cd = cfg.method == Method::cdan && cfg.beta > 0.0;
    if (!(use_md || use_cd) || tgt == nullptr) return t;

    auto ft = extract_features(bm, g.constant(*tgt));
    if (use_md) {
        ad::Var md;
        if (cfg.method == Method::dan) {
            md = ad::scale(ad::mmd_squared(fs, ft, median_heuristic_bandwidths(fs.value(), ft.value())),
                           cfg.lambda);
        } else if (cfg.method == Method::coral) {
            md = ad::scale(coral_penalty(fs, ft), cfg.lambda);
        } else {
            for (std::size_t i = 0; i < fs.cols(); ++i) {
                auto term = marginal_divergence(ad::col(fs, i), ad::col(ft, i), cfg.h1);
                md = (i == 0) ? term : md + term;
            }
            md = ad::scale(md, cfg.alpha);
        }
        t.md = md.item();
        t.total = t.total + md;
    }
    if (use_cd) {
        auto cd = copula_distance(fs, ft, PairWeights::uniform(fs.cols(), cfg.beta), cfg.h2, cfg.tanh_a);
        t.cd = cd.item();
        t.total = t.total + cd;
    }
    return t;
}

inline double holdout_loss(const ModelParams& p, const Dataset& ds) {
    ad::Graph g;
    auto bm = bind(g, p);
    return supervised_loss(bm, extract_features(bm, g.constant(ds.features)), ds).item();
}

}  // namespace detail

/// Minibatch training of the configured objective with Adam. A fraction
/// of the source rows is held out to monitor the supervised loss; the
/// returned parameters are those of the best hold-out epoch.
inline TrainResult train(const Dataset& source, const Dataset& target, const TrainConfig& cfg) {
    cfg.validate();
    source.check();
    target.check();
    if (!source.labeled()) throw ContractViolation("train: source dataset must be labeled");
    if (target.dim() != source.dim())
        throw ContractViolation("train: source has " + std::to_string(source.dim()) +
                                " features, target has " + std::to_string(target.dim()));
    if (cfg.model.input_dim != source.dim())
        throw ContractViolation("TrainConfig.model: input_dim " + std::to_string(cfg.model.input_dim) +
                                " does not match " + std::to_string(source.dim()) + " features");

    const auto perm = detail::permutation(source.size(), detail::mix_seed(cfg.seed, 1));
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(source.size())));
    std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    const Dataset train_set = source.subset(train_idx);
    const std::optional<Dataset> val_set =
        n_val > 0 ? std::optional<Dataset>(source.subset(val_idx)) : std::nullopt;

    const auto bs = detail::even_at_most(cfg.batch_size, train_set.size());
    const auto bt = detail::even_at_most(cfg.batch_size, target.size());
    if (bs < 2) throw ContractViolation("train: need at least 2 source training rows");
    if (bt < 2) throw ContractViolation("train: need at least 2 target rows");

    ModelParams params = init_params(cfg.model, cfg.seed);
    Adam opt(params.flatten(), cfg.learning_rate);
    TrainResult result{params, {}, 0, false};
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    const auto target_seed = detail::mix_seed(cfg.seed, 2);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto sb = batch_iterator(train_set.size(), bs, cfg.seed, epoch);
        const auto tb = batch_iterator(target.size(), bt, target_seed, epoch);
        TraceEntry e;
        e.epoch = epoch;
        for (std::size_t b = 0; b < sb.size(); ++b) {
            try {
                const Dataset src = train_set.subset(sb[b]);
                const Tensor tgt = target.features.select_rows(tb[b % tb.size()]);
                ad::Graph g;
                auto bm = bind(g, params);
                auto terms = detail::objective(g, bm, src, &tgt, cfg);
                const double loss = terms.total.item();
                if (!std::isfinite(loss)) throw DomainError("loss is not finite");
                g.backward(terms.total);
                std::vector<Tensor> grads;
                for (const auto& leaf : bm.leaves) grads.push_back(g.grad(leaf));
                params = ModelParams::unflatten(params.spec, opt.step(params.flatten(), grads));
                e.loss += loss;
                e.supervised += terms.supervised.item();
                e.md += terms.md;
                e.cd += terms.cd;
            } catch (const DomainError& err) {
                throw DomainError("train: epoch " + std::to_string(epoch) + ", batch " +
                                  std::to_string(b) + ": " + err.what());
            }
        }
        const double nb = static_cast<double>(sb.size());
        e.loss /= nb;
        e.supervised /= nb;
        e.md /= nb;
        e.cd /= nb;
        e.val = val_set ? detail::holdout_loss(params, *val_set) : e.supervised;
        if (!std::isfinite(e.val))
            throw DomainError("train: epoch " + std::to_string(epoch) + ": hold-out loss is not finite");
        if (e.val < best) {
            best = e.val;
            result.params = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
        }
        e.best_val = best;
        result.trace.push_back(e);
        if (cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience) {
            result.stopped_early = true;
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------- metrics

/// Mann-Whitney AUC of `scores` for class 1 against class 0, ties half.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ContractViolation("auc: scores and labels differ in length");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0, n1 = 0.0, n0 = 0.0;
    for (std::size_t s = 0; s < idx.size();) {
        auto e = s;
        while (e < idx.size() && scores[idx[e]] == scores[idx[s]]) ++e;
        const double mid = 0.5 * static_cast<double>(s + 1 + e);  // average 1-based rank
        for (auto k = s; k < e; ++k) {
            const int y = labels[idx[k]];
            if (y != 0 && y != 1) throw ContractViolation("auc: labels must be 0 or 1");
            if (y == 1) {
                rank_sum += mid;
                n1 += 1.0;
            } else {
                n0 += 1.0;
            }
        }
        s = e;
    }
    if (n1 == 0.0 || n0 == 0.0) throw DomainError("auc: undefined for a single-class dataset");
    return (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

struct ClassificationMetrics {
    double accuracy = 0.0;
    double auc = 0.0;
};

inline ClassificationMetrics evaluate_classification(const ModelParams& p, const Dataset& ds) {
    if (p.spec.output != OutputKind::classification)
        throw ContractViolation("evaluate_classification: model has a regression head");
    const auto y = ds.class_labels();
    const auto probs = predict(p, ds.features);
    const auto l = probs.cols();
    std::size_t correct = 0;
    std::vector<double> score(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < l; ++c)
            if (probs(r, c) > probs(r, best)) best = c;
        correct += static_cast<int>(best) == y[r];
        score[r] = probs(r, 1 % l);
    }
    ClassificationMetrics m;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(ds.size());
    if (l != 2) throw ContractViolation("evaluate_classification: AUC needs binary labels");
    m.auc = auc(score, y);
    return m;
}

struct RegressionMetrics {
    double rmse = 0.0;
    double r2 = 0.0;
    double re = 0.0;
};

/// RMSE and R2 on the given (normalised) scale; RE on the scale obtained
/// through `scaler.inverse_label`.
inline RegressionMetrics regression_metrics(std::span<const double> pred, std::span<const double> y,
                                            const MinMaxScaler& scaler) {
    if (pred.size() != y.size() || y.empty())
        throw ContractViolation("regression_metrics: need equal, nonzero lengths");
    const double n = static_cast<double>(y.size());
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sse = 0.0, sst = 0.0, re = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sse += (pred[i] - y[i]) * (pred[i] - y[i]);
        sst += (y[i] - mean) * (y[i] - mean);
        const double yo = scaler.inverse_label(y[i]);
        const double po = scaler.inverse_label(pred[i]);
        re += std::abs(po - yo) / std::max(std::abs(yo), 1e-12);
    }
    if (sst == 0.0) throw DomainError("regression_metrics: R2 undefined for constant targets");
    return {std::sqrt(sse / n), 1.0 - sse / sst, re / n};
}

inline RegressionMetrics evaluate_regression(const ModelParams& p, const Dataset& ds,
                                             const MinMaxScaler& scaler) {
    if (p.spec.output != OutputKind::regression)
        throw ContractViolation("evaluate_regression: model has a classification head");
    if (!ds.labels) throw ContractViolation("evaluate_regression: dataset has no labels");
    const auto pred = predict(p, ds.features);
    return regression_metrics(pred.data(), *ds.labels, scaler);
}

// ------------------------------------------------------- learned features

struct FeatureShift {
    double md = 0.0;  // sum of per-dimension H1 values
    double cd = 0.0;  // copula distance with unit weights
};

/// Shift between learned source and target features. At most `cap` rows
/// per domain (a seeded subsample) enter the estimators.
inline FeatureShift learned_feature_shift(const ModelParams& p, const Dataset& source,
                                          const Dataset& target, const TrainConfig& cfg,
                                          std::size_t cap = 1024) {
    auto sample = [&](const Dataset& ds, std::uint64_t stream) {
        if (ds.size() <= cap) return extract_features(p, ds.features);
        auto perm = detail::permutation(ds.size(), detail::mix_seed(cfg.seed, stream));
        perm.resize(cap);
        return extract_features(p, ds.features.select_rows(perm));
    };
    const auto fs = sample(source, 3), ft = sample(target, 4);
    FeatureShift s;
    for (std::size_t i = 0; i < fs.cols(); ++i) s.md += marginal_divergence(fs.col(i), ft.col(i), cfg.h1);
    if (fs.cols() >= 2)
        s.cd = copula_distance(fs, ft, PairWeights::uniform(fs.cols(), 1.0), cfg.h2, cfg.tanh_a);
    return s;
}

// ---------------------------------------------------------------- reports

/// Source, fully labeled target (labels are withheld from training) and,
/// for regression tasks, the scaler used to normalise both.
struct TaskData {
    Dataset source;
    Dataset target;
    std::optional<MinMaxScaler> scaler;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::map<std::string, double> metrics;
    std::vector<TraceEntry> trace;
};

struct Summary {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for one seed
};

struct MetricsReport {
    std::string task;
    TrainConfig config;
    std::vector<SeedResult> per_seed;
    std::map<std::string, Summary> aggregate;

    void recompute_aggregate() {
        aggregate.clear();
        if (per_seed.empty()) return;
        for (const auto& [key, _] : per_seed.front().metrics) {
            std::vector<double> v;
            for (const auto& s : per_seed) v.push_back(s.metrics.at(key));
            const double n = static_cast<double>(v.size());
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            aggregate[key] = {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
        }
    }
};

using TaskFactory = std::function<TaskData(std::uint64_t seed)>;

/// Trains one model per seed and evaluates it on the target domain.
inline MetricsReport run_experiment(const std::string& task, const TaskFactory& make_task,
                                    const TrainConfig& base, std::span<const std::uint64_t> seeds) {
    if (seeds.empty()) throw ContractViolation("run_experiment: no seeds");
    MetricsReport rep{task, base, {}, {}};
    for (auto seed : seeds) {
        TrainConfig cfg = base;
        cfg.seed = seed;
        const TaskData data = make_task(seed);
        const auto res = train(data.source, data.target.without_labels(), cfg);
        SeedResult sr{seed, {}, res.trace};
        if (cfg.model.output == OutputKind::classification) {
            const auto m = evaluate_classification(res.params, data.target);
            sr.metrics["accuracy"] = m.accuracy;
            sr.metrics["auc"] = m.auc;
        } else {
            if (!data.scaler) throw ContractViolation("run_experiment: regression task needs a scaler");
            const auto m = evaluate_regression(res.params, data.target, *data.scaler);
            sr.metrics["rmse"] = m.rmse;
            sr.metrics["r2"] = m.r2;
            sr.metrics["re"] = m.re;
        }
        const auto shift = learned_feature_shift(res.params, data.source, data.target, cfg);
        sr.metrics["feature_md"] = shift.md;
        sr.metrics["feature_cd"] = shift.cd;
        sr.metrics["val"] = res.trace.empty() ? 0.0 : res.trace.back().best_val;
        sr.metrics["epochs"] = static_cast<double>(res.trace.size());
        rep.per_seed.push_back(std::move(sr));
    }
    rep.recompute_aggregate();
    return rep;
}

struct GridPoint {
    double alpha = 0.0;
    double beta = 0.0;
    MetricsReport report;
};

/// Cartesian (alpha, beta) grid, sorted by mean source hold-out loss
/// (ascending, ties keep grid order).
inline std::vector<GridPoint> grid_search(const std::string& task, const TaskFactory& make_task,
                                          const TrainConfig& base, std::span<const double> alphas,
                                          std::span<const double> betas,
                                          std::span<const std::uint64_t> seeds) {
    if (alphas.empty() || betas.empty() || seeds.empty())
        throw ContractViolation("grid_search: alphas, betas and seeds must be nonempty");
    std::vector<GridPoint> out;
    for (double a : alphas)
        for (double b : betas) {
            TrainConfig cfg = base;
            cfg.alpha = a;
            cfg.beta = b;
            try {
                out.push_back({a, b, run_experiment(task, make_task, cfg, seeds)});
            } catch (const std::exception& e) {
                throw std::runtime_error("grid point (alpha=" + std::to_string(a) +
                                         ", beta=" + std::to_string(b) + "): " + e.what());
            }
        }
    std::stable_sort(out.begin(), out.end(), [](const GridPoint& x, const GridPoint& y) {
        return x.report.aggregate.at("val").mean < y.report.aggregate.at("val").mean;
    });
    return out;
}

struct ShiftReport {
    std::vector<double> md;    // per feature
    std::optional<double> cd;  // needs >= 2 features
};

/// Marginal and copula shift between two raw datasets.
inline ShiftReport shift_report(const Dataset& a, const Dataset& b, const DivergenceKind& h1,
                                const DependenceDivergenceKind& h2, const PairWeights& beta,
                                double tanh_a = kDefaultTanhA) {
    if (a.dim() != b.dim())
        throw ContractViolation("shift_report: feature dimension " + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()));
    ShiftReport r;
    for (std::size_t i = 0; i < a.dim(); ++i)
        r.md.push_back(marginal_divergence(a.features.col(i), b.features.col(i), h1));
    if (a.dim() >= 2) r.cd = copula_distance(a.features, b.features, beta, h2, tanh_a);
    return r;
}

// ------------------------------------------------------------------- JSON

inline nlohmann::json config_to_json(const TrainConfig& c) {
    return {{"method", to_string(c.method)},
            {"alpha", c.alpha},
            {"beta", c.beta},
            {"lambda", c.lambda},
            {"learning_rate", c.learning_rate},
            {"max_epochs", c.max_epochs},
            {"early_stop_patience", c.early_stop_patience},
            {"batch_size", c.batch_size},
            {"seed", c.seed},
            {"h1", {{"kind", to_string(c.h1.tag)}, {"bandwidths", c.h1.bandwidths}, {"bins", c.h1.bins}}},
            {"h2", {{"kind", to_string(c.h2.tag)}, {"alpha", c.h2.alpha}, {"mc_samples", c.h2.mc_samples}}},
            {"tanh_a", c.tanh_a},
            {"holdout_fraction", c.holdout_fraction},
            {"model", layer_spec_to_json(c.model)}};
}

/// Overlays the keys present in `j` onto `c`. Unknown keys are rejected.
inline void config_update_from_json(TrainConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    auto get = [&](const std::string& key, auto& out) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(out);
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config." + key + ": wrong type");
        }
    };
    static const std::vector<std::string> known = {
        "method", "alpha", "beta", "lambda", "learning_rate", "max_epochs", "early_stop_patience",
        "batch_size", "seed", "h1", "h2", "tanh_a", "holdout_fraction", "model"};
    for (const auto& [k, _] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ConfigError("config." + k + ": unknown field");
    if (j.contains("method")) {
        std::string m;
        get("method", m);
        c.method = method_from_string(m);
    }
    get("alpha", c.alpha);
    get("beta", c.beta);
    get("lambda", c.lambda);
    get("learning_rate", c.learning_rate);
    get("max_epochs", c.max_epochs);
    get("early_stop_patience", c.early_stop_patience);
    get("batch_size", c.batch_size);
    get("seed", c.seed);
    get("tanh_a", c.tanh_a);
    get("holdout_fraction", c.holdout_fraction);
    try {
        if (j.contains("h1")) {
            const auto& h = j.at("h1");
            c.h1.tag = marginal_kind_from_string(h.at("kind").get<std::string>());
            c.h1.bandwidths = h.value("bandwidths", std::vector<double>{});
            c.h1.bins = h.value("bins", std::size_t{32});
        }
        if (j.contains("h2")) {
            const auto& h = j.at("h2");
            c.h2.tag = dependence_kind_from_string(h.at("kind").get<std::string>());
            c.h2.alpha = h.value("alpha", 0.5);
            c.h2.mc_samples = h.value("mc_samples", std::size_t{1'000'000});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config.h1/h2: ") + e.what());
    }
    if (j.contains("model")) c.model = layer_spec_from_json(j.at("model"));
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    config_update_from_json(c, j);
    return c;
}

inline nlohmann::json trace_to_json(const std::vector<TraceEntry>& trace) {
    auto arr = nlohmann::json::array();
    for (const auto& e : trace)
        arr.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"supervised", e.supervised},
                       {"md", e.md}, {"cd", e.cd}, {"val", e.val}, {"best_val", e.best_val}});
    return arr;
}

inline nlohmann::json report_to_json(const MetricsReport& r, bool with_traces = false) {
    auto per_seed = nlohmann::json::array();
    for (const auto& s : r.per_seed) {
        nlohmann::json e = {{"seed", s.seed}, {"metrics", s.metrics}};
        if (with_traces) e["trace"] = trace_to_json(s.trace);
        per_seed.push_back(std::move(e));
    }
    nlohmann::json agg = nlohmann::json::object();
    for (const auto& [k, v] : r.aggregate) agg[k] = {{"mean", v.mean}, {"std", v.std}};
    return {{"task", r.task},
            {"method", to_string(r.config.method)},
            {"config", config_to_json(r.config)},
            {"per_seed", per_seed},
            {"aggregate", agg},
            {"trace", r.per_seed.empty() ? nlohmann::json::array() : trace_to_json(r.per_seed.front().trace)}};
}

}  // namespace cdan
