#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cdan/tasks.hpp"
#include "cdan/trainer.hpp"

using namespace cdan;

namespace {

TrainConfig quick(Method m, std::size_t epochs = 5) {
    auto c = moons_config(m);
    c.max_epochs = epochs;
    c.batch_size = 64;
    return c;
}

TaskData small_moons(std::uint64_t seed, double stretch = 3.0) { return moons_task(stretch, seed, 0.05, 64); }

Dataset gaussian_pairs(std::size_t n, double mean2, double rho, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::vector<double> v(2 * n);
    for (std::size_t r = 0; r < n; ++r) {
        const double a = z(rng), b = z(rng);
        v[2 * r] = a;
        v[2 * r + 1] = mean2 + rho * a + std::sqrt(1 - rho * rho) * b;
    }
    return {Tensor(n, 2, std::move(v)), std::nullopt};
}

}  // namespace

TEST(Train, ZeroWeightCdanMatchesMlp) {
    const auto d = small_moons(1);
    auto cdan = quick(Method::cdan);
    cdan.alpha = cdan.beta = 0.0;
    const auto a = train(d.source, d.target.without_labels(), cdan);
    const auto b = train(d.source, d.target.without_labels(), quick(Method::mlp));
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_TRUE(a.params == b.params);
}

TEST(Train, ZeroLearningRateKeepsInitialParams) {
    const auto d = small_moons(2);
    auto c = quick(Method::cdan, 1);
    c.learning_rate = 0.0;
    const auto r = train(d.source, d.target.without_labels(), c);
    EXPECT_TRUE(r.params == init_params(c.model, c.seed));
}

TEST(Train, DeterministicPerSeed) {
    const auto d = small_moons(3);
    for (auto m : {Method::cdan, Method::dan, Method::coral}) {
        auto c = quick(m);
        c.seed = 17;
        const auto a = train(d.source, d.target.without_labels(), c);
        const auto b = train(d.source, d.target.without_labels(), c);
        EXPECT_EQ(a.trace, b.trace) << to_string(m);
        EXPECT_TRUE(a.params == b.params) << to_string(m);
        c.seed = 18;
        EXPECT_NE(train(d.source, d.target.without_labels(), c).trace, a.trace) << to_string(m);
    }
}

TEST(Train, LossDecompositionAndBestSoFar) {
    const auto d = small_moons(4);
    for (auto m : {Method::cdan, Method::dan, Method::coral, Method::mlp}) {
        auto c = quick(m, 30);
        c.early_stop_patience = 3;
        const auto r = train(d.source, d.target.without_labels(), c);
        ASSERT_FALSE(r.trace.empty());
        double prev = INFINITY;
        for (const auto& e : r.trace) {
            EXPECT_NEAR(e.loss, e.supervised + e.md + e.cd, 1e-12) << to_string(m) << " epoch " << e.epoch;
            EXPECT_LE(e.best_val, prev);
            EXPECT_LE(e.best_val, e.val);
            prev = e.best_val;
        }
        if (m == Method::mlp) {
            EXPECT_EQ(r.trace.back().md, 0.0);
            EXPECT_EQ(r.trace.back().cd, 0.0);
        }
        if (m == Method::cdan) {
            EXPECT_GT(r.trace.front().cd, 0.0);
        }
        if (r.stopped_early) {
            EXPECT_EQ(r.trace.size(), r.best_epoch + 3);
        }
    }
}

TEST(Train, MinibatchPenaltiesAreFinite) {
    const auto d = small_moons(5);
    for (auto h1 : {DivergenceKind::w1(), DivergenceKind::kl(16)})
        for (auto h2 : {DependenceKind::chi2, DependenceKind::wasserstein2, DependenceKind::mmd_gaussian_unit}) {
            auto c = quick(Method::cdan, 3);
            c.h1 = h1;
            c.h2.tag = h2;
            const auto r = train(d.source, d.target.without_labels(), c);
            EXPECT_TRUE(std::isfinite(r.trace.back().loss));
        }
}

TEST(Train, ConfigErrorsNameTheField) {
    const auto d = small_moons(6);
    auto c = quick(Method::cdan);
    c.model.hidden = {8, 1};
    try {
        train(d.source, d.target.without_labels(), c);
        FAIL() << "expected ContractViolation";
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find("TrainConfig.model"), std::string::npos) << e.what();
    }
    c = quick(Method::mlp);
    c.alpha = 1.0;
    EXPECT_THROW(train(d.source, d.target, c), ContractViolation);
    c = quick(Method::cdan);
    c.batch_size = 7;
    EXPECT_THROW(c.validate(), ContractViolation);
    c = quick(Method::cdan);
    c.lambda = 1.0;
    EXPECT_THROW(c.validate(), ContractViolation);
    c = quick(Method::cdan);
    c.h2.tag = DependenceKind::hellinger_mc;
    EXPECT_THROW(c.validate(), ContractViolation);
    EXPECT_THROW(method_from_string("dann"), ConfigError);
}

TEST(Train, FullCdanLossGradientMatchesFiniteDifferences) {
    // fixed kernel bandwidths so the penalty is a smooth function of the parameters
    const auto d = moons_task(3.0, 7, 0.05, 8);
    const Dataset src = d.source;
    const Tensor tgt = d.target.features;
    for (auto act : {Activation::relu, Activation::tanh}) {
        auto c = moons_config(Method::cdan);
        c.model.activation = act;
        c.h1 = DivergenceKind::mmd({0.5, 1.0});
        const auto p = init_params(c.model, 3);
        auto build = [&](ad::Graph& g, std::span<const ad::Var> v) {
            BoundModel bm{c.model, {v.begin(), v.end()}};
            return detail::objective(g, bm, src, &tgt, c).total;
        };
        EXPECT_LT(ad::finite_difference_check(build, p.flatten(), 1e-6), 1e-5) << to_string(act);
    }
}

TEST(Metrics, AucExamples) {
    const std::vector<int> y{1, 0, 1, 0};
    EXPECT_EQ(auc(std::vector<double>{0.9, 0.1, 0.8, 0.7}, y), 1.0);
    EXPECT_EQ(auc(std::vector<double>{0.9, 0.1, 0.8, 0.85}, y), 0.75);
    EXPECT_EQ(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y), 0.5);
    EXPECT_THROW(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DomainError);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u;
    std::vector<double> s(10'000);
    std::vector<int> lab(10'000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(rng);
        lab[i] = static_cast<int>(i % 2);
    }
    EXPECT_NEAR(auc(s, lab), 0.5, 0.02);
}

TEST(Metrics, RegressionExamples) {
    const MinMaxScaler identity;
    const std::vector<double> y{2, 4};
    const auto m = regression_metrics(std::vector<double>{3, 3}, y, identity);
    EXPECT_EQ(m.rmse, 1.0);
    EXPECT_EQ(m.r2, 0.0);
    EXPECT_EQ(m.re, 0.375);
    const auto p = regression_metrics(y, y, identity);
    EXPECT_EQ(p.rmse, 0.0);
    EXPECT_EQ(p.r2, 1.0);
    EXPECT_EQ(p.re, 0.0);
    EXPECT_THROW(regression_metrics(std::vector<double>{1, 2}, std::vector<double>{3, 3}, identity), DomainError);
    // RE on the original scale: labels 0..1 map back to 3..9
    MinMaxScaler s;
    s.label_min = 3.0;
    s.label_max = 9.0;
    // originals: y = {3, 9}, prediction = {6, 9} -> (3/3 + 0) / 2
    const auto q = regression_metrics(std::vector<double>{0.5, 1.0}, std::vector<double>{0.0, 1.0}, s).re;
    EXPECT_DOUBLE_EQ(q, 0.5);
}

TEST(Metrics, ClassificationOnTrainedMoons) {
    auto c = moons_config(Method::mlp);
    c.max_epochs = 40;
    const auto d = moons_task(1.0, 9);
    const auto r = train(d.source, d.target.without_labels(), c);
    const auto m = evaluate_classification(r.params, d.target);
    EXPECT_GT(m.accuracy, 0.9);
    EXPECT_GT(m.auc, 0.95);
}

TEST(Experiment, GridMatchesSingleRunAndIsDeterministic) {
    auto base = quick(Method::cdan, 3);
    const std::vector<std::uint64_t> seeds{1, 2};
    const TaskFactory f = [](std::uint64_t s) { return small_moons(s); };
    const std::vector<double> one{0.5};
    const auto grid = grid_search("moons", f, base, one, one, seeds);
    base.alpha = base.beta = 0.5;
    const auto single = run_experiment("moons", f, base, seeds);
    ASSERT_EQ(grid.size(), 1u);
    EXPECT_EQ(report_to_json(grid[0].report, true), report_to_json(single, true));

    const std::vector<double> dup{0.0, 0.0};
    const auto g2 = grid_search("moons", f, base, dup, one, seeds);
    ASSERT_EQ(g2.size(), 2u);
    EXPECT_EQ(g2[0].report.per_seed[0].metrics, g2[1].report.per_seed[0].metrics);
    EXPECT_THROW(grid_search("moons", f, base, {}, one, seeds), ContractViolation);
}

TEST(Experiment, AggregateIsRecomputable) {
    auto rep = run_experiment("moons", [](std::uint64_t s) { return small_moons(s); }, quick(Method::mlp, 2),
                              std::vector<std::uint64_t>{1, 2, 3});
    const auto before = rep.aggregate;
    rep.recompute_aggregate();
    for (const auto& [k, v] : before) {
        EXPECT_EQ(rep.aggregate.at(k).mean, v.mean);
        EXPECT_EQ(rep.aggregate.at(k).std, v.std);
    }
    const auto j = report_to_json(rep);
    for (const char* key : {"task", "method", "config", "per_seed", "aggregate", "trace"}) EXPECT_TRUE(j.contains(key));
    EXPECT_EQ(j["per_seed"].size(), 3u);
}

TEST(Config, JsonRoundTripAndUnknownFields) {
    auto c = wine_config(Method::dan);
    c.seed = 42;
    c.h1 = DivergenceKind::kl(12);
    c.h2.tag = DependenceKind::wasserstein2;
    const auto back = config_from_json(nlohmann::json::parse(config_to_json(c).dump()));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
    EXPECT_THROW(config_from_json(nlohmann::json{{"alpah", 1.0}}), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json{{"alpha", "one"}}), ConfigError);
    EXPECT_THROW(config_from_json(nlohmann::json{{"h1", {{"kind", "tv"}}}}), ConfigError);
}

TEST(ShiftReport, IdenticalDataGivesZeros) {
    const auto a = gaussian_pairs(500, 0.0, 0.4, 10);
    const auto r = shift_report(a, a, DivergenceKind::mmd(), DependenceDivergenceKind{}, PairWeights::uniform(2, 1.0));
    EXPECT_EQ(r.md, (std::vector<double>{0.0, 0.0}));
    ASSERT_TRUE(r.cd.has_value());
    EXPECT_EQ(*r.cd, 0.0);
    EXPECT_THROW(shift_report(a, Dataset{Tensor(3, 3)}, DivergenceKind::w1(), {}, PairWeights::uniform(2, 1.0)),
                 ContractViolation);
}

TEST(ShiftReport, SeparatesMarginalFromDependenceShift) {
    const std::size_t n = 100'000;
    const double r = std::sqrt(1.0 - std::exp(-1.0));
    const auto py = gaussian_pairs(n, 0.0, 0.0, 11);
    const auto px = gaussian_pairs(n, 1.0, 0.0, 12);
    const auto pz = gaussian_pairs(n, 0.0, r, 13);
    const DependenceDivergenceKind kl{};
    const auto w = PairWeights::uniform(2, 1.0);
    const auto xy = shift_report(px, py, DivergenceKind::w1(), kl, w);
    EXPECT_LT(xy.md[0], 0.02);
    EXPECT_NEAR(xy.md[1], 1.0, 0.02);  // W1 between N(1, 1) and N(0, 1)
    EXPECT_LT(*xy.cd, 0.02);
    const auto zy = shift_report(pz, py, DivergenceKind::w1(), kl, w);
    EXPECT_LT(zy.md[0], 0.02);
    EXPECT_LT(zy.md[1], 0.02);
    EXPECT_NEAR(*zy.cd, 0.5, 0.05);
}
