#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cdan/nn.hpp"

using namespace cdan;

namespace {

LayerSpec spec(std::vector<std::size_t> hidden, OutputKind out = OutputKind::classification,
               std::size_t in = 2) {
    LayerSpec s;
    s.input_dim = in;
    s.hidden = std::move(hidden);
    s.output = out;
    return s;
}

Tensor random_input(std::size_t n, std::size_t d, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, sd);
    std::vector<double> v(n * d);
    for (auto& x : v) x = z(rng);
    return Tensor(n, d, std::move(v));
}

// Model with zero extractor and a head that outputs the given logits row for every input.
ModelParams constant_logits(double l0, double l1) {
    auto p = init_params(spec({2}), 1);
    for (auto& l : p.extractor) l = {Tensor(l.weight.rows(), l.weight.cols(), 0.0), Tensor(1, l.bias.cols(), 0.0)};
    p.head = {Tensor(2, 2, 0.0), Tensor{{l0, l1}}};
    return p;
}

double ce(const ModelParams& p, const Tensor& x, std::vector<int> labels) {
    ad::Graph g;
    auto m = bind(g, p);
    return cross_entropy_loss(m, extract_features(m, g.constant(x)), labels).item();
}

double mse(const ModelParams& p, const Tensor& x, std::vector<double> y) {
    ad::Graph g;
    auto m = bind(g, p);
    return mse_loss(m, extract_features(m, g.constant(x)), y).item();
}

}  // namespace

TEST(Features, ZeroWeightsGiveZeroFeatures) {
    auto p = init_params(spec({8, 4}), 3);
    for (auto& l : p.extractor) l = {Tensor(l.weight.rows(), l.weight.cols(), 0.0), Tensor(1, l.bias.cols(), 0.0)};
    EXPECT_EQ(extract_features(p, random_input(5, 2, 1)), Tensor(5, 4, 0.0));
}

TEST(Features, IdentityLayerPassesThrough) {
    auto p = init_params(spec({3}, OutputKind::classification, 3), 3);
    p.extractor[0] = {Tensor::identity(3), Tensor(1, 3, 0.0)};
    const Tensor x{{0.5, 2.0, 0.0}, {1.0, 0.25, 7.0}};
    EXPECT_EQ(extract_features(p, x), x);
}

TEST(Features, DeterministicAndShapeChecked) {
    const auto p = init_params(spec({8, 4}), 11);
    const auto x = random_input(32, 2, 2);
    EXPECT_EQ(extract_features(p, x), extract_features(p, x));
    EXPECT_EQ(extract_features(p, x).cols(), 4u);
    EXPECT_THROW(extract_features(p, random_input(3, 5, 1)), ShapeError);
}

TEST(Init, GlorotBoundsAndZeroBiases) {
    const auto s = spec({8, 8, 8});
    const auto a = init_params(s, 7), b = init_params(s, 7);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == init_params(s, 8));
    const double bound = std::sqrt(6.0 / 16.0);
    for (std::size_t l = 1; l < 3; ++l) {
        ASSERT_EQ(a.extractor[l].weight.rows(), 8u);
        for (double w : a.extractor[l].weight.data()) EXPECT_LE(std::abs(w), bound);
    }
    for (const auto& l : a.extractor)
        for (double v : l.bias.data()) EXPECT_EQ(v, 0.0);
    for (double v : a.head.bias.data()) EXPECT_EQ(v, 0.0);
    LayerSpec bad = s;
    bad.hidden.clear();
    EXPECT_THROW(init_params(bad, 1), ContractViolation);
    bad = s;
    bad.classes = 1;
    EXPECT_THROW(init_params(bad, 1), ContractViolation);
}

TEST(CrossEntropy, Examples) {
    const Tensor x{{0.3, -1.0}};
    const auto even = constant_logits(0.0, 0.0);
    EXPECT_NEAR(ce(even, x, {0}), std::log(2.0), 1e-15);
    EXPECT_NEAR(ce(even, x, {1}), 0.693147, 1e-6);
    // logits far apart: probability of the true class rounds to 1
    EXPECT_EQ(ce(constant_logits(800.0, 0.0), x, {0}), 0.0);
    // a wrong confident prediction hits the probability floor
    EXPECT_NEAR(ce(constant_logits(800.0, 0.0), x, {1}), -std::log(kProbFloor), 1e-9);
    // mean over samples
    const auto p = constant_logits(0.4, -1.1);
    const Tensor x2{{0.3, -1.0}, {2.0, 1.0}};
    EXPECT_NEAR(ce(p, x2, {0, 1}), 0.5 * (ce(p, x, {0}) + ce(p, x, {1})), 1e-15);
    EXPECT_THROW(ce(p, x, {2}), ContractViolation);
    EXPECT_THROW(ce(p, x, {-1}), ContractViolation);
    EXPECT_THROW(ce(p, x2, {0}), ContractViolation);
}

TEST(Mse, Examples) {
    auto p = init_params(spec({2}, OutputKind::regression), 4);
    p.extractor[0] = {Tensor::identity(2), Tensor(1, 2, 0.0)};
    p.head = {Tensor{{1.0}, {0.0}}, Tensor{{0.0}}};  // prediction = relu(x0)
    const Tensor x{{2.0, 0.0}, {3.0, 0.0}};
    EXPECT_EQ(mse(p, x, {2.0, 3.0}), 0.0);
    EXPECT_EQ(mse(p, x, {1.0, 4.0}), 1.0);
    EXPECT_EQ(mse(p, Tensor{{3.0, 1.0}}, {0.0}), 9.0);
    EXPECT_THROW(mse(p, x, {1.0}), ContractViolation);
    ad::Graph g;
    auto m = bind(g, p);
    const std::vector<int> labels{0, 1};
    EXPECT_THROW(cross_entropy_loss(m, extract_features(m, g.constant(x)), labels), ContractViolation);
}

TEST(Predict, SoftmaxRowsAreDistributions) {
    const auto p = init_params(spec({8, 4}), 5);
    const auto probs = predict(p, random_input(50, 2, 6, 10.0));
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < probs.cols(); ++c) {
            EXPECT_GT(probs(r, c), 0.0);
            EXPECT_LT(probs(r, c), 1.0);
            s += probs(r, c);
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Losses, GradientsMatchFiniteDifferences) {
    const auto x = random_input(10, 2, 9);
    for (auto act : {Activation::tanh, Activation::relu}) {
        auto cs = spec({5, 3});
        cs.activation = act;
        const auto cp = init_params(cs, 10);
        const std::vector<int> labels{0, 1, 1, 0, 1, 0, 0, 1, 1, 1};
        auto ce_build = [&](ad::Graph& g, std::span<const ad::Var> v) {
            BoundModel m{cs, {v.begin(), v.end()}};
            return cross_entropy_loss(m, extract_features(m, g.constant(x)), labels);
        };
        EXPECT_LT(ad::finite_difference_check(ce_build, cp.flatten(), 1e-6), 1e-5) << to_string(act);

        auto rs = spec({5, 3}, OutputKind::regression);
        rs.activation = act;
        const auto rp = init_params(rs, 12);
        const std::vector<double> y{0.1, 0.5, -0.3, 1.2, 0.0, 0.7, 0.2, -1.0, 0.4, 0.9};
        auto mse_build = [&](ad::Graph& g, std::span<const ad::Var> v) {
            BoundModel m{rs, {v.begin(), v.end()}};
            return mse_loss(m, extract_features(m, g.constant(x)), y);
        };
        EXPECT_LT(ad::finite_difference_check(mse_build, rp.flatten(), 1e-6), 1e-5) << to_string(act);
    }
}

TEST(Losses, InvariantUnderReordering) {
    const auto p = init_params(spec({6, 4}), 13);
    const auto x = random_input(6, 2, 14);
    const std::vector<int> labels{0, 1, 1, 0, 0, 1};
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    std::vector<int> lp;
    for (auto i : perm) lp.push_back(labels[i]);
    EXPECT_NEAR(ce(p, x, labels), ce(p, x.select_rows(perm), lp), 1e-15);
}

TEST(Checkpoint, RoundTripAndErrors) {
    auto s = spec({8, 8}, OutputKind::regression, 11);
    s.activation = Activation::tanh;
    const auto p = init_params(s, 15);
    const auto j = nlohmann::json::parse(params_to_json(p).dump());
    const auto q = params_from_json(j);
    EXPECT_TRUE(p == q);
    EXPECT_EQ(q.spec.activation, Activation::tanh);
    EXPECT_EQ(q.spec.output, OutputKind::regression);
    EXPECT_EQ(q.feature_dim(), 8u);

    auto bad = j;
    bad["version"] = 99;
    EXPECT_THROW(params_from_json(bad), ConfigError);
    bad = j;
    bad["tensors"][0]["rows"] = 3;
    EXPECT_THROW(params_from_json(bad), ConfigError);
    bad = j;
    bad.erase("spec");
    EXPECT_THROW(params_from_json(bad), ConfigError);
}
