#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "cdan/copula.hpp"

using namespace cdan;

namespace {

DependenceDivergenceKind kind(DependenceKind k) { return DependenceDivergenceKind{k, 0.5, 1'000'000}; }

const std::vector<DependenceKind> kClosedForms = {DependenceKind::kl, DependenceKind::chi2,
                                                   DependenceKind::wasserstein2,
                                                   DependenceKind::mmd_gaussian_unit};

// N x m draws from a Gaussian with unit variances and the given correlation
// between columns 0 and 1 (other columns independent).
Tensor gaussian_draws(std::size_t n, std::size_t m, double rho, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> v(n * m);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) v[r * m + c] = z(rng);
        if (m >= 2) v[r * m + 1] = rho * v[r * m] + std::sqrt(1 - rho * rho) * v[r * m + 1];
    }
    return Tensor(n, m, std::move(v));
}

}  // namespace

TEST(KendallTau, ExactExamples) {
    EXPECT_EQ(kendall_tau_exact(Tensor{{1, 1}, {2, 2}, {3, 3}}), 1.0);
    EXPECT_EQ(kendall_tau_exact(Tensor{{1, 2}, {2, 1}}), -1.0);
    // pairs: (+1), (0, tie in the second coordinate), (-1)
    EXPECT_EQ(kendall_tau_exact(Tensor{{0, 0}, {1, 1}, {2, 0}}), 0.0);
    EXPECT_NEAR(kendall_tau_exact(Tensor{{0, 0}, {1, 1}, {2, -1}}), -1.0 / 3.0, 1e-15);
    EXPECT_THROW(kendall_tau_exact(Tensor{{1, 2}}), ContractViolation);
}

TEST(KendallTau, SmoothExamples) {
    EXPECT_NEAR(kendall_tau_smooth(Tensor{{0, 0}, {1, 1}}, 10), std::tanh(10.0), 1e-15);
    EXPECT_GT(kendall_tau_smooth(Tensor{{0, 0}, {1, 1}}, 10), 0.99999999);
    EXPECT_EQ(kendall_tau_smooth(Tensor{{0, 5}, {0, 1}, {2, 3}, {2, -1}}, 50), 0.0);
    EXPECT_THROW(kendall_tau_smooth(Tensor{{0, 0}, {1, 1}, {2, 2}}, 10), ContractViolation);
    EXPECT_THROW(kendall_tau_smooth(Tensor{{0, 0}, {1, 1}}, 0), ContractViolation);
}

TEST(KendallTau, IndependentUniformsNearZero) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    const std::size_t n = 10'000;
    std::vector<double> v(2 * n);
    for (auto& x : v) x = u(rng);
    const Tensor t(n, 2, v);
    const double smooth = kendall_tau_smooth(t, 100), exact = kendall_tau_exact(t);
    EXPECT_LT(std::abs(smooth - exact), 3.0 / std::sqrt(static_cast<double>(n)));
    EXPECT_LT(std::abs(smooth), 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(KendallTau, SmoothApproachesPairedSignEstimator) {
    // the a -> infinity limit of the smoothed estimator is the paired sign average
    const auto t = gaussian_draws(1000, 2, 0.6, 5);
    double paired = 0.0;
    for (std::size_t k = 0; k < 500; ++k) {
        const double p = (t(2 * k, 0) - t(2 * k + 1, 0)) * (t(2 * k, 1) - t(2 * k + 1, 1));
        paired += (p > 0) - (p < 0);
    }
    paired /= 500.0;
    double prev = 2.0;
    for (double a : {1.0, 10.0, 100.0, 1000.0, 1e5}) {
        const double err = std::abs(kendall_tau_smooth(t, a) - paired);
        EXPECT_LE(err, prev) << "a=" << a;
        prev = err;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(KendallTau, SmoothGradientMatchesFiniteDifferences) {
    const auto t = gaussian_draws(12, 3, 0.5, 8);
    auto build = [](ad::Graph&, std::span<const ad::Var> v) {
        return kendall_tau_smooth(v[0], 0, 2, 0.5) + kendall_tau_smooth(v[0], 1, 0, 0.5);
    };
    EXPECT_LT(ad::finite_difference_check(build, {t}, 1e-6), 1e-5);
}

TEST(CopulaParam, Examples) {
    EXPECT_EQ(copula_param_from_tau(0.0), 0.0);
    EXPECT_NEAR(copula_param_from_tau(0.5), std::sqrt(2.0) / 2.0, 1e-15);
    EXPECT_EQ(copula_param_from_tau(1.0), 1.0 - 1e-6);
    EXPECT_EQ(copula_param_from_tau(-1.0), -1.0 + 1e-6);
    EXPECT_THROW(copula_param_from_tau(1.0001), ContractViolation);
}

TEST(PairDivergence, Examples) {
    EXPECT_EQ(pair_dependence_divergence(0.0, kind(DependenceKind::kl)), 0.0);
    EXPECT_NEAR(pair_dependence_divergence(std::sqrt(1 - std::exp(-1.0)), kind(DependenceKind::kl)), 0.5, 1e-12);
    EXPECT_NEAR(pair_dependence_divergence(std::sqrt(0.5), kind(DependenceKind::chi2)), 1.0, 1e-12);
    EXPECT_EQ(pair_dependence_divergence(0.0, kind(DependenceKind::wasserstein2)), 0.0);
    EXPECT_EQ(pair_dependence_divergence(0.0, kind(DependenceKind::mmd_gaussian_unit)), 0.0);
    EXPECT_THROW(pair_dependence_divergence(0.3, kind(DependenceKind::hellinger_mc)), ContractViolation);
    EXPECT_THROW(pair_dependence_divergence(1.0, kind(DependenceKind::kl)), ContractViolation);
}

TEST(PairDivergence, MatchesDirectDeterminantForms) {
    // reference: the determinant expressions evaluated literally
    for (double rho : {0.05, 0.3, -0.55, 0.7, 0.95, 0.999}) {
        const double d = 1 - rho * rho;
        const double kl = -0.5 * std::log(d);
        const double chi2 = 1.0 / d - 1.0;
        const double w2 = std::sqrt(4.0 - 2.0 * std::sqrt(2.0 + 2.0 * std::sqrt(d)));
        const double mmd = std::sqrt(1.0 / std::sqrt(9.0 + 16.0 * d) + 0.2 - 2.0 / std::sqrt(21.0 + 4.0 * d));
        EXPECT_NEAR(pair_dependence_divergence(rho, kind(DependenceKind::kl)), kl, 1e-12 * (1 + kl));
        EXPECT_NEAR(pair_dependence_divergence(rho, kind(DependenceKind::chi2)), chi2, 1e-9 * (1 + chi2));
        EXPECT_NEAR(pair_dependence_divergence(rho, kind(DependenceKind::wasserstein2)), w2, 1e-7);
        EXPECT_NEAR(pair_dependence_divergence(rho, kind(DependenceKind::mmd_gaussian_unit)), mmd, 1e-7);
    }
}

TEST(PairDivergence, SlopesMatchFiniteDifferences) {
    for (auto k : kClosedForms)
        for (double rho : {-0.8, -0.2, 0.1, 0.45, 0.9}) {
            auto build = [k](ad::Graph&, std::span<const ad::Var> v) {
                return pair_dependence_divergence(v[0], kind(k));
            };
            EXPECT_LT(ad::finite_difference_check(build, {Tensor::scalar(rho)}, 1e-6), 1e-5)
                << to_string(k) << " rho=" << rho;
        }
}

TEST(InverseNormal, Accuracy) {
    EXPECT_NEAR(inverse_normal_cdf(0.975), 1.959963984540054, 5e-9);
    EXPECT_NEAR(inverse_normal_cdf(0.5), 0.0, 1e-15);
    for (double p : {1e-10, 1e-4, 0.01, 0.02425, 0.2, 0.7, 0.99, 1 - 1e-6}) {
        const double x = inverse_normal_cdf(p);
        const double back = 0.5 * std::erfc(-x / std::sqrt(2.0));
        EXPECT_NEAR(back, p, 1e-8 * p + 1e-15) << p;
    }
    EXPECT_THROW(inverse_normal_cdf(0.0), DomainError);
}

TEST(MonteCarlo, IndependenceGivesZero) {
    for (auto k : {DependenceKind::kl, DependenceKind::chi2, DependenceKind::hellinger_mc, DependenceKind::alpha_mc}) {
        auto kk = kind(k);
        kk.mc_samples = 10'000;
        const auto est = pair_dependence_divergence_mc(0.0, kk, 1);
        EXPECT_EQ(est.mean, 0.0);
        EXPECT_EQ(est.std_error, 0.0);
    }
}

TEST(MonteCarlo, KlMatchesClosedForm) {
    const double rho = std::sqrt(1 - std::exp(-1.0));
    const auto est = pair_dependence_divergence_mc(rho, kind(DependenceKind::kl), 12345);
    EXPECT_LT(std::abs(est.mean - 0.5), 3 * est.std_error);
}

TEST(MonteCarlo, HellingerMatchesBhattacharyyaForm) {
    // integral of sqrt(c) = det^(1/4) / sqrt(1 - rho^2/4)
    const double rho = 0.5, d = 1 - rho * rho;
    const double expect = 2.0 - 2.0 * std::pow(d, 0.25) / std::sqrt(1 - rho * rho / 4);
    const auto est = pair_dependence_divergence_mc(rho, kind(DependenceKind::hellinger_mc), 77);
    EXPECT_LT(std::abs(est.mean - expect), 3 * est.std_error);
}

TEST(MonteCarlo, RejectsBadParameters) {
    auto k = kind(DependenceKind::alpha_mc);
    k.alpha = 1.0;
    EXPECT_THROW(pair_dependence_divergence_mc(0.2, k, 1), ContractViolation);
    k.alpha = -1.0;
    EXPECT_THROW(pair_dependence_divergence_mc(0.2, k, 1), ContractViolation);
    auto small = kind(DependenceKind::kl);
    small.mc_samples = 9'999;
    EXPECT_THROW(pair_dependence_divergence_mc(0.2, small, 1), ContractViolation);
    EXPECT_THROW(pair_dependence_divergence_mc(0.2, kind(DependenceKind::wasserstein2), 1), ContractViolation);
}

TEST(CopulaDistance, Examples) {
    const auto f = gaussian_draws(200, 3, 0.6, 1);
    const auto g = gaussian_draws(200, 3, -0.2, 2);
    for (auto k : kClosedForms) {
        EXPECT_EQ(copula_distance(f, f, PairWeights::uniform(3, 1.0), kind(k)), 0.0);
        EXPECT_EQ(copula_distance(f, g, PairWeights::uniform(3, 0.0), kind(k)), 0.0);
    }
    EXPECT_THROW(copula_distance(Tensor(4, 1), Tensor(4, 1), PairWeights::uniform(1, 1), kind(DependenceKind::kl)),
                 ContractViolation);
    EXPECT_THROW(copula_distance(f, g, PairWeights::uniform(2, 1.0), kind(DependenceKind::kl)), ContractViolation);
    PairWeights bad = PairWeights::uniform(3, 1.0);
    bad.beta.erase({0, 2});
    bad.beta[{2, 0}] = 1.0;
    EXPECT_THROW(copula_distance(f, g, bad, kind(DependenceKind::kl)), ContractViolation);
}

TEST(CopulaDistance, RecoversKlGapFromDraws) {
    const auto fs = gaussian_draws(10'000, 2, std::sqrt(1 - std::exp(-1.0)), 31);
    const auto ft = gaussian_draws(10'000, 2, 0.0, 32);
    const double cd = copula_distance(fs, ft, PairWeights::uniform(2, 1.0), kind(DependenceKind::kl), 100.0);
    EXPECT_NEAR(cd, 0.5, 0.05);
}

TEST(CopulaDistance, SymmetricNonnegativeOddTruncation) {
    const auto f = gaussian_draws(101, 4, 0.7, 3);
    const auto g = gaussian_draws(77, 4, 0.1, 4);
    for (auto k : kClosedForms) {
        const auto w = PairWeights::uniform(4, 0.3);
        const double ab = copula_distance(f, g, w, kind(k)), ba = copula_distance(g, f, w, kind(k));
        EXPECT_EQ(ab, ba);
        EXPECT_GT(ab, 0.0);
    }
}

TEST(CopulaDistance, EstimateCopulaShape) {
    const auto e = estimate_copula(gaussian_draws(400, 3, 0.5, 9));
    ASSERT_EQ(e.sigma.rows(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(e.sigma(i, i), 1.0);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(e.sigma(i, j), e.sigma(j, i));
    }
    ASSERT_EQ(e.pair_determinants.size(), 3u);
    EXPECT_EQ(e.pair_determinants[0], (1 - e.sigma(0, 1)) * (1 + e.sigma(0, 1)));
    EXPECT_GT(e.sigma(0, 1), 0.3);
}

TEST(CopulaDistance, PairwiseMonotoneInDeterminantGap) {
    std::vector<double> grid;
    for (int k = 0; k <= 9; ++k) grid.push_back(0.1 * k);
    grid.push_back(0.99);
    for (auto k : kClosedForms)
        for (double ry : grid) {
            const double hy = pair_dependence_divergence(ry, kind(k));
            double prev = -1.0;
            for (double rx : grid) {  // ascending away from ry on the upper side
                if (rx < ry) continue;
                const double d = std::abs(pair_dependence_divergence(rx, kind(k)) - hy);
                EXPECT_GE(d, prev) << to_string(k);
                prev = d;
            }
            prev = -1.0;
            for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
                if (*it > ry) continue;
                const double d = std::abs(pair_dependence_divergence(*it, kind(k)) - hy);
                EXPECT_GE(d, prev) << to_string(k);
                prev = d;
            }
        }
}

TEST(CopulaDistance, BoundedForW2AndMmd) {
    const double w2_max = std::sqrt(4 - 2 * std::sqrt(2.0));
    const double mmd_max = std::sqrt(1.0 / 3.0 + 0.2 - 2.0 / std::sqrt(21.0));
    EXPECT_NEAR(w2_max, 1.08239, 1e-5);
    for (int i = 0; i <= 1000; ++i) {
        const double rho = std::min(i / 1000.0, 1 - 1e-6);
        EXPECT_LE(pair_dependence_divergence(rho, kind(DependenceKind::wasserstein2)), w2_max);
        EXPECT_LE(pair_dependence_divergence(rho, kind(DependenceKind::mmd_gaussian_unit)), mmd_max);
    }
}

TEST(CdKlGradient, MatchesAutodiff) {
    const auto fs = gaussian_draws(64, 3, 0.6, 41);
    const auto ft = gaussian_draws(64, 3, 0.1, 42);
    PairWeights w = PairWeights::uniform(3, 1.0);
    w.beta[{0, 2}] = 0.4;
    w.beta[{1, 2}] = 2.5;
    for (double a : {1.0, 5.0}) {
        ad::Graph g;
        auto s = g.leaf(fs);
        auto cd = copula_distance(s, g.constant(ft), w, kind(DependenceKind::kl), a);
        g.backward(cd);
        const auto auto_grad = g.grad(s);
        const auto hand = cd_kl_gradient_analytic(fs, ft, w, a);
        double worst = 0.0;
        for (std::size_t i = 0; i < hand.size(); ++i)
            worst = std::max(worst, std::abs(hand[i] - auto_grad[i]) / (std::abs(auto_grad[i]) + 1e-12));
        EXPECT_LT(worst, 1e-6) << "a=" << a;
    }
}

TEST(CdKlGradient, ZeroWeightsAndTiesGiveZero) {
    const auto fs = gaussian_draws(32, 3, 0.6, 43);
    const auto ft = gaussian_draws(32, 3, 0.0, 44);
    EXPECT_EQ(cd_kl_gradient_analytic(fs, ft, PairWeights::uniform(3, 0.0)), Tensor(32, 3));
    EXPECT_EQ(cd_kl_gradient_analytic(fs, fs, PairWeights::uniform(3, 1.0)), Tensor(32, 3));
    ad::Graph g;
    auto s = g.leaf(fs);
    g.backward(copula_distance(s, g.constant(fs), PairWeights::uniform(3, 1.0), kind(DependenceKind::kl)));
    EXPECT_EQ(g.grad(s), Tensor(32, 3));
}

TEST(CopulaDistance, GradientMatchesFiniteDifferences) {
    const auto fs = gaussian_draws(16, 3, 0.5, 51);
    const auto ft = gaussian_draws(16, 3, -0.3, 52);
    for (auto k : kClosedForms) {
        auto build = [k](ad::Graph&, std::span<const ad::Var> v) {
            return copula_distance(v[0], v[1], PairWeights::uniform(3, 0.7), kind(k), 0.5);
        };
        EXPECT_LT(ad::finite_difference_check(build, {fs, ft}, 1e-6), 1e-5) << to_string(k);
    }
}

TEST(GaussianDecomposition, MarginalVersusDependenceShift) {
    const double r = std::sqrt(1.0 - std::exp(-1.0));
    const Gaussian2 y{};
    const Gaussian2 x{{0.0, 1.0}, {1.0, 0.0, 1.0}};
    const Gaussian2 z{{0.0, 0.0}, {1.0, r, 1.0}};
    const auto xy = gaussian_kl_decomposition(x, y);
    EXPECT_NEAR(xy.overall, 0.5, 1e-15);
    EXPECT_EQ(xy.marginal[0], 0.0);
    EXPECT_NEAR(xy.marginal[1], 0.5, 1e-15);
    EXPECT_EQ(xy.cd, 0.0);
    const auto zy = gaussian_kl_decomposition(z, y);
    EXPECT_NEAR(zy.overall, 0.5, 1e-12);
    EXPECT_EQ(zy.marginal[0], 0.0);
    EXPECT_EQ(zy.marginal[1], 0.0);
    EXPECT_NEAR(zy.cd, 0.5, 1e-12);
    // with independent coordinates and equal correlations the overall KL splits into the marginals
    const Gaussian2 a{{0.3, -1.0}, {2.0, 0.0, 0.5}}, b{{1.0, 0.2}, {1.0, 0.0, 3.0}};
    const auto ab = gaussian_kl_decomposition(a, b);
    EXPECT_NEAR(ab.overall, ab.marginal[0] + ab.marginal[1], 1e-14);
    EXPECT_THROW(gaussian_kl(Gaussian2{{0, 0}, {1, 2, 1}}, y), ContractViolation);
}
