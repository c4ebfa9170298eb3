#pragma once

// Pairwise Gaussian-copula dependence: Kendall's tau estimators, the
// tau -> copula parameter map, closed-form dependence divergences, the
// weighted copula distance and a Monte-Carlo oracle for phi-divergences.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "autodiff.hpp"
#include "errors.hpp"
#include "tensor.hpp"

namespace cdan {

inline constexpr double kRhoClip = 1e-6;
inline constexpr double kDefaultTanhA = 100.0;

enum class DependenceKind { kl, chi2, wasserstein2, mmd_gaussian_unit, hellinger_mc, alpha_mc };

struct DependenceDivergenceKind {
    DependenceKind tag = DependenceKind::kl;
    double alpha = 0.5;                 // alpha_mc only
    std::size_t mc_samples = 1'000'000;  // *_mc and the Monte-Carlo oracle

    void validate() const {
        if (mc_samples < 10'000) throw ContractViolation("DependenceDivergenceKind: mc_samples must be >= 10000");
        if (tag == DependenceKind::alpha_mc && (alpha == 1.0 || alpha == -1.0))
            throw ContractViolation("DependenceDivergenceKind: alpha must not be +-1");
    }

    bool has_closed_form() const {
        return tag == DependenceKind::kl || tag == DependenceKind::chi2 ||
               tag == DependenceKind::wasserstein2 || tag == DependenceKind::mmd_gaussian_unit;
    }
};

inline std::string to_string(DependenceKind k) {
    switch (k) {
        case DependenceKind::kl: return "kl";
        case DependenceKind::chi2: return "chi2";
        case DependenceKind::wasserstein2: return "w2";
        case DependenceKind::mmd_gaussian_unit: return "mmd";
        case DependenceKind::hellinger_mc: return "hellinger";
        case DependenceKind::alpha_mc: return "alpha";
    }
    return "?";
}

inline DependenceKind dependence_kind_from_string(const std::string& s) {
    if (s == "kl") return DependenceKind::kl;
    if (s == "chi2") return DependenceKind::chi2;
    if (s == "w2") return DependenceKind::wasserstein2;
    if (s == "mmd") return DependenceKind::mmd_gaussian_unit;
    if (s == "hellinger") return DependenceKind::hellinger_mc;
    if (s == "alpha") return DependenceKind::alpha_mc;
    throw ConfigError("unknown dependence divergence '" + s + "' (expected kl, chi2, w2 or mmd)");
}

/// Nonnegative weights beta_ij keyed by (i, j), i < j.
struct PairWeights {
    std::map<std::pair<std::size_t, std::size_t>, double> beta;

    static PairWeights uniform(std::size_t m, double b) {
        PairWeights w;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) w.beta[{i, j}] = b;
        return w;
    }

    void validate(std::size_t m) const {
        if (beta.size() != m * (m - 1) / 2)
            throw ContractViolation("PairWeights: expected " + std::to_string(m * (m - 1) / 2) +
                                    " pairs for dimension " + std::to_string(m) + ", got " +
                                    std::to_string(beta.size()));
        for (const auto& [key, w] : beta) {
            if (key.first >= key.second || key.second >= m)
                throw ContractViolation("PairWeights: key (" + std::to_string(key.first) + "," +
                                        std::to_string(key.second) + ") is not a pair i<j<" +
                                        std::to_string(m));
            if (!(w >= 0.0) || !std::isfinite(w)) throw ContractViolation("PairWeights: weights must be finite and >= 0");
        }
    }

    bool all_zero() const {
        for (const auto& [k, w] : beta)
            if (w != 0.0) return false;
        return true;
    }
};

struct CopulaEstimate {
    Tensor sigma;                                             // m x m, unit diagonal
    std::vector<double> pair_determinants;                    // 1 - sigma_ij^2, i<j ascending
};

// ---------------------------------------------------------------- Kendall tau

inline double kendall_tau_exact(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ContractViolation("kendall_tau_exact: column lengths differ");
    const auto n = x.size();
    if (n < 2) throw ContractViolation("kendall_tau_exact: need N >= 2");
    auto sgn = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) s += sgn((x[a] - x[b]) * (y[a] - y[b]));
    return 2.0 * s / (static_cast<double>(n) * static_cast<double>(n - 1));
}

inline double kendall_tau_exact(const Tensor& pairs) {
    if (pairs.cols() != 2) throw ContractViolation("kendall_tau_exact: expected N x 2 samples");
    return kendall_tau_exact(pairs.col(0), pairs.col(1));
}

/// Smoothed paired estimator on columns i and j of `f`:
/// (2/N) sum_k tanh(a * (f[2k,i] - f[2k+1,i]) * (f[2k,j] - f[2k+1,j])).
inline ad::Var kendall_tau_smooth(const ad::Var& f, std::size_t i, std::size_t j, double a) {
    const auto n = f.rows(), c = f.cols();
    if (!(a > 0.0)) throw ContractViolation("kendall_tau_smooth: a must be > 0");
    if (n < 2 || n % 2 != 0) throw ContractViolation("kendall_tau_smooth: N must be even and >= 2, got " + std::to_string(n));
    if (i >= c || j >= c) throw ContractViolation("kendall_tau_smooth: column index out of range");
    const auto& F = f.value();
    const auto half = n / 2;
    std::vector<double> di(half), dj(half), sech2(half);
    double s = 0.0;
    for (std::size_t k = 0; k < half; ++k) {
        di[k] = F(2 * k, i) - F(2 * k + 1, i);
        dj[k] = F(2 * k, j) - F(2 * k + 1, j);
        const double z = a * di[k] * dj[k];
        s += std::tanh(z);
        // 1 - tanh^2 cancels badly once tanh saturates
        const double ch = std::cosh(z);
        sech2[k] = 1.0 / (ch * ch);
    }
    const double scale = 2.0 / static_cast<double>(n);
    const auto id = f.id();
    return f.graph().emplace(
        Tensor::scalar(scale * s), "kendall_tau_smooth", {id},
        [=](ad::Graph& g, std::span<const double> go) {
            auto& gf = g.accum(id);
            for (std::size_t k = 0; k < half; ++k) {
                const double w = go[0] * scale * a * sech2[k];
                gf[2 * k * c + i] += w * dj[k];
                gf[(2 * k + 1) * c + i] -= w * dj[k];
                gf[2 * k * c + j] += w * di[k];
                gf[(2 * k + 1) * c + j] -= w * di[k];
            }
        });
}

inline double kendall_tau_smooth(const Tensor& pairs, double a) {
    if (pairs.cols() != 2) throw ContractViolation("kendall_tau_smooth: expected N x 2 samples");
    ad::Graph g;
    return kendall_tau_smooth(g.constant(pairs), 0, 1, a).item();
}

// ------------------------------------------------------ tau -> copula param

namespace detail {

inline double clip_rho(double r) { return std::clamp(r, -1.0 + kRhoClip, 1.0 - kRhoClip); }

}  // namespace detail

inline double copula_param_from_tau(double tau) {
    if (!(std::abs(tau) <= 1.0)) throw ContractViolation("copula_param_from_tau: |tau| > 1");
    return detail::clip_rho(std::sin(std::numbers::pi * tau / 2.0));
}

/// Gradient is zero where the clip is active.
inline ad::Var copula_param_from_tau(const ad::Var& tau) {
    for (double t : tau.value().data())
        if (!(std::abs(t) <= 1.0)) throw ContractViolation("copula_param_from_tau: |tau| > 1");
    return ad::map(
        tau, "copula_param", [](double t) { return copula_param_from_tau(t); },
        [](double t, double r) {
            if (std::abs(r) >= 1.0 - kRhoClip) return 0.0;
            return std::numbers::pi / 2.0 * std::cos(std::numbers::pi * t / 2.0);
        });
}

// ------------------------------------------------- closed-form divergences

namespace detail {

struct ValueSlope {
    double value, slope;  // H(rho), dH/drho
};

// All forms written in terms of 1 - rho^2 = (1 - rho)(1 + rho) and with the
// small-rho cancellations removed algebraically.
inline ValueSlope dependence_closed_form(double rho, DependenceKind kind) {
    const double x = rho * rho;
    const double det = (1.0 - rho) * (1.0 + rho);
    switch (kind) {
        case DependenceKind::kl:
            return {-0.5 * std::log(det), rho / det};
        case DependenceKind::chi2:
            return {x / det, 2.0 * rho / (det * det)};
        case DependenceKind::wasserstein2: {
            // h = 4 - 2 sqrt(2 + 2 sqrt(det)), reported as sqrt(h)
            const double s = std::sqrt(det);
            const double r = std::sqrt(2.0 + 2.0 * s);
            const double h = 4.0 * x / ((1.0 + s) * (2.0 + r));
            const double H = std::sqrt(h);
            if (H == 0.0) return {0.0, 0.0};
            return {H, (2.0 * rho / (s * r)) / (2.0 * H)};
        }
        case DependenceKind::mmd_gaussian_unit: {
            // h = 1/sqrt(9 + 16 det) + 1/5 - 2/sqrt(21 + 4 det) = (4x/125) K(x)
            const double a = std::sqrt(1.0 - 16.0 * x / 25.0);
            const double b = std::sqrt(1.0 - 4.0 * x / 25.0);
            const double K = 4.0 / (a * (1.0 + a)) - 2.0 / (b * (1.0 + b));
            const double dK = 32.0 * (1.0 + 2.0 * a) / (25.0 * a * a * a * (1.0 + a) * (1.0 + a)) -
                              4.0 * (1.0 + 2.0 * b) / (25.0 * b * b * b * (1.0 + b) * (1.0 + b));
            const double h = 4.0 * x / 125.0 * K;
            const double H = std::sqrt(std::max(h, 0.0));
            if (H == 0.0) return {0.0, 0.0};
            const double dh = 2.0 * rho * (4.0 / 125.0) * (K + x * dK);
            return {H, dh / (2.0 * H)};
        }
        default:
            throw ContractViolation("pair_dependence_divergence: '" + to_string(kind) +
                                    "' has no closed form (use the Monte-Carlo estimator)");
    }
}

inline void check_rho(double rho) {
    if (!(std::abs(rho) <= 1.0 - kRhoClip))
        throw ContractViolation("pair_dependence_divergence: |rho| must be <= 1 - 1e-6, got " +
                                std::to_string(rho));
}

}  // namespace detail

/// Dependence divergence between the bivariate Gaussian copula with
/// parameter rho and the independence copula. W2 and MMD are reported as
/// square roots of the squared distances.
inline double pair_dependence_divergence(double rho, const DependenceDivergenceKind& kind) {
    detail::check_rho(rho);
    return detail::dependence_closed_form(rho, kind.tag).value;
}

inline double pair_dependence_divergence_slope(double rho, const DependenceDivergenceKind& kind) {
    detail::check_rho(rho);
    return detail::dependence_closed_form(rho, kind.tag).slope;
}

inline ad::Var pair_dependence_divergence(const ad::Var& rho, const DependenceDivergenceKind& kind) {
    for (double r : rho.value().data()) detail::check_rho(r);
    const auto tag = kind.tag;
    detail::dependence_closed_form(0.0, tag);  // rejects kinds without closed form
    return ad::map(
        rho, "dependence_" + to_string(tag),
        [tag](double r) { return detail::dependence_closed_form(r, tag).value; },
        [tag](double r, double) { return detail::dependence_closed_form(r, tag).slope; });
}

// ------------------------------------------------------ Monte-Carlo oracle

/// Acklam's rational approximation of the standard normal quantile.
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("inverse_normal_cdf: p must lie in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double lo = 0.02425, hi = 1.0 - lo;
    double x;
    if (p < lo) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p > hi) {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    // one Halley step against erfc brings the 1e-9 rational fit to full precision
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

/// Bivariate Gaussian copula density at normal scores (z1, z2).
inline double gaussian_copula_density_scores(double z1, double z2, double rho) {
    const double det = (1.0 - rho) * (1.0 + rho);
    const double q = (rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2) / det;
    return std::exp(-0.5 * q) / std::sqrt(det);
}

inline double gaussian_copula_density(double u1, double u2, double rho) {
    return gaussian_copula_density_scores(inverse_normal_cdf(u1), inverse_normal_cdf(u2), rho);
}

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Monte-Carlo estimate of the phi-divergence integral of the copula
/// density over the unit square, with its standard error.
inline McEstimate pair_dependence_divergence_mc(double rho, const DependenceDivergenceKind& kind,
                                                std::uint64_t seed) {
    kind.validate();
    detail::check_rho(rho);
    const double alpha = kind.alpha;
    auto phi = [&](double c) -> double {
        switch (kind.tag) {
            case DependenceKind::kl: return c * std::log(c);
            case DependenceKind::chi2: return c * c - 1.0;
            case DependenceKind::hellinger_mc: {
                const double t = std::sqrt(c) - 1.0;
                return t * t;
            }
            case DependenceKind::alpha_mc:
                return c * (1.0 - std::pow(c, -(alpha + 1.0) / 2.0)) / (1.0 - alpha * alpha);
            default:
                throw ContractViolation("pair_dependence_divergence_mc: '" + to_string(kind.tag) +
                                        "' is not a phi-divergence");
        }
    };
    phi(1.0);  // reject unsupported kinds before sampling

    std::mt19937_64 rng(seed);
    // uniform on the open interval (0, 1) from the top 53 bits
    auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    const auto n = kind.mc_samples;
    // Welford accumulation
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double z1 = inverse_normal_cdf(uniform());
        const double z2 = inverse_normal_cdf(uniform());
        const double v = phi(gaussian_copula_density_scores(z1, z2, rho));
        const double delta = v - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (v - mean);
    }
    const double var = m2 / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

// --------------------------------------------------------- copula distance

namespace detail {

inline std::size_t even_rows(std::size_t n) { return n - n % 2; }

inline ad::Var even_prefix(const ad::Var& f) {
    const auto n = even_rows(f.rows());
    if (n == f.rows()) return f;
    return ad::rows_strided(f, 0, 1, n);
}

inline void check_cd_inputs(std::size_t ms, std::size_t mt, std::size_t ns, std::size_t nt,
                            const PairWeights& beta) {
    if (ms != mt) throw ShapeError("copula_distance", ns, ms, nt, mt);
    if (ms < 2) throw ContractViolation("copula_distance: need m >= 2 feature columns");
    if (even_rows(ns) < 2 || even_rows(nt) < 2)
        throw ContractViolation("copula_distance: need >= 2 rows per domain");
    beta.validate(ms);
}

}  // namespace detail

/// Per-pair dependence divergences of one domain, as a vector of Vars in
/// ascending (i, j) order.
inline std::vector<ad::Var> pair_divergences(const ad::Var& f, const DependenceDivergenceKind& kind,
                                             double a) {
    const auto fe = detail::even_prefix(f);
    const auto m = f.cols();
    std::vector<ad::Var> out;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            out.push_back(pair_dependence_divergence(
                copula_param_from_tau(kendall_tau_smooth(fe, i, j, a)), kind));
    return out;
}

/// sum_{i<j} beta_ij |H(source pair) - H(target pair)|, summed in
/// ascending (i, j) order. Odd batches drop their last row.
inline ad::Var copula_distance(const ad::Var& fs, const ad::Var& ft, const PairWeights& beta,
                               const DependenceDivergenceKind& kind, double a = kDefaultTanhA) {
    detail::check_cd_inputs(fs.cols(), ft.cols(), fs.rows(), ft.rows(), beta);
    if (!(a > 0.0)) throw ContractViolation("copula_distance: a must be > 0");
    auto& g = fs.graph();
    if (beta.all_zero()) return g.emplace(Tensor::scalar(0.0), "copula_distance", {fs.id(), ft.id()}, {});
    const auto hs = pair_divergences(fs, kind, a);
    const auto ht = pair_divergences(ft, kind, a);
    ad::Var total;
    std::size_t p = 0;
    for (const auto& [key, w] : beta.beta) {  // std::map iterates (i, j) ascending
        auto term = ad::scale(ad::abs(hs[p] - ht[p]), w);
        total = (p == 0) ? term : total + term;
        ++p;
    }
    return total;
}

inline double copula_distance(const Tensor& fs, const Tensor& ft, const PairWeights& beta,
                              const DependenceDivergenceKind& kind, double a = kDefaultTanhA) {
    ad::Graph g;
    return copula_distance(g.constant(fs), g.constant(ft), beta, kind, a).item();
}

/// Smoothed-tau Gaussian copula estimate of the columns of `f`.
inline CopulaEstimate estimate_copula(const Tensor& f, double a = kDefaultTanhA) {
    const auto m = f.cols();
    if (detail::even_rows(f.rows()) < 2) throw ContractViolation("estimate_copula: need >= 2 rows");
    ad::Graph g;
    const auto fe = detail::even_prefix(g.constant(f));
    std::vector<double> sigma(m * m, 0.0);
    std::vector<double> dets;
    for (std::size_t i = 0; i < m; ++i) {
        sigma[i * m + i] = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            const double r = copula_param_from_tau(kendall_tau_smooth(fe, i, j, a).item());
            sigma[i * m + j] = sigma[j * m + i] = r;
            dets.push_back((1.0 - r) * (1.0 + r));
        }
    }
    return {Tensor(m, m, std::move(sigma)), std::move(dets)};
}

/// Hand-derived gradient of the KL copula distance with respect to the
/// source features:
///   beta_ij sgn(H_s - H_t) * rho_s / (1 - rho_s^2) * (pi/2) cos(pi tau_s / 2) * dtau_s/df
/// where dtau/df[2k,i] = (2/N) a d_j sech^2(a d_i d_j) and the odd row gets
/// the opposite sign.
inline Tensor cd_kl_gradient_analytic(const Tensor& fs, const Tensor& ft, const PairWeights& beta,
                                      double a = kDefaultTanhA) {
    detail::check_cd_inputs(fs.cols(), ft.cols(), fs.rows(), ft.rows(), beta);
    const auto m = fs.cols();
    const auto ns = detail::even_rows(fs.rows()), nt = detail::even_rows(ft.rows());
    std::vector<double> grad(fs.size(), 0.0);

    auto tau_of = [a](const Tensor& f, std::size_t n, std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < n / 2; ++k)
            s += std::tanh(a * (f(2 * k, i) - f(2 * k + 1, i)) * (f(2 * k, j) - f(2 * k + 1, j)));
        return 2.0 * s / static_cast<double>(n);
    };
    auto kl = [](double rho) { return -0.5 * std::log(1.0 - rho * rho); };

    for (const auto& [key, w] : beta.beta) {
        const auto [i, j] = key;
        if (w == 0.0) continue;
        const double ts = tau_of(fs, ns, i, j), tt = tau_of(ft, nt, i, j);
        const double raw = std::sin(std::numbers::pi * ts / 2.0);
        const double rs = copula_param_from_tau(ts), rt = copula_param_from_tau(tt);
        const double diff = kl(rs) - kl(rt);
        if (diff == 0.0 || raw != rs) continue;  // kink or clipped
        const double outer = w * (diff > 0.0 ? 1.0 : -1.0) * rs / (1.0 - rs * rs) *
                             std::numbers::pi / 2.0 * std::cos(std::numbers::pi * ts / 2.0);
        for (std::size_t k = 0; k < ns / 2; ++k) {
            const double di = fs(2 * k, i) - fs(2 * k + 1, i);
            const double dj = fs(2 * k, j) - fs(2 * k + 1, j);
            const double sech = 1.0 / std::cosh(a * di * dj);
            const double c = outer * 2.0 / static_cast<double>(ns) * a * sech * sech;
            grad[2 * k * m + i] += c * dj;
            grad[(2 * k + 1) * m + i] -= c * dj;
            grad[2 * k * m + j] += c * di;
            grad[(2 * k + 1) * m + j] -= c * di;
        }
    }
    return Tensor(fs.rows(), m, std::move(grad));
}

// ------------------------------------------- bivariate Gaussian decomposition

struct Gaussian2 {
    std::array<double, 2> mean{0.0, 0.0};
    std::array<double, 3> cov{1.0, 0.0, 1.0};  // s11, s12, s22

    double det() const { return cov[0] * cov[2] - cov[1] * cov[1]; }
    double corr() const { return cov[1] / std::sqrt(cov[0] * cov[2]); }
    void check() const {
        if (!(cov[0] > 0.0 && cov[2] > 0.0 && det() > 0.0))
            throw ContractViolation("Gaussian2: covariance must be positive definite");
    }
};

/// KL(p || q) between bivariate normals.
inline double gaussian_kl(const Gaussian2& p, const Gaussian2& q) {
    p.check();
    q.check();
    const double dq = q.det();
    // q's inverse covariance
    const double i11 = q.cov[2] / dq, i12 = -q.cov[1] / dq, i22 = q.cov[0] / dq;
    const double tr = i11 * p.cov[0] + 2.0 * i12 * p.cov[1] + i22 * p.cov[2];
    const double d0 = q.mean[0] - p.mean[0], d1 = q.mean[1] - p.mean[1];
    const double maha = i11 * d0 * d0 + 2.0 * i12 * d0 * d1 + i22 * d1 * d1;
    return 0.5 * (tr + maha - 2.0 + std::log(dq / p.det()));
}

inline double gaussian_kl_1d(double mp, double vp, double mq, double vq) {
    if (!(vp > 0.0 && vq > 0.0)) throw ContractViolation("gaussian_kl_1d: variances must be > 0");
    return 0.5 * (vp / vq + (mq - mp) * (mq - mp) / vq - 1.0 + std::log(vq / vp));
}

struct Decomposition {
    double overall = 0.0;
    std::array<double, 2> marginal{0.0, 0.0};
    double cd = 0.0;
};

/// Overall KL, per-coordinate marginal KL and the KL copula distance
/// (unit weight) between two bivariate normals, all in closed form.
inline Decomposition gaussian_kl_decomposition(const Gaussian2& p, const Gaussian2& q) {
    Decomposition d;
    d.overall = gaussian_kl(p, q);
    d.marginal[0] = gaussian_kl_1d(p.mean[0], p.cov[0], q.mean[0], q.cov[0]);
    d.marginal[1] = gaussian_kl_1d(p.mean[1], p.cov[2], q.mean[1], q.cov[2]);
    const DependenceDivergenceKind kl{DependenceKind::kl};
    d.cd = std::abs(pair_dependence_divergence(p.corr(), kl) - pair_dependence_divergence(q.corr(), kl));
    return d;
}

}  // namespace cdan
