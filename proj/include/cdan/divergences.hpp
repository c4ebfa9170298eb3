#pragma once

// Marginal (per-column) divergence estimators and the CORAL covariance
// penalty. Each estimator has a plain-value form over spans/Tensors and a
// differentiable form over ad::Var columns used during training.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "errors.hpp"
#include "tensor.hpp"

namespace cdan {

enum class MarginalKind { mmd_gaussian, wasserstein1, kl_histogram };

/// Choice of marginal divergence. An empty bandwidth list selects the
/// two-kernel median heuristic {median, 2 * median} on the pooled batch.
struct DivergenceKind {
    MarginalKind tag = MarginalKind::mmd_gaussian;
    std::vector<double> bandwidths;
    std::size_t bins = 32;

    static DivergenceKind mmd(std::vector<double> bw = {}) {
        return {MarginalKind::mmd_gaussian, std::move(bw), 32};
    }
    static DivergenceKind w1() { return {MarginalKind::wasserstein1, {}, 32}; }
    static DivergenceKind kl(std::size_t bins = 32) { return {MarginalKind::kl_histogram, {}, bins}; }

    void validate() const {
        for (double h : bandwidths)
            if (!(h > 0.0)) throw ContractViolation("DivergenceKind: bandwidths must be > 0");
        if (tag == MarginalKind::kl_histogram && bins < 2)
            throw ContractViolation("DivergenceKind: histogram bin count must be >= 2");
    }
};

inline std::string to_string(MarginalKind k) {
    switch (k) {
        case MarginalKind::mmd_gaussian: return "mmd";
        case MarginalKind::wasserstein1: return "w1";
        case MarginalKind::kl_histogram: return "kl";
    }
    return "?";
}

inline MarginalKind marginal_kind_from_string(const std::string& s) {
    if (s == "mmd") return MarginalKind::mmd_gaussian;
    if (s == "w1") return MarginalKind::wasserstein1;
    if (s == "kl") return MarginalKind::kl_histogram;
    throw ConfigError("unknown marginal divergence '" + s + "' (expected mmd, w1 or kl)");
}

/// exp(-(x - y)^2 / bandwidth)
inline double gaussian_kernel(double x, double y, double bandwidth) {
    if (!(bandwidth > 0.0)) throw ContractViolation("gaussian_kernel: bandwidth must be > 0");
    const double d = x - y;
    return std::exp(-d * d / bandwidth);
}

namespace detail {

inline double median_inplace(std::vector<double>& v) {
    const auto n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    double hi = *mid;
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

// k-th smallest (0-based) of s[j] - s[i], i < j, for ascending s. Bisects
// on the bit pattern of the candidate, which orders nonnegative doubles;
// each probe counts pairs with a two-pointer sweep.
inline double kth_pairwise_gap(std::span<const double> s, std::size_t k) {
    auto count_le = [&](double t) {
        std::size_t c = 0, i = 0;
        for (std::size_t j = 1; j < s.size(); ++j) {
            while (s[j] - s[i] > t) ++i;
            c += j - i;
        }
        return c;
    };
    std::uint64_t lo = 0, hi = std::bit_cast<std::uint64_t>(s.back() - s.front());
    while (lo < hi) {
        const auto mid = lo + (hi - lo) / 2;
        if (count_le(std::bit_cast<double>(mid)) >= k + 1)
            hi = mid;
        else
            lo = mid + 1;
    }
    return std::bit_cast<double>(lo);
}

// Median of the pairwise squared gaps of a 1-d sample without forming them.
inline double median_pairwise_sq_1d(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto pairs = v.size() * (v.size() - 1) / 2;
    const double hi = kth_pairwise_gap(v, pairs / 2);
    if (pairs % 2 == 1) return hi * hi;
    const double lo = kth_pairwise_gap(v, pairs / 2 - 1);
    return 0.5 * (lo * lo + hi * hi);
}

}  // namespace detail

/// {median, 2 * median} of the pairwise squared distances between the rows
/// of the pooled sample. Falls back to {1, 2} when the median is zero.
inline std::vector<double> median_heuristic_bandwidths(const Tensor& x, const Tensor& y) {
    if (x.cols() != y.cols()) throw ShapeError("median_heuristic", x.rows(), x.cols(), y.rows(), y.cols());
    const auto n = x.rows() + y.rows();
    const auto d = x.cols();
    if (n < 2) return {1.0, 2.0};
    if (d == 1) {
        std::vector<double> pooled(x.data().begin(), x.data().end());
        pooled.insert(pooled.end(), y.data().begin(), y.data().end());
        const double med = detail::median_pairwise_sq_1d(std::move(pooled));
        if (!(med > 1e-12)) return {1.0, 2.0};
        return {med, 2.0 * med};
    }
    auto row = [&](std::size_t i) { return i < x.rows() ? x.row(i) : y.row(i - x.rows()); };
    std::vector<double> dist;
    dist.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ri = row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto rj = row(j);
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double t = ri[c] - rj[c];
                s += t * t;
            }
            dist.push_back(s);
        }
    }
    if (dist.empty()) return {1.0, 2.0};
    const double med = detail::median_inplace(dist);
    if (!(med > 1e-12)) return {1.0, 2.0};
    return {med, 2.0 * med};
}

inline std::vector<double> median_heuristic_bandwidths(std::span<const double> x,
                                                       std::span<const double> y) {
    return median_heuristic_bandwidths(Tensor::column({x.begin(), x.end()}),
                                       Tensor::column({y.begin(), y.end()}));
}

/// Squared MMD between row samples with the all-pairs (diagonal-inclusive)
/// estimator, summed over the given Gaussian bandwidths, clamped at 0.
inline double mmd_squared(const Tensor& x, const Tensor& y, const std::vector<double>& bandwidths) {
    ad::Graph g;
    return ad::mmd_squared(g.constant(x), g.constant(y), bandwidths).item();
}

inline double mmd_squared(std::span<const double> x, std::span<const double> y,
                          const DivergenceKind& kind) {
    if (x.empty() || y.empty()) throw ContractViolation("mmd_squared: empty sample");
    kind.validate();
    const auto X = Tensor::column({x.begin(), x.end()});
    const auto Y = Tensor::column({y.begin(), y.end()});
    // identical samples: exact zero instead of cancellation residue
    if (std::ranges::equal(x, y)) return 0.0;
    const auto bw = kind.bandwidths.empty() ? median_heuristic_bandwidths(X, Y) : kind.bandwidths;
    return mmd_squared(X, Y, bw);
}

namespace detail {

// Interpolation weights of the empirical quantile at k / (L + 1),
// k = 1..L, for a sorted sample of size n: value = w0 * s[i0] + w1 * s[i1].
struct QuantileTap {
    std::size_t i0, i1;
    double w0, w1;
};

inline std::vector<QuantileTap> quantile_taps(std::size_t n, std::size_t L) {
    std::vector<QuantileTap> taps(L);
    for (std::size_t k = 1; k <= L; ++k) {
        if (n == L) {
            taps[k - 1] = {k - 1, k - 1, 1.0, 0.0};
            continue;
        }
        // 1-based rank p * (n + 1), clamped into [1, n]
        double pos = static_cast<double>(k) / static_cast<double>(L + 1) * static_cast<double>(n + 1);
        pos = std::clamp(pos, 1.0, static_cast<double>(n)) - 1.0;
        const auto i0 = static_cast<std::size_t>(std::floor(pos));
        const auto i1 = std::min(i0 + 1, n - 1);
        const double f = pos - static_cast<double>(i0);
        taps[k - 1] = {i0, i1, 1.0 - f, f};
    }
    return taps;
}

inline std::vector<std::size_t> argsort(std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return idx;
}

}  // namespace detail

/// Differentiable 1-D empirical Wasserstein-1 between two n x 1 columns.
inline ad::Var wasserstein1_1d(const ad::Var& x, const ad::Var& y) {
    if (x.cols() != 1 || y.cols() != 1) throw ShapeError("wasserstein1_1d", x.rows(), x.cols(), y.rows(), y.cols());
    if (x.rows() == 0 || y.rows() == 0) throw ContractViolation("wasserstein1_1d: empty sample");
    const auto xs = x.value().data();
    const auto ys = y.value().data();
    const auto ox = detail::argsort(xs), oy = detail::argsort(ys);
    const auto L = std::max(xs.size(), ys.size());
    const auto tx = detail::quantile_taps(xs.size(), L);
    const auto ty = detail::quantile_taps(ys.size(), L);
    std::vector<double> diff(L);
    double total = 0.0;
    for (std::size_t k = 0; k < L; ++k) {
        const double qx = tx[k].w0 * xs[ox[tx[k].i0]] + tx[k].w1 * xs[ox[tx[k].i1]];
        const double qy = ty[k].w0 * ys[oy[ty[k].i0]] + ty[k].w1 * ys[oy[ty[k].i1]];
        diff[k] = qx - qy;
        total += std::abs(diff[k]);
    }
    const double value = total / static_cast<double>(L);
    const auto ix = x.id(), iy = y.id();
    return x.graph().emplace(
        Tensor::scalar(value), "wasserstein1_1d", {ix, iy},
        [=](ad::Graph& g, std::span<const double> go) {
            auto& gx = g.accum(ix);
            auto& gy = g.accum(iy);
            const double c = go[0] / static_cast<double>(L);
            for (std::size_t k = 0; k < L; ++k) {
                const double s = diff[k] > 0.0 ? c : (diff[k] < 0.0 ? -c : 0.0);
                gx[ox[tx[k].i0]] += s * tx[k].w0;
                gx[ox[tx[k].i1]] += s * tx[k].w1;
                gy[oy[ty[k].i0]] -= s * ty[k].w0;
                gy[oy[ty[k].i1]] -= s * ty[k].w1;
            }
        });
}

/// Mean absolute difference of sorted samples; unequal sizes compare
/// linearly interpolated quantiles at k / (L + 1), L = max size.
inline double wasserstein1_1d(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw ContractViolation("wasserstein1_1d: empty sample");
    ad::Graph g;
    return wasserstein1_1d(g.constant(Tensor::column({x.begin(), x.end()})),
                           g.constant(Tensor::column({y.begin(), y.end()})))
        .item();
}

/// KL(P_x || P_y) between equal-width histograms over the pooled range.
/// Each bin gets pseudo-count 1/bins, i.e. p_b = (c_b + 1/bins) / (N + 1).
inline double kl_histogram_1d(std::span<const double> x, std::span<const double> y, std::size_t bins) {
    if (bins < 2) throw ContractViolation("kl_histogram_1d: bins must be >= 2");
    if (x.empty() || y.empty()) throw ContractViolation("kl_histogram_1d: empty sample");
    const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
    const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
    const double lo = std::min(*xlo, *ylo), hi = std::max(*xhi, *yhi);
    if (!(hi > lo)) return 0.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    auto histogram = [&](std::span<const double> s) {
        std::vector<double> h(bins, 1.0 / static_cast<double>(bins));
        for (double v : s) {
            auto b = static_cast<std::size_t>((v - lo) / width);
            h[std::min(b, bins - 1)] += 1.0;
        }
        for (auto& c : h) c /= static_cast<double>(s.size() + 1);
        return h;
    };
    const auto p = histogram(x), q = histogram(y);
    double kl = 0.0;
    for (std::size_t b = 0; b < bins; ++b) kl += p[b] * std::log(p[b] / q[b]);
    return std::max(kl, 0.0);
}

/// Histogram KL with linear (two-nearest-centre) binning so that the
/// estimate is piecewise smooth in the samples; used as a training loss.
/// The bin range defaults to the pooled sample range and, like the bin
/// edges, is treated as a constant by the backward pass.
inline ad::Var kl_histogram_1d(const ad::Var& x, const ad::Var& y, std::size_t bins,
                               std::optional<std::pair<double, double>> range = std::nullopt) {
    if (bins < 2) throw ContractViolation("kl_histogram_1d: bins must be >= 2");
    if (x.cols() != 1 || y.cols() != 1) throw ShapeError("kl_histogram_1d", x.rows(), x.cols(), y.rows(), y.cols());
    if (x.rows() == 0 || y.rows() == 0) throw ContractViolation("kl_histogram_1d: empty sample");
    const auto xs = x.value().data();
    const auto ys = y.value().data();
    const auto [xlo, xhi] = std::minmax_element(xs.begin(), xs.end());
    const auto [ylo, yhi] = std::minmax_element(ys.begin(), ys.end());
    const double lo = range ? range->first : std::min(*xlo, *ylo);
    const double hi = range ? range->second : std::max(*xhi, *yhi);
    auto& graph = x.graph();
    if (!(hi > lo)) return graph.emplace(Tensor::scalar(0.0), "kl_histogram_1d", {x.id(), y.id()}, {});
    const double width = (hi - lo) / static_cast<double>(bins);
    // bin centre b sits at lo + (b + 0.5) * width
    struct Tap {
        std::size_t b0, b1;
        double w1;
    };
    // by value: the backward closure keeps a copy
    auto tap = [lo, width, bins](double v) {
        double t = (v - lo) / width - 0.5;
        t = std::clamp(t, 0.0, static_cast<double>(bins - 1));
        auto b0 = std::min(static_cast<std::size_t>(std::floor(t)), bins - 1);
        auto b1 = std::min(b0 + 1, bins - 1);
        return Tap{b0, b1, t - static_cast<double>(b0)};
    };
    auto histogram = [&](std::span<const double> s) {
        std::vector<double> h(bins, 1.0 / static_cast<double>(bins));
        for (double v : s) {
            const auto tp = tap(v);
            h[tp.b0] += 1.0 - tp.w1;
            h[tp.b1] += tp.w1;
        }
        for (auto& c : h) c /= static_cast<double>(s.size() + 1);
        return h;
    };
    const auto p = histogram(xs), q = histogram(ys);
    double kl = 0.0;
    for (std::size_t b = 0; b < bins; ++b) kl += p[b] * std::log(p[b] / q[b]);
    const auto ix = x.id(), iy = y.id();
    const auto nx = xs.size(), ny = ys.size();
    // range endpoints are treated as constants
    return graph.emplace(
        Tensor::scalar(kl), "kl_histogram_1d", {ix, iy},
        [=](ad::Graph& g, std::span<const double> go) {
            std::vector<double> dp(bins), dq(bins);
            for (std::size_t b = 0; b < bins; ++b) {
                dp[b] = std::log(p[b] / q[b]) + 1.0;
                dq[b] = -p[b] / q[b];
            }
            const auto& X = g.value(ix);
            const auto& Y = g.value(iy);
            auto& gx = g.accum(ix);
            auto& gy = g.accum(iy);
            auto grad_of = [&](double v, const std::vector<double>& dh, double n) {
                double t = (v - lo) / width - 0.5;
                if (t <= 0.0 || t >= static_cast<double>(bins - 1)) return 0.0;
                const auto tp = tap(v);
                // d(bin mass)/dv = -+1/width on the two taps
                return (dh[tp.b1] - dh[tp.b0]) / (width * (n + 1.0));
            };
            for (std::size_t i = 0; i < nx; ++i) gx[i] += go[0] * grad_of(X[i], dp, static_cast<double>(nx));
            for (std::size_t i = 0; i < ny; ++i) gy[i] += go[0] * grad_of(Y[i], dq, static_cast<double>(ny));
        });
}

/// Differentiable CORAL penalty ||Cov(fs) - Cov(ft)||_F^2 / (4 m^2) with
/// unbiased (n - 1) covariance.
inline ad::Var coral_penalty(const ad::Var& fs, const ad::Var& ft) {
    if (fs.cols() != ft.cols()) throw ShapeError("coral_penalty", fs.rows(), fs.cols(), ft.rows(), ft.cols());
    if (fs.cols() < 1) throw ContractViolation("coral_penalty: need at least one column");
    if (fs.rows() < 2 || ft.rows() < 2) throw ContractViolation("coral_penalty: need >= 2 rows per domain");
    auto& g = fs.graph();
    auto cov = [&g](const ad::Var& f) {
        const auto n = f.rows();
        auto ones = g.constant(Tensor(n, 1, 1.0));
        auto centred = f - ad::matmul(ones, ad::mean_rows(f));
        return ad::scale(ad::matmul(ad::transpose(centred), centred), 1.0 / static_cast<double>(n - 1));
    };
    const double m = static_cast<double>(fs.cols());
    return ad::scale(ad::sum(ad::square(cov(fs) - cov(ft))), 1.0 / (4.0 * m * m));
}

inline double coral_penalty(const Tensor& fs, const Tensor& ft) {
    ad::Graph g;
    return coral_penalty(g.constant(fs), g.constant(ft)).item();
}

/// Differentiable marginal divergence between two n x 1 columns. For MMD
/// the bandwidths come from `kind` or, when empty, from the median
/// heuristic on the current values (treated as constants).
inline ad::Var marginal_divergence(const ad::Var& x, const ad::Var& y, const DivergenceKind& kind) {
    switch (kind.tag) {
        case MarginalKind::mmd_gaussian: {
            auto bw = kind.bandwidths.empty() ? median_heuristic_bandwidths(x.value(), y.value())
                                              : kind.bandwidths;
            return ad::mmd_squared(x, y, std::move(bw));
        }
        case MarginalKind::wasserstein1: return wasserstein1_1d(x, y);
        case MarginalKind::kl_histogram: return kl_histogram_1d(x, y, kind.bins);
    }
    throw ContractViolation("marginal_divergence: unknown kind");
}

inline double marginal_divergence(std::span<const double> x, std::span<const double> y,
                                  const DivergenceKind& kind) {
    kind.validate();
    switch (kind.tag) {
        case MarginalKind::mmd_gaussian: return mmd_squared(x, y, kind);
        case MarginalKind::wasserstein1: return wasserstein1_1d(x, y);
        case MarginalKind::kl_histogram: return kl_histogram_1d(x, y, kind.bins);
    }
    throw ContractViolation("marginal_divergence: unknown kind");
}

}  // namespace cdan
