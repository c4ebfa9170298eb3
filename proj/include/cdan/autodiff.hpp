#pragma once

// Tape-based reverse-mode differentiation over dense Tensors.
//
// A Graph owns every node created while evaluating an expression. Nodes are
// appended in creation order, which is also a topological order, so the
// backward sweep simply walks the tape in reverse. Leaves are nodes without a
// backward rule; their accumulated gradient is what backward() produces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "tensor.hpp"

namespace cdan::ad {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while the graph
/// that created it is alive.
class Var {
public:
    Var() = default;
    Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

    Graph& graph() const { return *graph_; }
    std::size_t id() const noexcept { return id_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return shape().rows; }
    std::size_t cols() const { return shape().cols; }
    double item() const { return value().item(); }

private:
    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

using BackwardFn = std::function<void(Graph&, std::span<const double> out_grad)>;

struct Node {
    Tensor value;
    std::string op;
    std::vector<std::size_t> parents;
    BackwardFn backward;  // empty for leaves
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    Var leaf(Tensor value) {
        nodes_.push_back(Node{std::move(value), "leaf", {}, {}});
        return Var(this, nodes_.size() - 1);
    }

    /// Constants are leaves whose gradient nobody reads.
    Var constant(Tensor value) { return leaf(std::move(value)); }
    Var scalar(double v) { return leaf(Tensor::scalar(v)); }

    Var emplace(Tensor value, std::string op, std::vector<std::size_t> parents,
                BackwardFn backward) {
        nodes_.push_back(
            Node{std::move(value), std::move(op), std::move(parents), std::move(backward)});
        return Var(this, nodes_.size() - 1);
    }

    const Node& node(std::size_t id) const { return nodes_.at(id); }
    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Gradient buffer of a node, zero-initialised on first touch.
    std::vector<double>& accum(std::size_t id) {
        if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
        auto& g = grads_[id];
        if (g.empty()) g.assign(nodes_[id].value.size(), 0.0);
        return g;
    }

    /// Reverse sweep from a scalar output. Afterwards every node reachable
    /// from `output` holds d(output)/d(node); the rest hold zero.
    void backward(Var output) {
        const auto& out = nodes_.at(output.id()).value;
        if (!out.is_scalar())
            throw ContractViolation("backward: output must be 1x1, got " +
                                    to_string(out.shape()));
        reset_gradients();
        grads_.resize(nodes_.size());
        accum(output.id())[0] = 1.0;
        for (std::size_t i = output.id() + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (!n.backward || grads_[i].empty()) continue;
            // grads_ is already sized, so accum() on parents never moves this buffer
            n.backward(*this, std::span<const double>(grads_[i]));
        }
    }

    void reset_gradients() {
        grads_.clear();
        grads_.resize(nodes_.size());
    }

    /// Accumulated gradient of `v` (zeros when unreachable from the output).
    Tensor grad(Var v) const {
        const auto& val = nodes_.at(v.id()).value;
        if (v.id() < grads_.size() && !grads_[v.id()].empty())
            return Tensor(val.rows(), val.cols(), grads_[v.id()]);
        return Tensor(val.rows(), val.cols());
    }

private:
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
};

inline const Tensor& Var::value() const { return graph_->value(id_); }

namespace detail {

inline void same_graph(const Var& a, const Var& b, const char* op) {
    if (&a.graph() != &b.graph())
        throw ContractViolation(std::string(op) + ": operands belong to different graphs");
}

inline void same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(op, a.rows(), a.cols(), b.rows(), b.cols());
}

// Elementwise binary op with optional scalar broadcast on either side.
template <class F, class DA, class DB>
Var binary(const Var& a, const Var& b, const char* op, F f, DA dfa, DB dfb) {
    same_graph(a, b, op);
    const bool a_sc = a.value().is_scalar();
    const bool b_sc = b.value().is_scalar();
    if (a.shape() != b.shape() && !a_sc && !b_sc)
        throw ShapeError(op, a.rows(), a.cols(), b.rows(), b.cols());
    const Shape out_shape = (a_sc && !b_sc) ? b.shape() : a.shape();
    const auto n = out_shape.size();
    const auto& av = a.value();
    const auto& bv = b.value();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[a_sc ? 0 : i], bv[b_sc ? 0 : i]);
    const auto ia = a.id(), ib = b.id();
    return a.graph().emplace(
        Tensor(out_shape.rows, out_shape.cols, std::move(out)), op, {ia, ib},
        [ia, ib, a_sc, b_sc, dfa, dfb](Graph& g, std::span<const double> go) {
            const auto& x = g.value(ia);
            const auto& y = g.value(ib);
            {
                auto& ga = g.accum(ia);
                for (std::size_t i = 0; i < go.size(); ++i)
                    ga[a_sc ? 0 : i] += go[i] * dfa(x[a_sc ? 0 : i], y[b_sc ? 0 : i]);
            }
            {
                auto& gb = g.accum(ib);
                for (std::size_t i = 0; i < go.size(); ++i)
                    gb[b_sc ? 0 : i] += go[i] * dfb(x[a_sc ? 0 : i], y[b_sc ? 0 : i]);
            }
        });
}

}  // namespace detail

/// Elementwise map with a caller-supplied derivative. `df` receives the
/// input value and the output value.
template <class F, class DF>
Var map(const Var& a, std::string op, F f, DF df) {
    const auto& av = a.value();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    const auto ia = a.id();
    auto& g = a.graph();
    const auto id = g.size();
    return g.emplace(Tensor(av.rows(), av.cols(), std::move(out)), std::move(op), {ia},
                     [ia, id, df](Graph& gr, std::span<const double> go) {
                         const auto& x = gr.value(ia);
                         const auto& y = gr.value(id);
                         auto& ga = gr.accum(ia);
                         for (std::size_t i = 0; i < go.size(); ++i)
                             ga[i] += go[i] * df(x[i], y[i]);
                     });
}

inline Var add(const Var& a, const Var& b) {
    return detail::binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Var sub(const Var& a, const Var& b) {
    return detail::binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Var mul(const Var& a, const Var& b) {
    return detail::binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Var div(const Var& a, const Var& b) {
    for (double y : b.value().data())
        if (y == 0.0) throw DomainError("div: zero divisor");
    return detail::binary(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

inline Var add_scalar(const Var& a, double c) {
    return map(a, "add_scalar", [c](double x) { return x + c; },
               [](double, double) { return 1.0; });
}

inline Var scale(const Var& a, double c) {
    return map(a, "scale", [c](double x) { return c * x; },
               [c](double, double) { return c; });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator+(const Var& a, double c) { return add_scalar(a, c); }
inline Var operator+(double c, const Var& a) { return add_scalar(a, c); }
inline Var operator-(const Var& a, double c) { return add_scalar(a, -c); }
inline Var operator-(double c, const Var& a) { return add_scalar(scale(a, -1.0), c); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

inline Var exp(const Var& a) {
    return map(a, "exp", [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

inline Var log(const Var& a) {
    for (double x : a.value().data())
        if (!(x > 0.0)) throw DomainError("log: nonpositive operand " + std::to_string(x));
    return map(a, "log", [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

inline Var tanh(const Var& a) {
    return map(a, "tanh", [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

inline Var sin(const Var& a) {
    return map(a, "sin", [](double x) { return std::sin(x); },
               [](double x, double) { return std::cos(x); });
}

/// Gradient at exactly 0 is 0.
inline Var relu(const Var& a) {
    return map(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

/// Subgradient 0 at the kink.
inline Var abs(const Var& a) {
    return map(a, "abs", [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Var sqrt(const Var& a) {
    for (double x : a.value().data())
        if (x < 0.0) throw DomainError("sqrt: negative operand " + std::to_string(x));
    return map(a, "sqrt", [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

inline Var square(const Var& a) {
    return map(a, "square", [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

/// Clamp into [lo, hi]; gradient passes only strictly inside the interval.
inline Var clamp(const Var& a, double lo, double hi) {
    return map(a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

inline Var clamp_min(const Var& a, double lo) {
    return clamp(a, lo, std::numeric_limits<double>::max());
}

inline Var matmul(const Var& a, const Var& b) {
    detail::same_graph(a, b, "matmul");
    if (a.cols() != b.rows()) throw ShapeError("matmul", a.rows(), a.cols(), b.rows(), b.cols());
    const auto n = a.rows(), k = a.cols(), m = b.cols();
    const auto& A = a.value();
    const auto& B = b.value();
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A(i, p);
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) out[i * m + j] += aip * B(p, j);
        }
    const auto ia = a.id(), ib = b.id();
    return a.graph().emplace(
        Tensor(n, m, std::move(out)), "matmul", {ia, ib},
        [ia, ib, n, k, m](Graph& g, std::span<const double> go) {
            const auto& A = g.value(ia);
            const auto& B = g.value(ib);
            {
                auto& ga = g.accum(ia);  // dA = dC * B^T
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < m; ++j) s += go[i * m + j] * B(p, j);
                        ga[i * k + p] += s;
                    }
            }
            {
                auto& gb = g.accum(ib);  // dB = A^T * dC
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = A(i, p);
                        if (aip == 0.0) continue;
                        for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += aip * go[i * m + j];
                    }
            }
        });
}

inline Var transpose(const Var& a) {
    const auto r = a.rows(), c = a.cols();
    const auto& A = a.value();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A(i, j);
    const auto ia = a.id();
    return a.graph().emplace(Tensor(c, r, std::move(out)), "transpose", {ia},
                             [ia, r, c](Graph& g, std::span<const double> go) {
                                 auto& ga = g.accum(ia);
                                 for (std::size_t i = 0; i < r; ++i)
                                     for (std::size_t j = 0; j < c; ++j)
                                         ga[i * c + j] += go[j * r + i];
                             });
}

/// Adds a 1 x cols bias row to every row of `a`.
inline Var add_bias(const Var& a, const Var& bias) {
    detail::same_graph(a, bias, "add_bias");
    if (bias.rows() != 1 || bias.cols() != a.cols())
        throw ShapeError("add_bias", a.rows(), a.cols(), bias.rows(), bias.cols());
    const auto r = a.rows(), c = a.cols();
    const auto& A = a.value();
    const auto& B = bias.value();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = A(i, j) + B[j];
    const auto ia = a.id(), ib = bias.id();
    return a.graph().emplace(Tensor(r, c, std::move(out)), "add_bias", {ia, ib},
                             [ia, ib, r, c](Graph& g, std::span<const double> go) {
                                 auto& ga = g.accum(ia);
                                 for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
                                 auto& gb = g.accum(ib);
                                 for (std::size_t i = 0; i < r; ++i)
                                     for (std::size_t j = 0; j < c; ++j) gb[j] += go[i * c + j];
                             });
}

inline Var sum(const Var& a) {
    double s = 0.0;
    for (double x : a.value().data()) s += x;
    const auto ia = a.id();
    return a.graph().emplace(Tensor::scalar(s), "sum", {ia},
                             [ia](Graph& g, std::span<const double> go) {
                                 auto& ga = g.accum(ia);
                                 for (auto& x : ga) x += go[0];
                             });
}

inline Var mean(const Var& a) {
    if (a.value().size() == 0) throw ContractViolation("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

/// Column means as a 1 x cols row.
inline Var mean_rows(const Var& a) {
    const auto r = a.rows(), c = a.cols();
    if (r == 0) throw ContractViolation("mean_rows: no rows");
    const auto& A = a.value();
    std::vector<double> out(c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += A(i, j);
    for (auto& x : out) x /= static_cast<double>(r);
    const auto ia = a.id();
    return a.graph().emplace(Tensor(1, c, std::move(out)), "mean_rows", {ia},
                             [ia, r, c](Graph& g, std::span<const double> go) {
                                 auto& ga = g.accum(ia);
                                 const double inv = 1.0 / static_cast<double>(r);
                                 for (std::size_t i = 0; i < r; ++i)
                                     for (std::size_t j = 0; j < c; ++j)
                                         ga[i * c + j] += go[j] * inv;
                             });
}

/// Rows start, start+step, ... (count rows).
inline Var rows_strided(const Var& a, std::size_t start, std::size_t step, std::size_t count) {
    if (step == 0 || (count > 0 && start + (count - 1) * step >= a.rows()))
        throw ContractViolation("rows_strided: index range outside " + to_string(a.shape()));
    const auto c = a.cols();
    const auto& A = a.value();
    std::vector<double> out;
    out.reserve(count * c);
    for (std::size_t k = 0; k < count; ++k) {
        auto r = A.row(start + k * step);
        out.insert(out.end(), r.begin(), r.end());
    }
    const auto ia = a.id();
    return a.graph().emplace(Tensor(count, c, std::move(out)), "rows_strided", {ia},
                             [ia, start, step, count, c](Graph& g, std::span<const double> go) {
                                 auto& ga = g.accum(ia);
                                 for (std::size_t k = 0; k < count; ++k)
                                     for (std::size_t j = 0; j < c; ++j)
                                         ga[(start + k * step) * c + j] += go[k * c + j];
                             });
}

/// Column j as an n x 1 tensor.
inline Var col(const Var& a, std::size_t j) {
    if (j >= a.cols()) throw ContractViolation("col: index " + std::to_string(j) + " outside " +
                                               to_string(a.shape()));
    const auto r = a.rows(), c = a.cols();
    const auto& A = a.value();
    std::vector<double> out(r);
    for (std::size_t i = 0; i < r; ++i) out[i] = A(i, j);
    const auto ia = a.id();
    return a.graph().emplace(Tensor(r, 1, std::move(out)), "col", {ia},
                             [ia, j, r, c](Graph& g, std::span<const double> go) {
                                 auto& ga = g.accum(ia);
                                 for (std::size_t i = 0; i < r; ++i) ga[i * c + j] += go[i];
                             });
}

/// Row-wise softmax (max-shifted).
inline Var softmax_rows(const Var& a) {
    const auto r = a.rows(), c = a.cols();
    const auto& A = a.value();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, A(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += (out[i * c + j] = std::exp(A(i, j) - mx));
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
    }
    const auto ia = a.id();
    auto& g = a.graph();
    const auto id = g.size();
    return g.emplace(Tensor(r, c, std::move(out)), "softmax_rows", {ia},
                     [ia, id, r, c](Graph& gr, std::span<const double> go) {
                         const auto& y = gr.value(id);
                         auto& ga = gr.accum(ia);
                         for (std::size_t i = 0; i < r; ++i) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < c; ++j) dot += go[i * c + j] * y(i, j);
                             for (std::size_t j = 0; j < c; ++j)
                                 ga[i * c + j] += y(i, j) * (go[i * c + j] - dot);
                         }
                     });
}

namespace detail {

// Pair count up to which kernel derivatives are kept from the forward pass.
inline constexpr std::size_t kMmdCachePairs = std::size_t{1} << 22;

// Visits the off-diagonal x-x pairs, the y-y pairs and the x-y pairs in a
// fixed order; f(block, a, b) with block 0 = xx, 1 = yy, 2 = xy.
template <class F>
void for_each_mmd_pair(std::size_t n, std::size_t m, F&& f) {
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) f(0, a, b);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) f(1, a, b);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < m; ++b) f(2, a, b);
}

}  // namespace detail

/// Biased (V-statistic) squared MMD between the rows of `x` and `y` with a
/// sum of Gaussian kernels exp(-||u - v||^2 / h), one per bandwidth h.
/// The estimate is clamped at zero from below.
inline Var mmd_squared(const Var& x, const Var& y, std::vector<double> bandwidths) {
    detail::same_graph(x, y, "mmd_squared");
    if (x.cols() != y.cols()) throw ShapeError("mmd_squared", x.rows(), x.cols(), y.rows(), y.cols());
    if (x.rows() == 0 || y.rows() == 0) throw ContractViolation("mmd_squared: empty sample");
    if (bandwidths.empty()) throw ContractViolation("mmd_squared: no bandwidths");
    for (double h : bandwidths)
        if (!(h > 0.0)) throw ContractViolation("mmd_squared: bandwidth must be > 0");

    const auto n = x.rows(), m = y.rows(), d = x.cols();
    const auto& X = x.value();
    const auto& Y = y.value();
    auto row = [&](std::size_t block, std::size_t a, std::size_t b) {
        const auto& U = block == 1 ? Y : X;
        const auto& V = block == 0 ? X : Y;
        return std::pair{U.row(a), V.row(b)};
    };
    auto sqdist = [d](std::span<const double> u, std::span<const double> v) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double t = u[c] - v[c];
            s += t * t;
        }
        return s;
    };

    const std::size_t pairs = n * (n - 1) / 2 + m * (m - 1) / 2 + n * m;
    const bool cache = pairs <= detail::kMmdCachePairs;
    // sum over bandwidths of d k / d(||u - v||^2) = -k / h
    std::vector<double> dk;
    if (cache) dk.reserve(pairs);

    // Diagonal pairs contribute k(u, u) = 1 per bandwidth.
    const double nb = static_cast<double>(bandwidths.size());
    double sum[3] = {nb * static_cast<double>(n), nb * static_cast<double>(m), 0.0};
    detail::for_each_mmd_pair(n, m, [&](std::size_t block, std::size_t a, std::size_t b) {
        const auto [u, v] = row(block, a, b);
        const double dd = sqdist(u, v);
        double k = 0.0, dksum = 0.0, prev_e = 0.0, prev_h = 0.0;
        for (double h : bandwidths) {
            // a doubled bandwidth is the square root of the previous kernel
            const double e = h == 2.0 * prev_h ? std::sqrt(prev_e) : std::exp(-dd / h);
            k += e;
            dksum -= e / h;
            prev_e = e;
            prev_h = h;
        }
        sum[block] += block == 2 ? k : 2.0 * k;
        if (cache) dk.push_back(dksum);
    });

    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    const double raw = sum[0] / (dn * dn) + sum[1] / (dm * dm) - 2.0 * sum[2] / (dn * dm);
    const bool clamped = raw < 0.0;
    const double value = clamped ? 0.0 : raw;

    const auto ix = x.id(), iy = y.id();
    return x.graph().emplace(
        Tensor::scalar(value), "mmd_squared", {ix, iy},
        [ix, iy, n, m, d, clamped, cache, dk = std::move(dk), bandwidths = std::move(bandwidths)](
            Graph& g, std::span<const double> go) {
            if (clamped) return;
            const auto& X = g.value(ix);
            const auto& Y = g.value(iy);
            auto& gx = g.accum(ix);
            auto& gy = g.accum(iy);
            const double dn = static_cast<double>(n), dm = static_cast<double>(m);
            // xx and yy pairs appear twice in the V-statistic
            const double coef[3] = {2.0 * go[0] / (dn * dn), 2.0 * go[0] / (dm * dm),
                                    -2.0 * go[0] / (dn * dm)};
            std::vector<double> diff(d);
            std::size_t next = 0;
            auto visit = [&](const double* u, const double* v, double c, double* gu, double* gv) {
                double dd = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    diff[k] = u[k] - v[k];
                    dd += diff[k] * diff[k];
                }
                double dksum = 0.0;
                if (cache) {
                    dksum = dk[next++];
                } else {
                    for (double h : bandwidths) dksum -= std::exp(-dd / h) / h;
                }
                // d/du of k(||u - v||^2) is 2 (u - v) k'
                const double w = 2.0 * c * dksum;
                for (std::size_t k = 0; k < d; ++k) {
                    gu[k] += w * diff[k];
                    gv[k] -= w * diff[k];
                }
            };
            const double* xp = X.data().data();
            const double* yp = Y.data().data();
            // same traversal order as the forward pass
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = a + 1; b < n; ++b)
                    visit(xp + a * d, xp + b * d, coef[0], &gx[a * d], &gx[b * d]);
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = a + 1; b < m; ++b)
                    visit(yp + a * d, yp + b * d, coef[1], &gy[a * d], &gy[b * d]);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = 0; b < m; ++b)
                    visit(xp + a * d, yp + b * d, coef[2], &gx[a * d], &gy[b * d]);
        });
}

/// Builds a scalar loss from fresh leaves holding the given tensors.
using LossBuilder = std::function<Var(Graph&, std::span<const Var>)>;

/// Largest |autodiff - central difference| / (|central difference| + 1e-12)
/// over every entry of every leaf.
inline double finite_difference_check(const LossBuilder& build, const std::vector<Tensor>& leaves,
                                      double step) {
    if (!(step > 0.0)) throw ContractViolation("finite_difference_check: step must be > 0");

    auto evaluate = [&](const std::vector<Tensor>& point) {
        Graph g;
        std::vector<Var> vars;
        vars.reserve(point.size());
        for (const auto& t : point) vars.push_back(g.leaf(t));
        return build(g, vars).item();
    };

    std::vector<Tensor> analytic;
    {
        Graph g;
        std::vector<Var> vars;
        for (const auto& t : leaves) vars.push_back(g.leaf(t));
        auto out = build(g, vars);
        g.backward(out);
        for (const auto& v : vars) analytic.push_back(g.grad(v));
    }

    double worst = 0.0;
    auto point = leaves;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        for (std::size_t i = 0; i < leaves[l].size(); ++i) {
            const double x0 = leaves[l][i];
            // divide by the representable step actually taken
            const double xp = x0 + step, xm = x0 - step;
            double fp = 0.0, fm = 0.0;
            try {
                point[l] = leaves[l].with_entry(i, xp);
                fp = evaluate(point);
                point[l] = leaves[l].with_entry(i, xm);
                fm = evaluate(point);
            } catch (const DomainError& e) {
                throw DomainError("finite_difference_check: leaf " + std::to_string(l) +
                                  " entry " + std::to_string(i) + ": " + e.what());
            }
            point[l] = leaves[l];
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw DomainError("finite_difference_check: non-finite loss at leaf " +
                                  std::to_string(l) + " entry " + std::to_string(i));
            const double central = (fp - fm) / (xp - xm);
            const double err = std::abs(analytic[l][i] - central) / (std::abs(central) + 1e-12);
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace cdan::ad
