#pragma once

// Datasets: the stretched two-moons generator, a delimited-text loader,
// min-max scaling and seeded batching.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "tensor.hpp"

namespace cdan {

enum class Domain { source, target };

struct Dataset {
    Tensor features;
    std::optional<std::vector<double>> labels;
    Domain domain = Domain::source;
    std::vector<std::string> feature_names;
    std::string label_name = "label";

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }
    bool labeled() const { return labels.has_value(); }

    void check() const {
        if (features.cols() < 1) throw ContractViolation("Dataset: need at least one feature column");
        if (labels && labels->size() != features.rows())
            throw ContractViolation("Dataset: " + std::to_string(labels->size()) + " labels for " +
                                    std::to_string(features.rows()) + " rows");
        if (!feature_names.empty() && feature_names.size() != features.cols())
            throw ContractViolation("Dataset: feature name count does not match columns");
    }

    /// Labels as 0-based class indices; throws when a label is not integral.
    std::vector<int> class_labels() const {
        if (!labels) throw ContractViolation("Dataset: no labels");
        std::vector<int> out;
        out.reserve(labels->size());
        for (double y : *labels) {
            if (y != std::floor(y) || y < 0) throw ContractViolation("Dataset: label " + std::to_string(y) + " is not a class index");
            out.push_back(static_cast<int>(y));
        }
        return out;
    }

    Dataset subset(std::span<const std::size_t> rows) const {
        Dataset d{features.select_rows(rows), std::nullopt, domain, feature_names, label_name};
        if (labels) {
            std::vector<double> l;
            l.reserve(rows.size());
            for (auto r : rows) l.push_back((*labels)[r]);
            d.labels = std::move(l);
        }
        return d;
    }

    Dataset without_labels() const {
        Dataset d = *this;
        d.labels.reset();
        return d;
    }
};

// ------------------------------------------------------------------- moons

struct MoonsConfig {
    std::size_t n_per_class = 512;
    double stretch = 1.0;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_per_class < 1) throw ContractViolation("MoonsConfig.n_per_class: must be >= 1");
        if (!(stretch >= 1.0)) throw ContractViolation("MoonsConfig.stretch: must be >= 1");
        if (!(noise_sigma >= 0.0)) throw ContractViolation("MoonsConfig.noise_sigma: must be >= 0");
    }
};

/// Noise-free point of a moon at abscissa u, before stretching. Class 0
/// takes u in [-1, 1], class 1 takes u in [0, 2].
inline std::pair<double, double> moon_point(int cls, double u) {
    if (cls == 0) return {u, std::sqrt(std::max(0.0, 1.0 - u * u))};
    const double t = 1.0 - u;
    return {u, 0.5 - std::sqrt(std::max(0.0, 1.0 - t * t))};
}

/// Class 0 rows first, then class 1; only the x coordinate is stretched.
inline Dataset generate_moons(const MoonsConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u0(-1.0, 1.0), u1(0.0, 2.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto n = cfg.n_per_class;
    std::vector<double> x(4 * n), y(2 * n);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t k = 0; k < n; ++k) {
            const auto row = c * n + k;
            auto [px, py] = moon_point(static_cast<int>(c), c == 0 ? u0(rng) : u1(rng));
            px *= cfg.stretch;
            if (cfg.noise_sigma > 0.0) {
                px += cfg.noise_sigma * noise(rng);
                py += cfg.noise_sigma * noise(rng);
            }
            x[2 * row] = px;
            x[2 * row + 1] = py;
            y[row] = static_cast<double>(c);
        }
    return {Tensor(2 * n, 2, std::move(x)), std::move(y), Domain::source, {"x", "y"}, "label"};
}

// ------------------------------------------------------------------ loader

namespace detail {

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    s = s.substr(b, e - b + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

inline std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto p = line.find(delim, start);
        out.push_back(trim(std::string_view(line).substr(start, p == std::string::npos ? std::string::npos : p - start)));
        if (p == std::string::npos) break;
        start = p + 1;
    }
    return out;
}

inline double parse_real(const std::string& cell, std::size_t row, std::size_t col,
                         const std::string& path) {
    double v = 0.0;
    const char* b = cell.data();
    const char* e = b + cell.size();
    if (!cell.empty() && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || !std::isfinite(v))
        throw ConfigError(path + ": row " + std::to_string(row) + ", column " + std::to_string(col) +
                          ": cannot parse '" + cell + "' as a real number");
    return v;
}

}  // namespace detail

/// Reads a header + rows text table. Lines starting with '#' are skipped.
/// `row` in error messages is the 1-based line number of the file.
inline Dataset load_delimited(const std::string& path, char delimiter = ',',
                              const std::string& label_column = "") {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open file");
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty() || line[0] == '#') continue;
        header = detail::split(line, delimiter);
        break;
    }
    if (header.empty()) throw ConfigError(path + ": missing header row");

    std::optional<std::size_t> label_idx;
    if (!label_column.empty()) {
        auto it = std::find(header.begin(), header.end(), label_column);
        if (it == header.end()) throw ConfigError(path + ": label column '" + label_column + "' not found in header");
        label_idx = static_cast<std::size_t>(it - header.begin());
    }
    Dataset ds;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != label_idx) ds.feature_names.push_back(header[c]);
    if (ds.feature_names.empty()) throw ConfigError(path + ": no feature columns");
    if (label_idx) ds.label_name = label_column;

    std::vector<double> x, y;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty() || line[0] == '#') continue;
        const auto cells = detail::split(line, delimiter);
        if (cells.size() != header.size())
            throw ConfigError(path + ": row " + std::to_string(lineno) + ": expected " +
                              std::to_string(header.size()) + " columns, found " +
                              std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const double v = detail::parse_real(cells[c], lineno, c + 1, path);
            (c == label_idx ? y : x).push_back(v);
        }
        ++rows;
    }
    ds.features = Tensor(rows, ds.feature_names.size(), std::move(x));
    if (label_idx) ds.labels = std::move(y);
    return ds;
}

/// Comma-separated dump with header, labels in the last column. Each line
/// of `comment` is written first, prefixed with "# ".
inline void write_csv(const Dataset& ds, const std::string& path, const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    out.precision(17);
    std::istringstream cs(comment);
    for (std::string l; std::getline(cs, l);) out << "# " << l << '\n';
    for (std::size_t c = 0; c < ds.dim(); ++c) {
        if (c) out << ',';
        out << (ds.feature_names.size() == ds.dim() ? ds.feature_names[c] : "x" + std::to_string(c));
    }
    if (ds.labels) out << ',' << ds.label_name;
    out << '\n';
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t c = 0; c < ds.dim(); ++c) {
            if (c) out << ',';
            out << ds.features(r, c);
        }
        if (ds.labels) out << ',' << (*ds.labels)[r];
        out << '\n';
    }
    if (!out) throw ConfigError(path + ": write failed");
}

// ----------------------------------------------------------- normalisation

/// Per-column min/max (and label min/max when the stats set is labeled).
struct MinMaxScaler {
    std::vector<double> min, max;
    std::optional<double> label_min, label_max;

    static double apply(double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.0; }
    static double invert(double v, double lo, double hi) { return hi > lo ? lo + v * (hi - lo) : lo; }

    Dataset transform(const Dataset& ds, bool scale_labels = true) const {
        if (ds.dim() != min.size())
            throw ShapeError("minmax_normalize", ds.size(), ds.dim(), 1, min.size());
        std::vector<double> x(ds.features.data().begin(), ds.features.data().end());
        for (std::size_t r = 0; r < ds.size(); ++r)
            for (std::size_t c = 0; c < ds.dim(); ++c) {
                auto& v = x[r * ds.dim() + c];
                v = apply(v, min[c], max[c]);
            }
        Dataset out = ds;
        out.features = Tensor(ds.size(), ds.dim(), std::move(x));
        if (out.labels && scale_labels && label_min)
            for (auto& y : *out.labels) y = apply(y, *label_min, *label_max);
        return out;
    }

    double inverse_label(double y) const {
        if (!label_min) return y;
        return invert(y, *label_min, *label_max);
    }

    double inverse_feature(std::size_t c, double v) const { return invert(v, min.at(c), max.at(c)); }
};

inline MinMaxScaler fit_minmax(std::span<const Dataset* const> stats) {
    if (stats.empty()) throw ContractViolation("fit_minmax: no datasets");
    const auto d = stats[0]->dim();
    MinMaxScaler s{std::vector<double>(d, INFINITY), std::vector<double>(d, -INFINITY), {}, {}};
    bool labeled = false;
    double lmin = INFINITY, lmax = -INFINITY;
    for (const auto* ds : stats) {
        if (ds->dim() != d) throw ShapeError("fit_minmax", ds->size(), ds->dim(), 1, d);
        for (std::size_t r = 0; r < ds->size(); ++r)
            for (std::size_t c = 0; c < d; ++c) {
                s.min[c] = std::min(s.min[c], ds->features(r, c));
                s.max[c] = std::max(s.max[c], ds->features(r, c));
            }
        if (ds->labels)
            for (double y : *ds->labels) {
                labeled = true;
                lmin = std::min(lmin, y);
                lmax = std::max(lmax, y);
            }
    }
    if (labeled) {
        s.label_min = lmin;
        s.label_max = lmax;
    }
    return s;
}

struct Normalized {
    MinMaxScaler scaler;
    std::vector<Dataset> data;
};

/// Column-wise (x - min) / (max - min) with min/max from `stats`; no
/// clipping, constant columns map to 0.
inline Normalized minmax_normalize(const Dataset& stats, std::span<const Dataset> apply_to) {
    const Dataset* p = &stats;
    Normalized out{fit_minmax(std::span<const Dataset* const>(&p, 1)), {}};
    for (const auto& ds : apply_to) out.data.push_back(out.scaler.transform(ds));
    return out;
}

// ---------------------------------------------------------------- batching

/// Shuffled row-index batches, deterministic in (seed, epoch). A trailing
/// batch of odd size is dropped so every batch pairs up evenly.
inline std::vector<std::vector<std::size_t>> batch_iterator(std::size_t n, std::size_t batch_size,
                                                            std::uint64_t seed, std::uint64_t epoch) {
    if (batch_size < 2 || batch_size % 2 != 0)
        throw ContractViolation("batch_iterator: batch size must be even and >= 2, got " + std::to_string(batch_size));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
    std::mt19937_64 rng(seq);
    // explicit Fisher-Yates: std::shuffle's draw pattern is implementation-defined
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t s = 0; s < n; s += batch_size) {
        const auto e = std::min(n, s + batch_size);
        if ((e - s) % 2 != 0) break;
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                             order.begin() + static_cast<std::ptrdiff_t>(e));
    }
    return batches;
}

inline std::vector<std::vector<std::size_t>> batch_iterator(const Dataset& ds, std::size_t batch_size,
                                                            std::uint64_t seed, std::uint64_t epoch) {
    return batch_iterator(ds.size(), batch_size, seed, epoch);
}

}  // namespace cdan
