#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace cdan {

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
    bool operator==(const Shape&) const = default;
};

/// Dense row-major matrix of doubles (rank <= 2). Scalars are 1x1 and
/// vectors are stored as columns (n x 1) unless stated otherwise.
///
/// Values are immutable once constructed; every entry is finite.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : shape_{rows, cols}, data_(rows * cols, fill) {
        check_finite();
    }

    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
        : shape_{rows, cols}, data_(std::move(data)) {
        if (data_.size() != shape_.size())
            throw ShapeError("Tensor", rows, cols, data_.size(), 1);
        check_finite();
    }

    /// Nested initializer, e.g. Tensor{{1, 2}, {3, 4}}.
    Tensor(std::initializer_list<std::initializer_list<double>> rows) {
        shape_.rows = rows.size();
        shape_.cols = rows.size() ? rows.begin()->size() : 0;
        data_.reserve(shape_.size());
        for (const auto& r : rows) {
            if (r.size() != shape_.cols)
                throw ShapeError("Tensor", shape_.rows, shape_.cols, 1, r.size());
            data_.insert(data_.end(), r.begin(), r.end());
        }
        check_finite();
    }

    static Tensor scalar(double v) { return Tensor(1, 1, v); }

    static Tensor column(std::vector<double> v) {
        const auto n = v.size();
        return Tensor(n, 1, std::move(v));
    }

    static Tensor identity(std::size_t n) {
        Tensor t(n, n);
        for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rows() const noexcept { return shape_.rows; }
    std::size_t cols() const noexcept { return shape_.cols; }
    std::size_t size() const noexcept { return data_.size(); }
    bool is_scalar() const noexcept { return shape_.rows == 1 && shape_.cols == 1; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double item() const {
        if (!is_scalar()) throw ContractViolation("Tensor::item on non-scalar tensor");
        return data_[0];
    }

    std::span<const double> data() const noexcept { return data_; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * shape_.cols, shape_.cols);
    }

    std::vector<double> col(std::size_t c) const {
        std::vector<double> out(shape_.rows);
        for (std::size_t r = 0; r < shape_.rows; ++r) out[r] = (*this)(r, c);
        return out;
    }

    Tensor select_rows(std::span<const std::size_t> idx) const {
        std::vector<double> out;
        out.reserve(idx.size() * shape_.cols);
        for (auto r : idx) {
            auto src = row(r);
            out.insert(out.end(), src.begin(), src.end());
        }
        return Tensor(idx.size(), shape_.cols, std::move(out));
    }

    /// Copy with one entry replaced; used by finite-difference probing.
    Tensor with_entry(std::size_t i, double v) const {
        auto d = data_;
        d[i] = v;
        return Tensor(shape_.rows, shape_.cols, std::move(d));
    }

    bool operator==(const Tensor&) const = default;

private:
    void check_finite() const {
        for (std::size_t i = 0; i < data_.size(); ++i) {
            if (!std::isfinite(data_[i]))
                throw DomainError("non-finite value at flat index " + std::to_string(i) +
                                  " of " + std::to_string(shape_.rows) + "x" +
                                  std::to_string(shape_.cols) + " tensor");
        }
    }

    Shape shape_{};
    std::vector<double> data_;
};

inline std::string to_string(const Shape& s) {
    return std::to_string(s.rows) + "x" + std::to_string(s.cols);
}

}  // namespace cdan
