#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdan {

/// Violated precondition of a public operation (bad argument, wrong sizes
/// where no shape is involved, unsupported configuration).
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operand outside the mathematical domain of an operation, or a
/// non-finite value about to enter a Tensor.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Mismatched tensor shapes. Carries the operation name and both shapes.
class ShapeError : public std::invalid_argument {
public:
    ShapeError(const std::string& op, std::size_t lr, std::size_t lc, std::size_t rr,
               std::size_t rc)
        : std::invalid_argument(op + ": shape mismatch " + std::to_string(lr) + "x" +
                                std::to_string(lc) + " vs " + std::to_string(rr) + "x" +
                                std::to_string(rc)),
          op_(op) {}

    const std::string& op() const noexcept { return op_; }

private:
    std::string op_;
};

/// Malformed input file or configuration record.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ContractViolation(what);
}

}  // namespace detail
}  // namespace cdan
