#pragma once

#include <stdexcept>
#include <string>

namespace pick {

/// Invalid argument, shape mismatch or malformed input. Maps to exit code 1.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Data that makes an estimator ill-posed (constant columns, identical samples).
class DegenerateDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A factorization or solve that failed despite regularization.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested a closed-form quantity for a link function that has none.
class UnsupportedLinkError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ArgumentError(what);
}

}  // namespace detail
}  // namespace pick
