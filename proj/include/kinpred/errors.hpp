#ifndef KINPRED_ERRORS_HPP
#define KINPRED_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kinpred {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments, inconsistent shapes, unusable configuration.
struct InvalidInput : Error {
    using Error::Error;
};

// Query outside the span of a series (never extrapolated).
struct OutOfRange : Error {
    using Error::Error;
};

// Input too short for the requested operation.
struct TooShort : Error {
    using Error::Error;
};

// Geometrically degenerate marker configuration.
struct RankDeficient : Error {
    using Error::Error;
};

// Iterative solver failed to reach its tolerance.
struct ConvergenceFailure : Error {
    double residual = 0.0;
    ConvergenceFailure(const std::string& msg, double res) : Error(msg), residual(res) {}
};

// Non-finite loss during training.
struct Divergence : Error {
    using Error::Error;
};

// Statistic undefined for the given data (zero variance etc).
struct Degenerate : Error {
    using Error::Error;
};

// Results grid missing cells required for an aggregate.
struct IncompleteGrid : Error {
    using Error::Error;
};

// File and format problems.
struct IoError : Error {
    using Error::Error;
};

} // namespace kinpred

#endif
