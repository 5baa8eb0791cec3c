#pragma once

#include <stdexcept>
#include <string>

namespace mcsbi {

/// Malformed model or property text. Carries a 1-based line/column when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line = 0, int column = 0)
        : std::runtime_error(format(msg, line, column)), line_(line), column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    static std::string format(const std::string& msg, int line, int column) {
        if (line <= 0) return msg;
        std::string s = "line " + std::to_string(line);
        if (column > 0) s += ", col " + std::to_string(column);
        return s + ": " + msg;
    }
    int line_;
    int column_;
};

/// Structural problem with a model (bad stoichiometry, unknown name, ...).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A propensity evaluated to a negative value at a visited state.
class PropensityViolation : public ModelError {
public:
    using ModelError::ModelError;
};

/// Requested approximation order or feature outside the supported set.
class NotSupportedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: non-finite values, accuracy assertions, bad covariance.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The adaptive integrator underflowed its step size.
class StiffnessError : public NumericError {
public:
    StiffnessError(const std::string& msg, double time) : NumericError(msg), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

/// Reachable state enumeration exceeded the configured cap.
class StateSpaceOverflow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mcsbi
