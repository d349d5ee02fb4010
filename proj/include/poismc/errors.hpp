#pragma once

#include <stdexcept>
#include <string>

namespace poismc {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Model parameters violate a stability requirement (e.g. arrival rate >= service rate).
class UnstableModel : public Error {
public:
    using Error::Error;
};

/// No unique stationary distribution (reducible or otherwise degenerate chain).
class NoUniqueStationary : public Error {
public:
    using Error::Error;
};

/// A linear solve failed beyond the known, anchored rank deficiency.
class SolverFailure : public Error {
public:
    using Error::Error;
};

/// Partial sums of the solution series did not converge within the term budget.
class SeriesDiverged : public Error {
public:
    using Error::Error;
};

/// A certified property (monotonicity, Lipschitz bound) failed numerically.
class CertificationFailed : public Error {
public:
    using Error::Error;
};

/// The chain is not contractive on average (estimated factor >= 1).
class NotContractive : public Error {
public:
    using Error::Error;
};

/// The regeneration measure is not absolutely continuous where required.
class MinorizationUnsupported : public Error {
public:
    using Error::Error;
};

/// The residual split kernel failed to be a probability law at runtime.
class MinorizationViolated : public Error {
public:
    using Error::Error;
};

/// A regeneration cycle exceeded the configured step cap.
class CycleOverflow : public Error {
public:
    using Error::Error;
};

/// The truncated-series solver could not meet the tolerance within its term cap.
class SeriesBudgetExceeded : public Error {
public:
    using Error::Error;
};

/// Structured-text configuration failed schema validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace poismc
