#pragma once

#include <stdexcept>
#include <string>

namespace qs {

// Base class for every error the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: config values, out-of-domain arguments, inconsistent specs.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Root-finding failures, underflowing densities, degenerate quantile spacing.
class NumericalError : public Error {
public:
    using Error::Error;
};

// The cascade direction c(kappa; j) could not be resolved from the sample.
class AssumptionViolation : public Error {
public:
    using Error::Error;
};

}  // namespace qs
