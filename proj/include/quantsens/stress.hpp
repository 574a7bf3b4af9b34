#pragma once

#include <string>
#include <variant>
#include <vector>

#include "quantsens/distributions.hpp"

namespace qs {

struct Additive {
    double beta = 1.0;
};
struct Proportional {
    double beta = 1.0;
};
// Shift in probability space: F^-1(F(x) + beta*eps).
struct Probability {
    double beta = 1.0;
    DistributionSpec marginal;
};
// kappa_eps(x) = F_eps^-1(F(x)), F_eps = (1-eps) F + eps G.
struct Mixture {
    DistributionSpec base;
    DistributionSpec alternative;
};
struct TailUpper {
    double t = 0.0;
};
struct TailLower {
    double t = 0.0;
};
// Acts on uniforms: Phi(Phi^-1(u) + sign*eps).
struct Wang {
    int sign = 1;
};

using StressSpec = std::variant<Additive, Proportional, Probability, Mixture, TailUpper, TailLower, Wang>;

// Parameter checks (beta != 0, sign = +-1, continuous mixture laws with a
// one-sided cdf ordering). Throws InvalidArgument.
void validate(const StressSpec& s);

double apply(const StressSpec& s, double eps, double x);
double inverse_apply(const StressSpec& s, double eps, double y);
double deriv_K(const StressSpec& s, double x);
double deriv_Kinv(const StressSpec& s, double x);
int direction(const StressSpec& s);

// Largest eps for which kappa_eps stays an increasing bijection (may be +inf).
double max_eps(const StressSpec& s);

std::string type_name(const StressSpec& s);

// The marginal a stress is tied to, if any (Probability, Mixture).
const DistributionSpec* bound_marginal(const StressSpec& s);

struct AxiomReport {
    bool ok = true;
    double max_roundtrip_error = 0.0;
    double max_K_error = 0.0;     // relative, with an absolute floor
    double max_Kinv_error = 0.0;
    std::size_t sign_violations = 0;
    std::vector<std::string> failures;
};

// Checks the stress-function axioms on the grid xs for eps in (0, eps0]:
// inverse round trip, eps -> 0 limit, sign constancy, and the eps-derivatives
// against Richardson-extrapolated difference quotients.
AxiomReport check_axioms(const StressSpec& s, const std::vector<double>& xs, double eps0 = 0.01);

}  // namespace qs
