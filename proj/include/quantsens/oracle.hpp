#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "quantsens/estimators.hpp"
#include "quantsens/model.hpp"
#include "quantsens/stress.hpp"

namespace qs {

struct Agreement {
    double estimate = 0.0;
    double estimate_stderr = 0.0;
    double fd = 0.0;
    double fd_stderr = 0.0;
    double tolerance = 0.0;  // max(rel |fd|, k * combined stderr)
    double difference = 0.0;
    bool pass = false;
};

struct FDReport {
    std::vector<double> eps_grid;   // strictly decreasing
    std::vector<double> estimates;  // (rho(L_eps) - rho(L)) / eps
    std::vector<double> stderrs;    // per eps, from scenario influence values
    double base_value = 0.0;        // rho(L)
    double richardson = 0.0;        // over the two smallest eps
    double mc_stderr = 0.0;         // of the extrapolated value
    std::size_t n = 0;
    std::vector<std::string> flags;  // e.g. non-monotone difference sequence
    std::optional<Agreement> agreement;
};

void validate_eps_grid(const std::vector<double>& eps_grid, const StressSpec& stress);

// Difference quotients on common random numbers: every eps reuses the base scenarios.
FDReport fd_sensitivity(const LossModelSpec& spec, const Factor& target, const StressSpec& stress,
                        const RiskMeasureSpec& rm, StressMode mode, const std::vector<double>& eps_grid,
                        std::size_t n, const SeedSpec& seed);

// Same, on scenarios the caller already simulated.
FDReport fd_sensitivity(const ScenarioSet& base, const LossModelSpec& spec, const Factor& target,
                        const StressSpec& stress, const RiskMeasureSpec& rm, StressMode mode,
                        const std::vector<double>& eps_grid);

Agreement compare(const FDReport& fd, const SensitivityEstimate& est, double rel_tol = 0.05, double k_stderr = 2.0);

// Law of a discrete random variable: sorted distinct atoms.
struct DiscreteLaw {
    std::vector<double> values;
    std::vector<double> probs;
};

double risk_measure(const DiscreteLaw& law, const RiskMeasureSpec& rm);

// Exact law of T = h(W, Y) when W's uniform is stressed by kappa_eps; the
// severity must be Finite. Throws InvalidArgument past max_atoms.
DiscreteLaw exact_law(const DiscreteModelSpec& dm, const StressSpec* stress = nullptr, double eps = 0.0,
                      std::size_t max_atoms = 1000000);

struct DiscreteOracleReport {
    std::vector<double> eps_grid;
    std::vector<double> values;     // exact rho(T_eps)
    std::vector<double> estimates;  // difference quotients
    double base_value = 0.0;
    double richardson = 0.0;
    double derivative = 0.0;        // analytic unless flagged
    bool analytic = true;
    std::size_t atoms = 0;
    std::vector<std::string> flags;
};

DiscreteOracleReport brute_force_discrete(const DiscreteModelSpec& dm, const StressSpec& stress,
                                          const RiskMeasureSpec& rm, const std::vector<double>& eps_grid,
                                          std::size_t max_atoms = 1000000);

nlohmann::json to_json(const FDReport& r);
FDReport fd_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DiscreteOracleReport& r);

}  // namespace qs
