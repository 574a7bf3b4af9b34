#pragma once

#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "quantsens/bootstrap.hpp"
#include "quantsens/model.hpp"
#include "quantsens/stress.hpp"

namespace qs {

struct VaR {
    double alpha = 0.95;
};
struct ES {
    double alpha = 0.95;
};
struct Mean {};
using RiskMeasureSpec = std::variant<VaR, ES, Mean>;

void validate(const RiskMeasureSpec& rm);
std::string type_name(const RiskMeasureSpec& rm);  // "VaR", "ES", "mean"
double level(const RiskMeasureSpec& rm);            // alpha, 0 for the mean

struct BandSpec {
    double delta = 0.005;  // half-width in probability
};

struct SensitivityEstimate {
    double value = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0, ci_high = 0.0;
    std::size_t n_bootstrap = 0;
    std::size_t n_effective = 0;
    std::vector<std::pair<std::string, double>> decomposition;  // cascade: per-factor terms
    std::map<std::string, double> diagnostics;
};

// Left empirical quantile (order statistic ceil(alpha n)), boundary-corrected ES, mean.
double risk_measure(const std::vector<double>& L, const RiskMeasureSpec& rm);
double risk_measure(const ScenarioSet& scen, const RiskMeasureSpec& rm);

// 2 delta / (q_{alpha+delta} - q_{alpha-delta}).
double density_at_quantile(const std::vector<double>& L, double alpha, const BandSpec& band);

// Scenarios with U_j = F_j(X_j) uniform on (p_j - delta, p_j + delta), p_j = F_j(d_j),
// and every other coordinate drawn from its conditional law given U_j.
ScenarioSet conditional_scenarios(const LossModelSpec& spec, std::size_t j, const BandSpec& band, std::size_t n,
                                  const SeedSpec& seed);

// Conditional datasets keyed by X index.
using ConditionalSets = std::map<std::size_t, ScenarioSet>;

// X indices whose conditional datasets an estimate needs.
std::vector<std::size_t> required_conditioning(const LossModelSpec& spec, const Factor& target, StressMode mode);
ConditionalSets make_conditional_sets(const LossModelSpec& spec, const std::vector<std::size_t>& js,
                                      const BandSpec& band, std::size_t n, const SeedSpec& seed);

struct SensitivityRequest {
    Factor target;
    StressSpec stress;
    RiskMeasureSpec rm;
    StressMode mode = StressMode::Marginal;
};

// Several estimates sharing one set of bootstrap resamples.
std::vector<SensitivityEstimate> sensitivities(const ScenarioSet& scen, const ConditionalSets& cond,
                                               const LossModelSpec& spec,
                                               const std::vector<SensitivityRequest>& requests,
                                               const BandSpec& band, const BootstrapSpec& boot);

SensitivityEstimate marginal_sens(const ScenarioSet& scen, const ConditionalSets& cond, const LossModelSpec& spec,
                                  const Factor& target, const StressSpec& stress, const RiskMeasureSpec& rm,
                                  const BandSpec& band, const BootstrapSpec& boot);

SensitivityEstimate cascade_sens(const ScenarioSet& scen, const ConditionalSets& cond, const LossModelSpec& spec,
                                 const Factor& target, const StressSpec& stress, const RiskMeasureSpec& rm,
                                 const BandSpec& band, const BootstrapSpec& boot);

// Stress acts on the uniform U with W = F_W^-1(U).
SensitivityEstimate discrete_sens(const DiscreteScenarioSet& ds, const DiscreteModelSpec& dm,
                                  const StressSpec& stress, const RiskMeasureSpec& rm, const BandSpec& band,
                                  const BootstrapSpec& boot);

// Wang-stress ES sensitivities of a compound sum to the frequency and to the
// severities. The diagnostics carry "es" (ES of T) and "scaled" (value / ES).
SensitivityEstimate compound_freq_sens(const DiscreteScenarioSet& ds, const DiscreteModelSpec& cm, double alpha,
                                       const BootstrapSpec& boot);
SensitivityEstimate compound_sev_sens(const DiscreteScenarioSet& ds, const DiscreteModelSpec& cm, double alpha,
                                      const BootstrapSpec& boot);

struct SensitivityRow {
    std::string target;
    RiskMeasureSpec rm;
    std::string stress_type;
    SensitivityEstimate estimate;
};
// CSV: target, rm, alpha, stress_type, value, stderr, ci_low, ci_high, n_effective, then
// one column per decomposition term (union over rows, blank where absent).
void write_sensitivity_csv(const std::string& path, const std::vector<SensitivityRow>& rows);

}  // namespace qs
