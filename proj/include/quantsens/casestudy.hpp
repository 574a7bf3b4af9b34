#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "quantsens/bootstrap.hpp"
#include "quantsens/copula.hpp"
#include "quantsens/estimators.hpp"
#include "quantsens/model.hpp"

namespace qs {

// ---- reinsurance credit risk ------------------------------------------------------------------

// Solvency II standard-formula coefficients of variation, LoB 1..12.
const std::vector<double>& solvency_lob_covs();
// Solvency II correlation matrix of the 12 LoBs.
const Matrix& solvency_correlation();

struct ReinsuranceConfig {
    std::size_t n_lob = 12;
    double lob_mean = 100.0;
    std::vector<double> lob_covs = solvency_lob_covs();
    Matrix R = solvency_correlation();
    std::size_t m_reins = 8;
    std::vector<double> default_probs{0.015, 0.015, 0.015, 0.015, 0.015, 0.015, 0.01, 0.01};
    std::pair<double, double> low_layer{0.55, 0.85};   // reinsurers 1-6, two LoBs each
    std::pair<double, double> high_layer{0.85, 0.95};  // reinsurers 7 (LoBs 1-6) and 8 (LoBs 7-12)
    double lambda = 0.05;
    int nu = 4;
};

void validate(const ReinsuranceConfig& cfg);
LossModelSpec build_reinsurance_model(const ReinsuranceConfig& cfg);

struct ReinsuranceStudyParams {
    std::vector<double> alphas{0.955, 0.96, 0.965, 0.97, 0.975, 0.98, 0.985, 0.99};
    double alpha = 0.975;  // headline level for VaR/ES tables and ranks
    double delta = 0.005;
    std::vector<double> delta_sweep{0.0025, 0.005, 0.01};
    double z_tail = 0.8;  // upper tail stress on LoBs above this quantile
    double x_tail = 0.2;  // lower tail stress on reinsurers below this quantile
    std::size_t n = 1000000;
    std::size_t n_conditional = 200000;
    BootstrapSpec boot{50, 0.9, {}};
    SeedSpec seed{};
    bool sensitivities = true;  // false: headline numbers only
};

struct ReinsuranceStudyResult {
    std::size_t n = 0;
    double p_loss_positive = 0.0;
    double p_loss_positive_stderr = 0.0;
    double var = 0.0, es = 0.0;  // at params.alpha
    std::vector<SensitivityRow> z_sens;      // VaR and ES at params.alpha
    std::vector<SensitivityRow> x_sens;
    std::vector<SensitivityRow> es_alphas;   // ES for every alpha, Z and X targets
    std::vector<std::pair<double, std::vector<SensitivityRow>>> delta_sweep;  // X targets, VaR and ES
    std::vector<std::pair<double, double>> histogram;  // (bin left edge, count) of L | L > 0
};

ReinsuranceStudyResult run_reinsurance_study(const ReinsuranceConfig& cfg, const ReinsuranceStudyParams& params);

// Targets sorted by decreasing value (1-based factor numbers) for the given risk measure type.
std::vector<std::size_t> ranking(const std::vector<SensitivityRow>& rows, const std::string& rm_type);

// Writes reinsurance_<table>.csv files and reinsurance_summary.json into dir.
void write_reinsurance_outputs(const ReinsuranceStudyResult& res, const ReinsuranceStudyParams& params,
                               const std::string& dir);
nlohmann::json summary_json(const ReinsuranceStudyResult& res, const ReinsuranceStudyParams& params);

// ---- compound frequency / severity ---------------------------------------------------------------

struct CompoundConfig {
    double freq_mean = 5.0;
    double overdispersion = 2.5;
    double truncation = 0.999;
    double gamma_shape = 5.0;
    double gamma_scale = 1.0;  // scaled sensitivities do not depend on it
    double alpha = 0.95;
};

DiscreteModelSpec build_compound_model(const CompoundConfig& cfg);

enum class CompoundSweep { FreqMean, Overdispersion, Skewness, Alpha };
std::string sweep_name(CompoundSweep s);
CompoundSweep parse_sweep(const std::string& name);
std::vector<double> default_grid(CompoundSweep s);
// Skewness of a Gamma law is 2 / sqrt(shape).
CompoundConfig with_grid_value(CompoundConfig cfg, CompoundSweep s, double value);

struct CompoundPoint {
    double grid_value = 0.0;
    double es = 0.0;
    double scaled_freq = 0.0, scaled_freq_stderr = 0.0;
    double scaled_sev = 0.0, scaled_sev_stderr = 0.0;
};

CompoundPoint run_compound_point(const CompoundConfig& cfg, std::size_t n, const SeedSpec& seed,
                                 const BootstrapSpec& boot);
std::vector<CompoundPoint> run_compound_study(CompoundSweep sweep, const std::vector<double>& grid,
                                              const CompoundConfig& base, std::size_t n, const SeedSpec& seed,
                                              const BootstrapSpec& boot);

void write_compound_csv(const std::string& path, CompoundSweep sweep, const std::vector<CompoundPoint>& pts);

// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace qs
