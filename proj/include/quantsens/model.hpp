#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "quantsens/copula.hpp"
#include "quantsens/distributions.hpp"
#include "quantsens/parallel.hpp"
#include "quantsens/stress.hpp"

namespace qs {

// ---- jump functions g_j --------------------------------------------------------

struct LinearG {
    std::vector<double> z_coef;  // length n (or empty = all zero)
    std::vector<double> x_coef;  // length m, general model only (or empty)
    double intercept = 0.0;
    bool operator==(const LinearG&) const = default;
};

struct LayerTerm {
    std::size_t z_index = 0;
    double s = 0.0;  // attachment
    double t = 1.0;  // limit
    bool operator==(const LayerTerm&) const = default;
};

// sum over terms of min((Z_k - s)_+, t)
struct LayerSumG {
    std::vector<LayerTerm> terms;
    bool operator==(const LayerSumG&) const = default;
};

struct IdentityG {
    std::size_t z_index = 0;
    bool operator==(const IdentityG&) const = default;
};

using GFunctionSpec = std::variant<LinearG, LayerSumG, IdentityG>;

enum class FactorKind { X, Z };

struct Factor {
    FactorKind kind = FactorKind::Z;
    std::size_t index = 0;
    bool operator==(const Factor&) const = default;
};

std::string factor_name(const Factor& f);  // "X1", "Z3", 1-based
Factor parse_factor(const std::string& name);

double evaluate_g(const GFunctionSpec& g, const double* z, const double* x);
// Partial derivative; 0 at layer kinks.
double partial_g(const GFunctionSpec& g, const double* z, const double* x, const Factor& wrt);
bool reads_x(const GFunctionSpec& g);

// ---- dependence -------------------------------------------------------------------

struct Independence {
    bool operator==(const Independence&) const = default;
};

// Joint coordinates are numbered X1..Xm then Z1..Zn (0-based: 0..m+n-1).
struct CopulaPair {
    std::size_t a = 0, b = 0;
    BivariateCopulaSpec copula;
};

// Disjoint pairs; coordinates outside every pair are independent.
struct PairCopulas {
    std::vector<CopulaPair> pairs;
};

using DependenceSpec = std::variant<Independence, PairCopulas, MultivariateTSpec>;

// ---- loss model ---------------------------------------------------------------------

struct LossModelSpec {
    std::vector<DistributionSpec> x_marginals;
    std::vector<DistributionSpec> z_marginals;
    std::vector<double> thresholds;
    std::vector<GFunctionSpec> g;
    DependenceSpec dependence = Independence{};
    bool general_mode = false;

    std::size_t m() const { return x_marginals.size(); }
    std::size_t n() const { return z_marginals.size(); }
    std::size_t joint_index(const Factor& f) const { return f.kind == FactorKind::X ? f.index : m() + f.index; }
    const DistributionSpec& marginal(const Factor& f) const {
        return f.kind == FactorKind::X ? x_marginals[f.index] : z_marginals[f.index];
    }
};

void validate(const LossModelSpec& spec);
void check_factor(const LossModelSpec& spec, const Factor& f);

// Copula of the joint coordinates (a, b); Gaussian r = 0 encodes independence.
BivariateCopulaSpec pair_copula(const LossModelSpec& spec, std::size_t a, std::size_t b);

// Content digest (SHA-256 hex) of the canonical JSON form.
std::string model_hash(const LossModelSpec& spec);

// L = sum_j g_j(X, Z) 1{X_j <= d_j}. thresholds may override spec.thresholds.
double evaluate_loss(const LossModelSpec& spec, const double* x, const double* z,
                     const double* thresholds = nullptr);

struct RosenblattAux {
    std::vector<std::vector<double>> U;  // per joint coordinate, U = F(value)
    std::vector<double> W;               // mixing variable (multivariate t only)
};

struct ConditioningInfo {
    std::size_t j = 0;       // conditioned X coordinate
    double p = 0.0;          // F_j(d_j)
    double delta = 0.0;      // probability half-width
    std::size_t n_proposed = 0;
    std::size_t n_accepted = 0;
};

struct ScenarioSet {
    std::size_t n = 0;
    std::vector<std::vector<double>> X;  // m columns
    std::vector<std::vector<double>> Z;  // n columns
    std::vector<double> L;
    RosenblattAux aux;
    SeedSpec seed;
    std::string model_hash;
    std::optional<ConditioningInfo> conditioning;

    std::size_t m() const { return X.size(); }
    std::size_t nz() const { return Z.size(); }
    double value(const Factor& f, std::size_t row) const {
        return f.kind == FactorKind::X ? X[f.index][row] : Z[f.index][row];
    }
    void row(std::size_t i, std::vector<double>& x, std::vector<double>& z) const;
};

ScenarioSet simulate(const LossModelSpec& spec, std::size_t n, const SeedSpec& seed);

enum class StressMode { Marginal, Cascade };

// Loss column under the stressed target, on the base scenarios' random numbers.
std::vector<double> simulate_stressed(const ScenarioSet& base, const LossModelSpec& spec, const Factor& target,
                                      const StressSpec& stress, double eps, StressMode mode);

// Throws InvalidArgument when the scenarios were not generated from spec.
void check_scenarios(const ScenarioSet& scen, const LossModelSpec& spec);
// Stress bound to a marginal must use the target's marginal.
void check_stress_target(const LossModelSpec& spec, const Factor& target, const StressSpec& stress);

// ---- discrete input model -------------------------------------------------------------

struct CompoundSum {
    bool operator==(const CompoundSum&) const = default;
};
// h(w_k, Y) = coefficient[k] * Y_1
struct TabulatedH {
    std::vector<double> coefficient;
    bool operator==(const TabulatedH&) const = default;
};
using AggregationSpec = std::variant<CompoundSum, TabulatedH>;

struct DiscreteModelSpec {
    std::vector<double> support;  // w_1 < ... < w_r
    std::vector<double> cdf;      // p_1 < ... < p_r = 1
    DistributionSpec severity;
    AggregationSpec h = CompoundSum{};
};

void validate(const DiscreteModelSpec& dm);
// Number of severity draws a scenario needs (max support for compound sums).
std::size_t severity_slots(const DiscreteModelSpec& dm);
// h(w_k, Y) for support index k.
double aggregate(const DiscreteModelSpec& dm, std::size_t k, const double* y);
// Frequency law on 0..K given as a discrete distribution (NegativeBinomial or Finite on integers).
DiscreteModelSpec make_compound_model(const DistributionSpec& frequency, const DistributionSpec& severity);
std::string model_hash(const DiscreteModelSpec& dm);

struct DiscreteScenarioSet {
    std::size_t n = 0;
    std::size_t slots = 0;
    std::vector<double> U;             // distributional-transform uniform of W
    std::vector<std::uint32_t> k;      // support index of W
    std::vector<double> Y;             // n x slots, row-major
    std::vector<double> T;             // h(W, Y)
    SeedSpec seed;
    std::string model_hash;
    const double* y_row(std::size_t i) const { return Y.data() + i * slots; }
};

DiscreteScenarioSet simulate_discrete(const DiscreteModelSpec& dm, std::size_t n, const SeedSpec& seed);

}  // namespace qs
