#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "quantsens/parallel.hpp"

namespace qs {

struct Normal {
    double mean = 0.0;
    double sd = 1.0;
    bool operator==(const Normal&) const = default;
};

struct Uniform01 {
    bool operator==(const Uniform01&) const = default;
};

struct Lognormal {
    double mu = 0.0;
    double sigma = 1.0;
    bool operator==(const Lognormal&) const = default;
};

// standardised = true rescales t(nu) by sqrt((nu-2)/nu) to unit variance.
struct StudentT {
    int nu = 4;
    bool standardised = false;
    bool operator==(const StudentT&) const = default;
};

struct Gamma {
    double shape = 1.0;
    double scale = 1.0;
    bool operator==(const Gamma&) const = default;
};

// Parametrised by mean and overdispersion (variance / mean), truncated at the
// smallest k with P(N <= k) >= truncation_quantile and renormalised.
// Build with make_negative_binomial so the tables are filled in.
struct NegativeBinomial {
    double mean = 1.0;
    double overdispersion = 2.0;
    double truncation_quantile = 0.999;
    std::shared_ptr<const std::vector<double>> pmf;
    std::shared_ptr<const std::vector<double>> cdf;
    bool operator==(const NegativeBinomial& o) const {
        return mean == o.mean && overdispersion == o.overdispersion &&
               truncation_quantile == o.truncation_quantile;
    }
};

struct InverseGamma {
    double shape = 1.0;
    double rate = 1.0;
    bool operator==(const InverseGamma&) const = default;
};

// Finitely supported law; used for degenerate severities in exact enumeration.
struct Finite {
    std::vector<double> values;  // strictly increasing
    std::vector<double> probs;   // positive, summing to 1
    std::vector<double> cum;     // filled by make_finite
    bool operator==(const Finite&) const = default;
};

using DistributionSpec =
    std::variant<Normal, Uniform01, Lognormal, StudentT, Gamma, NegativeBinomial, InverseGamma, Finite>;

enum class Eval { Cdf, Pdf, Quantile };

DistributionSpec lognormal_from_mean_cov(double mean, double cov);
DistributionSpec make_negative_binomial(double mean, double overdispersion,
                                        double truncation_quantile = 0.999);
DistributionSpec make_finite(std::vector<double> values, std::vector<double> probs);

// Throws InvalidArgument on bad parameters; rebuilds nothing.
void validate(const DistributionSpec& d);

double cdf(const DistributionSpec& d, double x);
// Density for continuous variants, probability mass for discrete ones.
double pdf(const DistributionSpec& d, double x);
double quantile(const DistributionSpec& d, double p);
double eval(const DistributionSpec& d, Eval what, double arg);

bool is_discrete(const DistributionSpec& d);
std::pair<double, double> support(const DistributionSpec& d);
double mean(const DistributionSpec& d);
double variance(const DistributionSpec& d);
std::string type_name(const DistributionSpec& d);

// Inverse-transform sampling; sample(d, n, s)[i] == quantile(d, uniforms(n, s)[i]).
std::vector<double> uniforms(std::size_t n, const SeedSpec& seed);
std::vector<double> sample(const DistributionSpec& d, std::size_t n, const SeedSpec& seed);

}  // namespace qs
