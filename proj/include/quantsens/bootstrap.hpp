#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "quantsens/parallel.hpp"

namespace qs {

struct BootstrapSpec {
    std::size_t replicates = 100;  // 0 = full-sample estimate only
    double fraction = 0.9;         // resample size as a fraction of each dataset
    SeedSpec seed{};
};

struct BootstrapSummary {
    double value = 0.0;  // mean of replicates (full-sample estimate when replicates == 0)
    double std_error = 0.0;
    double ci_low = 0.0, ci_high = 0.0;  // percentile 95%, widened to contain value
    double full_sample = 0.0;
    std::size_t n_bootstrap = 0;  // successful replicates
    std::size_t n_failed = 0;
};

// Row weights of one dataset: multinomial resampling counts, or all ones.
using Weights = std::vector<double>;

// A statistic of several datasets at once, returning several numbers. Each
// replicate resamples every dataset independently; all outputs of a replicate
// share the same resample.
using MultiStatistic = std::function<std::vector<double>(const std::vector<Weights>&)>;

std::vector<BootstrapSummary> bootstrap_multi(const std::vector<std::size_t>& sizes, const MultiStatistic& stat,
                                              const BootstrapSpec& spec);

BootstrapSummary bootstrap(std::size_t n, const std::function<double(const Weights&)>& stat,
                           const BootstrapSpec& spec);

// Multinomial counts of round(fraction * n) draws with replacement.
void resample_counts(std::size_t n, double fraction, UniformStream& rng, Weights& out);

}  // namespace qs
