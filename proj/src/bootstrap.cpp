#include "quantsens/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "quantsens/error.hpp"

namespace qs {

namespace {

double percentile(const std::vector<double>& sorted, double p) {
    double h = (sorted.size() - 1) * p;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

}  // namespace

void resample_counts(std::size_t n, double fraction, UniformStream& rng, Weights& out) {
    out.assign(n, 0.0);
    std::size_t draws = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * n)));
    for (std::size_t i = 0; i < draws; ++i) out[rng.next_index(n)] += 1.0;
}

std::vector<BootstrapSummary> bootstrap_multi(const std::vector<std::size_t>& sizes, const MultiStatistic& stat,
                                              const BootstrapSpec& spec) {
    if (spec.replicates == 1) throw InvalidArgument("bootstrap needs at least 2 replicates (or 0 for none)");
    if (!(spec.fraction > 0 && spec.fraction <= 1)) throw InvalidArgument("bootstrap fraction must lie in (0,1]");
    for (std::size_t s : sizes)
        if (s == 0) throw InvalidArgument("bootstrap: empty dataset");

    std::vector<Weights> ones;
    for (std::size_t s : sizes) ones.emplace_back(s, 1.0);
    const std::vector<double> full = stat(ones);
    ones.clear();
    const std::size_t k = full.size();
    std::vector<BootstrapSummary> out(k);
    for (std::size_t i = 0; i < k; ++i) {
        out[i].value = out[i].ci_low = out[i].ci_high = out[i].full_sample = full[i];
    }
    const std::size_t B = spec.replicates;
    if (B == 0) return out;

    std::vector<std::vector<double>> reps(B);
    std::vector<char> ok(B, 0);
    parallel_tasks(B, [&](std::size_t b) {
        UniformStream rng(derive_seed(spec.seed, b));
        std::vector<Weights> w(sizes.size());
        for (std::size_t d = 0; d < sizes.size(); ++d) resample_counts(sizes[d], spec.fraction, rng, w[d]);
        try {
            reps[b] = stat(w);
            ok[b] = reps[b].size() == k &&
                    std::all_of(reps[b].begin(), reps[b].end(), [](double v) { return std::isfinite(v); });
        } catch (const Error&) {
            ok[b] = 0;
        }
    });
    std::size_t good = std::count(ok.begin(), ok.end(), 1);
    std::size_t failed = B - good;
    if (failed * 10 > B)
        throw NumericalError("bootstrap: " + std::to_string(failed) + " of " + std::to_string(B) +
                             " replicates failed (more than 10%)");
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<double> v;
        v.reserve(good);
        for (std::size_t b = 0; b < B; ++b)
            if (ok[b]) v.push_back(reps[b][i]);
        // centred on the first replicate so that a constant statistic is exact
        double shift = 0.0;
        for (double x : v) shift += x - v[0];
        double mean = v[0] + shift / v.size();
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        std::sort(v.begin(), v.end());
        auto& s = out[i];
        s.value = mean;
        s.std_error = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
        s.ci_low = std::min(percentile(v, 0.025), mean);
        s.ci_high = std::max(percentile(v, 0.975), mean);
        s.n_bootstrap = good;
        s.n_failed = failed;
    }
    return out;
}

BootstrapSummary bootstrap(std::size_t n, const std::function<double(const Weights&)>& stat,
                           const BootstrapSpec& spec) {
    return bootstrap_multi(
               {n}, [&](const std::vector<Weights>& w) { return std::vector<double>{stat(w[0])}; }, spec)
        .front();
}

}  // namespace qs
