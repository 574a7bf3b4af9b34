#include "quantsens/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "quantsens/error.hpp"
#include "quantsens/special.hpp"

namespace qs {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();

double t_scale(const StudentT& t) {
    return t.standardised ? std::sqrt((t.nu - 2.0) / t.nu) : 1.0;
}

std::size_t table_index(const std::vector<double>& cum, double p) {
    auto it = std::lower_bound(cum.begin(), cum.end(), p);
    if (it == cum.end()) return cum.size() - 1;
    return static_cast<std::size_t>(it - cum.begin());
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidArgument(msg);
}

}  // namespace

DistributionSpec lognormal_from_mean_cov(double mean, double cov) {
    require(mean > 0 && std::isfinite(mean), "lognormal: mean must be positive");
    require(cov > 0 && std::isfinite(cov), "lognormal: coefficient of variation must be positive");
    double s2 = std::log1p(cov * cov);
    return Lognormal{std::log(mean) - 0.5 * s2, std::sqrt(s2)};
}

DistributionSpec make_negative_binomial(double mean, double overdispersion,
                                        double truncation_quantile) {
    require(mean > 0 && std::isfinite(mean), "negative binomial: mean must be positive");
    require(overdispersion > 1 && std::isfinite(overdispersion),
            "negative binomial: overdispersion must exceed 1");
    require(truncation_quantile > 0 && truncation_quantile < 1,
            "negative binomial: truncation quantile must lie in (0,1)");
    double p = 1.0 / overdispersion;
    double r = mean * p / (1.0 - p);
    std::vector<double> pmf;
    double term = std::exp(r * std::log(p));
    double acc = 0.0;
    for (std::size_t k = 0;; ++k) {
        if (k > 0) term *= (k - 1 + r) / static_cast<double>(k) * (1.0 - p);
        pmf.push_back(term);
        acc += term;
        if (acc >= truncation_quantile) break;
        if (k > 10'000'000) throw NumericalError("negative binomial: truncation point not reached");
    }
    std::vector<double> cum(pmf.size());
    double run = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        pmf[k] /= acc;
        run += pmf[k];
        cum[k] = run;
    }
    cum.back() = 1.0;
    NegativeBinomial nb{mean, overdispersion, truncation_quantile, nullptr, nullptr};
    nb.pmf = std::make_shared<const std::vector<double>>(std::move(pmf));
    nb.cdf = std::make_shared<const std::vector<double>>(std::move(cum));
    return nb;
}

DistributionSpec make_finite(std::vector<double> values, std::vector<double> probs) {
    require(!values.empty() && values.size() == probs.size(),
            "finite distribution: values and probabilities must be nonempty and of equal length");
    for (std::size_t i = 0; i < values.size(); ++i) {
        require(std::isfinite(values[i]), "finite distribution: values must be finite");
        require(probs[i] > 0, "finite distribution: probabilities must be positive");
        if (i > 0) require(values[i] > values[i - 1], "finite distribution: values must increase");
    }
    double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    require(std::fabs(total - 1.0) < 1e-12, "finite distribution: probabilities must sum to 1");
    Finite f{std::move(values), std::move(probs), {}};
    f.cum.resize(f.probs.size());
    std::partial_sum(f.probs.begin(), f.probs.end(), f.cum.begin());
    f.cum.back() = 1.0;
    return f;
}

void validate(const DistributionSpec& d) {
    std::visit(overloaded{
                   [](const Normal& x) {
                       require(std::isfinite(x.mean), "normal: mean must be finite");
                       require(x.sd > 0 && std::isfinite(x.sd), "normal: sd must be positive");
                   },
                   [](const Uniform01&) {},
                   [](const Lognormal& x) {
                       require(std::isfinite(x.mu), "lognormal: mu must be finite");
                       require(x.sigma > 0 && std::isfinite(x.sigma),
                               "lognormal: sigma must be positive");
                   },
                   [](const StudentT& x) { require(x.nu >= 3, "student t: nu must be at least 3"); },
                   [](const Gamma& x) {
                       require(x.shape > 0 && std::isfinite(x.shape), "gamma: shape must be positive");
                       require(x.scale > 0 && std::isfinite(x.scale), "gamma: scale must be positive");
                   },
                   [](const NegativeBinomial& x) {
                       require(x.pmf && x.cdf, "negative binomial: tables missing, use make_negative_binomial");
                   },
                   [](const InverseGamma& x) {
                       require(x.shape > 0 && std::isfinite(x.shape),
                               "inverse gamma: shape must be positive");
                       require(x.rate > 0 && std::isfinite(x.rate), "inverse gamma: rate must be positive");
                   },
                   [](const Finite& x) {
                       require(!x.values.empty() && x.cum.size() == x.values.size(),
                               "finite distribution: use make_finite");
                   },
               },
               d);
}

double cdf(const DistributionSpec& d, double x) {
    if (std::isnan(x)) throw InvalidArgument("cdf: NaN argument");
    return std::visit(
        overloaded{
            [x](const Normal& n) { return normal_cdf((x - n.mean) / n.sd); },
            [x](const Uniform01&) { return std::clamp(x, 0.0, 1.0); },
            [x](const Lognormal& l) {
                return x <= 0 ? 0.0 : normal_cdf((std::log(x) - l.mu) / l.sigma);
            },
            [x](const StudentT& t) { return student_t_cdf(x / t_scale(t), t.nu); },
            [x](const Gamma& g) { return gamma_p(g.shape, x / g.scale); },
            [x](const NegativeBinomial& nb) {
                if (x < 0) return 0.0;
                double k = std::floor(x);
                if (k >= static_cast<double>(nb.cdf->size() - 1)) return 1.0;
                return (*nb.cdf)[static_cast<std::size_t>(k)];
            },
            [x](const InverseGamma& ig) { return x <= 0 ? 0.0 : gamma_q(ig.shape, ig.rate / x); },
            [x](const Finite& f) {
                auto it = std::upper_bound(f.values.begin(), f.values.end(), x);
                if (it == f.values.begin()) return 0.0;
                return f.cum[static_cast<std::size_t>(it - f.values.begin()) - 1];
            },
        },
        d);
}

double pdf(const DistributionSpec& d, double x) {
    if (std::isnan(x)) throw InvalidArgument("pdf: NaN argument");
    return std::visit(
        overloaded{
            [x](const Normal& n) { return normal_pdf((x - n.mean) / n.sd) / n.sd; },
            [x](const Uniform01&) { return (x > 0 && x < 1) ? 1.0 : 0.0; },
            [x](const Lognormal& l) {
                if (x <= 0) return 0.0;
                return normal_pdf((std::log(x) - l.mu) / l.sigma) / (x * l.sigma);
            },
            [x](const StudentT& t) {
                double c = t_scale(t);
                return student_t_pdf(x / c, t.nu) / c;
            },
            [x](const Gamma& g) { return gamma_pdf(g.shape, g.scale, x); },
            [x](const NegativeBinomial& nb) {
                if (x < 0 || x != std::floor(x) || x > static_cast<double>(nb.pmf->size() - 1))
                    return 0.0;
                return (*nb.pmf)[static_cast<std::size_t>(x)];
            },
            [x](const InverseGamma& ig) {
                if (x <= 0) return 0.0;
                double y = ig.rate / x;
                return gamma_pdf(ig.shape, 1.0, y) * y / x;
            },
            [x](const Finite& f) {
                auto it = std::lower_bound(f.values.begin(), f.values.end(), x);
                if (it == f.values.end() || *it != x) return 0.0;
                return f.probs[static_cast<std::size_t>(it - f.values.begin())];
            },
        },
        d);
}

double quantile(const DistributionSpec& d, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile: probability outside [0,1]");
    auto sup = support(d);
    if (p == 0.0) {
        if (std::isinf(sup.first))
            throw InvalidArgument("quantile: probability 0 on a support unbounded below");
        if (!is_discrete(d)) return sup.first;
    }
    if (p == 1.0) {
        if (std::isinf(sup.second))
            throw InvalidArgument("quantile: probability 1 on a support unbounded above");
        return sup.second;
    }
    return std::visit(
        overloaded{
            [p](const Normal& n) { return n.mean + n.sd * normal_quantile(p); },
            [p](const Uniform01&) { return p; },
            [p](const Lognormal& l) { return std::exp(l.mu + l.sigma * normal_quantile(p)); },
            [p](const StudentT& t) { return t_scale(t) * student_t_quantile(p, t.nu); },
            [p](const Gamma& g) { return g.scale * gamma_p_inv(g.shape, p); },
            [p](const NegativeBinomial& nb) { return static_cast<double>(table_index(*nb.cdf, p)); },
            [p](const InverseGamma& ig) { return ig.rate / gamma_q_inv(ig.shape, p); },
            [p](const Finite& f) { return f.values[table_index(f.cum, p)]; },
        },
        d);
}

double eval(const DistributionSpec& d, Eval what, double arg) {
    switch (what) {
        case Eval::Cdf: return cdf(d, arg);
        case Eval::Pdf: return pdf(d, arg);
        case Eval::Quantile: return quantile(d, arg);
    }
    throw InvalidArgument("eval: unknown function");
}

bool is_discrete(const DistributionSpec& d) {
    return std::holds_alternative<NegativeBinomial>(d) || std::holds_alternative<Finite>(d);
}

std::pair<double, double> support(const DistributionSpec& d) {
    return std::visit(
        overloaded{
            [](const Normal&) { return std::pair{-kInf, kInf}; },
            [](const Uniform01&) { return std::pair{0.0, 1.0}; },
            [](const Lognormal&) { return std::pair{0.0, kInf}; },
            [](const StudentT&) { return std::pair{-kInf, kInf}; },
            [](const Gamma&) { return std::pair{0.0, kInf}; },
            [](const NegativeBinomial& nb) {
                return std::pair{0.0, static_cast<double>(nb.pmf->size() - 1)};
            },
            [](const InverseGamma&) { return std::pair{0.0, kInf}; },
            [](const Finite& f) { return std::pair{f.values.front(), f.values.back()}; },
        },
        d);
}

double mean(const DistributionSpec& d) {
    return std::visit(
        overloaded{
            [](const Normal& n) { return n.mean; },
            [](const Uniform01&) { return 0.5; },
            [](const Lognormal& l) { return std::exp(l.mu + 0.5 * l.sigma * l.sigma); },
            [](const StudentT&) { return 0.0; },
            [](const Gamma& g) { return g.shape * g.scale; },
            [](const NegativeBinomial& nb) {
                double m = 0.0;
                for (std::size_t k = 0; k < nb.pmf->size(); ++k) m += k * (*nb.pmf)[k];
                return m;
            },
            [](const InverseGamma& ig) {
                if (ig.shape <= 1) throw InvalidArgument("inverse gamma: mean needs shape > 1");
                return ig.rate / (ig.shape - 1);
            },
            [](const Finite& f) {
                return std::inner_product(f.values.begin(), f.values.end(), f.probs.begin(), 0.0);
            },
        },
        d);
}

double variance(const DistributionSpec& d) {
    return std::visit(
        overloaded{
            [](const Normal& n) { return n.sd * n.sd; },
            [](const Uniform01&) { return 1.0 / 12.0; },
            [](const Lognormal& l) {
                double s2 = l.sigma * l.sigma;
                return std::expm1(s2) * std::exp(2 * l.mu + s2);
            },
            [](const StudentT& t) { return t.standardised ? 1.0 : t.nu / (t.nu - 2.0); },
            [](const Gamma& g) { return g.shape * g.scale * g.scale; },
            [&d](const NegativeBinomial& nb) {
                double m = mean(d), s = 0.0;
                for (std::size_t k = 0; k < nb.pmf->size(); ++k) s += (k - m) * (k - m) * (*nb.pmf)[k];
                return s;
            },
            [](const InverseGamma& ig) {
                if (ig.shape <= 2) throw InvalidArgument("inverse gamma: variance needs shape > 2");
                double a = ig.shape;
                return ig.rate * ig.rate / ((a - 1) * (a - 1) * (a - 2));
            },
            [&d](const Finite& f) {
                double m = mean(d), s = 0.0;
                for (std::size_t i = 0; i < f.values.size(); ++i)
                    s += (f.values[i] - m) * (f.values[i] - m) * f.probs[i];
                return s;
            },
        },
        d);
}

std::string type_name(const DistributionSpec& d) {
    static const char* names[] = {"normal", "uniform01", "lognormal", "student_t",
                                  "gamma", "negative_binomial", "inverse_gamma", "finite"};
    return names[d.index()];
}

std::vector<double> uniforms(std::size_t n, const SeedSpec& seed) {
    std::vector<double> out(n);
    parallel_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) {
        UniformStream rng(derive_seed(seed, c));
        for (std::size_t i = b; i < e; ++i) out[i] = rng.next();
    });
    return out;
}

std::vector<double> sample(const DistributionSpec& d, std::size_t n, const SeedSpec& seed) {
    if (n == 0) throw InvalidArgument("sample: n must be at least 1");
    validate(d);
    std::vector<double> u = uniforms(n, seed);
    parallel_chunks(n, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) u[i] = quantile(d, u[i]);
    });
    return u;
}

}  // namespace qs
