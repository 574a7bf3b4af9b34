#include "quantsens/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "quantsens/error.hpp"
#include "quantsens/io.hpp"

namespace qs {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidArgument(msg);
}

double sd_mean(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (n - 1) / n);
}

// Scenario-level influence values of rho at the empirical law of L.
// f is the density at the quantile (VaR only).
std::vector<double> influence(const std::vector<double>& L, const RiskMeasureSpec& rm, double value, double f) {
    std::vector<double> out(L.size());
    if (const auto* v = std::get_if<VaR>(&rm)) {
        for (std::size_t i = 0; i < L.size(); ++i) out[i] = (v->alpha - (L[i] <= value ? 1.0 : 0.0)) / f;
    } else if (const auto* e = std::get_if<ES>(&rm)) {
        double q = risk_measure(L, VaR{e->alpha});
        for (std::size_t i = 0; i < L.size(); ++i) out[i] = q + std::max(L[i] - q, 0.0) / (1 - e->alpha) - value;
    } else {
        for (std::size_t i = 0; i < L.size(); ++i) out[i] = L[i] - value;
    }
    return out;
}

}  // namespace

void validate_eps_grid(const std::vector<double>& eps_grid, const StressSpec& stress) {
    require(eps_grid.size() >= 2, "eps grid needs at least two points");
    for (std::size_t k = 0; k < eps_grid.size(); ++k) {
        double e = eps_grid[k];
        require(e > 0 && e < max_eps(stress), "eps " + format_double(e) + " outside the stress's validity range");
        if (k > 0) require(e < eps_grid[k - 1], "eps grid must be strictly decreasing");
    }
}

FDReport fd_sensitivity(const LossModelSpec& spec, const Factor& target, const StressSpec& stress,
                        const RiskMeasureSpec& rm, StressMode mode, const std::vector<double>& eps_grid,
                        std::size_t n, const SeedSpec& seed) {
    validate(spec);
    validate(stress);
    validate(rm);
    check_factor(spec, target);
    check_stress_target(spec, target, stress);
    validate_eps_grid(eps_grid, stress);
    require(n >= 100, "fd_sensitivity: need at least 100 scenarios");
    ScenarioSet base = simulate(spec, n, seed);
    return fd_sensitivity(base, spec, target, stress, rm, mode, eps_grid);
}

FDReport fd_sensitivity(const ScenarioSet& base, const LossModelSpec& spec, const Factor& target,
                        const StressSpec& stress, const RiskMeasureSpec& rm, StressMode mode,
                        const std::vector<double>& eps_grid) {
    validate(stress);
    validate(rm);
    validate_eps_grid(eps_grid, stress);
    check_scenarios(base, spec);
    const std::size_t n = base.n;
    const std::size_t K = eps_grid.size();

    FDReport r;
    r.eps_grid = eps_grid;
    r.n = n;
    r.base_value = risk_measure(base.L, rm);
    // one density for all eps: the stressed densities differ by O(eps)
    double f = 1.0;
    if (const auto* v = std::get_if<VaR>(&rm)) f = density_at_quantile(base.L, v->alpha, BandSpec{});
    const std::vector<double> if0 = influence(base.L, rm, r.base_value, f);

    std::vector<std::vector<double>> ifd(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double eps = eps_grid[k];
        std::vector<double> Le = simulate_stressed(base, spec, target, stress, eps, mode);
        double v = risk_measure(Le, rm);
        r.estimates.push_back((v - r.base_value) / eps);
        ifd[k] = influence(Le, rm, v, f);
        for (std::size_t i = 0; i < n; ++i) ifd[k][i] = (ifd[k][i] - if0[i]) / eps;
        r.stderrs.push_back(sd_mean(ifd[k]));
    }

    const double e1 = eps_grid[K - 2], e2 = eps_grid[K - 1];
    const double a = e1 / (e1 - e2), b = -e2 / (e1 - e2);
    r.richardson = a * r.estimates[K - 1] + b * r.estimates[K - 2];
    std::vector<double> tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = a * ifd[K - 1][i] + b * ifd[K - 2][i];
    r.mc_stderr = sd_mean(tmp);

    // first-order bias makes the quotients monotone in eps; opposite significant gaps are suspicious
    int sign = 0;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        double gap = r.estimates[k + 1] - r.estimates[k];
        for (std::size_t i = 0; i < n; ++i) tmp[i] = ifd[k + 1][i] - ifd[k][i];
        if (std::fabs(gap) <= 2 * sd_mean(tmp)) continue;
        int s = gap > 0 ? 1 : -1;
        if (sign != 0 && s != sign) {
            r.flags.push_back("non-monotone difference sequence");
            break;
        }
        sign = s;
    }
    return r;
}

Agreement compare(const FDReport& fd, const SensitivityEstimate& est, double rel_tol, double k_stderr) {
    Agreement a;
    a.estimate = est.value;
    a.estimate_stderr = est.std_error;
    a.fd = fd.richardson;
    a.fd_stderr = fd.mc_stderr;
    a.tolerance = std::max(rel_tol * std::fabs(a.fd), k_stderr * std::hypot(a.fd_stderr, a.estimate_stderr));
    a.difference = a.estimate - a.fd;
    a.pass = std::fabs(a.difference) <= a.tolerance;
    return a;
}

// ---- exact enumeration -----------------------------------------------------------------------------

namespace {

using Atoms = std::map<double, double>;

Atoms finite_atoms(const DistributionSpec& d) {
    const auto* f = std::get_if<Finite>(&d);
    require(f != nullptr, "exact enumeration needs a finitely supported severity");
    Atoms a;
    for (std::size_t i = 0; i < f->values.size(); ++i) a[f->values[i]] += f->probs[i];
    return a;
}

Atoms convolve(const Atoms& x, const Atoms& y, std::size_t max_atoms) {
    Atoms out;
    for (const auto& [vx, px] : x)
        for (const auto& [vy, py] : y) {
            out[vx + vy] += px * py;
            if (out.size() > max_atoms) throw InvalidArgument("exact enumeration: more than " +
                                                               std::to_string(max_atoms) + " atoms");
        }
    return out;
}

// Law of h(w_k, Y) for each support index k.
std::vector<Atoms> conditional_laws(const DiscreteModelSpec& dm, std::size_t max_atoms) {
    validate(dm);
    const Atoms y = finite_atoms(dm.severity);
    const std::size_t r = dm.support.size();
    std::vector<Atoms> laws(r);
    if (const auto* tab = std::get_if<TabulatedH>(&dm.h)) {
        for (std::size_t k = 0; k < r; ++k)
            for (const auto& [v, p] : y) laws[k][tab->coefficient[k] * v] += p;
        return laws;
    }
    Atoms cur{{0.0, 1.0}};
    std::size_t count = 0;
    for (std::size_t k = 0; k < r; ++k) {
        auto w = static_cast<std::size_t>(dm.support[k]);
        while (count < w) {
            cur = convolve(cur, y, max_atoms);
            ++count;
        }
        laws[k] = cur;
    }
    return laws;
}

// Probabilities of W's support points when U is pushed through kappa_eps.
std::vector<double> stressed_masses(const DiscreteModelSpec& dm, const StressSpec* stress, double eps) {
    const std::size_t r = dm.cdf.size();
    std::vector<double> cdf(dm.cdf);
    if (stress && eps != 0.0)
        for (std::size_t k = 0; k + 1 < r; ++k)
            cdf[k] = std::clamp(inverse_apply(*stress, eps, dm.cdf[k]), 0.0, 1.0);
    cdf[r - 1] = 1.0;
    std::vector<double> mass(r);
    for (std::size_t k = 0; k < r; ++k) mass[k] = std::max(cdf[k] - (k ? cdf[k - 1] : 0.0), 0.0);
    return mass;
}

DiscreteLaw mix(const std::vector<Atoms>& laws, const std::vector<double>& mass, std::size_t max_atoms) {
    Atoms all;
    for (std::size_t k = 0; k < laws.size(); ++k) {
        if (mass[k] == 0.0) continue;
        for (const auto& [v, p] : laws[k]) all[v] += mass[k] * p;
        if (all.size() > max_atoms) throw InvalidArgument("exact enumeration: too many atoms");
    }
    DiscreteLaw out;
    for (const auto& [v, p] : all) {
        out.values.push_back(v);
        out.probs.push_back(p);
    }
    return out;
}

constexpr double kCumTol = 1e-12;

// Left alpha-quantile, plus whether alpha sits on a jump of the cdf.
std::pair<double, bool> left_quantile(const DiscreteLaw& law, double alpha) {
    double cum = 0;
    for (std::size_t i = 0; i < law.values.size(); ++i) {
        double prev = cum;
        cum += law.probs[i];
        if (cum >= alpha - kCumTol) {
            bool edge = std::fabs(cum - alpha) < 1e-9 || std::fabs(prev - alpha) < 1e-9;
            return {law.values[i], edge};
        }
    }
    return {law.values.back(), true};
}

}  // namespace

double risk_measure(const DiscreteLaw& law, const RiskMeasureSpec& rm) {
    validate(rm);
    require(!law.values.empty(), "risk measure of an empty law");
    if (const auto* v = std::get_if<VaR>(&rm)) return left_quantile(law, v->alpha).first;
    if (const auto* e = std::get_if<ES>(&rm)) {
        double q = left_quantile(law, e->alpha).first;
        double s = 0;
        for (std::size_t i = 0; i < law.values.size(); ++i) s += law.probs[i] * std::max(law.values[i] - q, 0.0);
        return q + s / (1 - e->alpha);
    }
    double s = 0;
    for (std::size_t i = 0; i < law.values.size(); ++i) s += law.probs[i] * law.values[i];
    return s;
}

DiscreteLaw exact_law(const DiscreteModelSpec& dm, const StressSpec* stress, double eps, std::size_t max_atoms) {
    if (stress) validate(*stress);
    return mix(conditional_laws(dm, max_atoms), stressed_masses(dm, stress, eps), max_atoms);
}

DiscreteOracleReport brute_force_discrete(const DiscreteModelSpec& dm, const StressSpec& stress,
                                          const RiskMeasureSpec& rm, const std::vector<double>& eps_grid,
                                          std::size_t max_atoms) {
    validate(stress);
    validate(rm);
    validate_eps_grid(eps_grid, stress);
    const std::vector<Atoms> laws = conditional_laws(dm, max_atoms);
    const std::size_t r = dm.support.size(), K = eps_grid.size();

    DiscreteOracleReport rep;
    rep.eps_grid = eps_grid;
    const DiscreteLaw base = mix(laws, stressed_masses(dm, nullptr, 0.0), max_atoms);
    rep.atoms = base.values.size();
    rep.base_value = risk_measure(base, rm);
    for (double eps : eps_grid) {
        double v = risk_measure(mix(laws, stressed_masses(dm, &stress, eps), max_atoms), rm);
        rep.values.push_back(v);
        rep.estimates.push_back((v - rep.base_value) / eps);
    }
    const double e1 = eps_grid[K - 2], e2 = eps_grid[K - 1];
    rep.richardson = (e1 * rep.estimates[K - 1] - e2 * rep.estimates[K - 2]) / (e1 - e2);

    // d/deps P(W_eps <= w_k) = K^-1(p_k); the top of the support stays at 1
    std::vector<double> dcdf(r, 0.0), dmass(r);
    for (std::size_t k = 0; k + 1 < r; ++k) dcdf[k] = deriv_Kinv(stress, dm.cdf[k]);
    for (std::size_t k = 0; k < r; ++k) dmass[k] = dcdf[k] - (k ? dcdf[k - 1] : 0.0);

    auto expect = [&](auto fn) {
        double s = 0;
        for (std::size_t k = 0; k < r; ++k) {
            if (dmass[k] == 0.0) continue;
            double e = 0;
            for (const auto& [v, p] : laws[k]) e += p * fn(v);
            s += dmass[k] * e;
        }
        return s;
    };
    if (std::holds_alternative<Mean>(rm)) {
        rep.derivative = expect([](double v) { return v; });
    } else {
        const double alpha = level(rm);
        auto [q, edge] = left_quantile(base, alpha);
        if (edge) {
            // alpha on a jump of the cdf: rho(T_eps) has a kink at 0
            rep.analytic = false;
            rep.derivative = rep.richardson;
            rep.flags.push_back("alpha on an atom boundary; derivative extrapolated");
        } else if (std::holds_alternative<VaR>(rm)) {
            rep.derivative = 0.0;  // the quantile sits inside an atom
        } else {
            rep.derivative = expect([q = q](double v) { return std::max(v - q, 0.0); }) / (1 - alpha);
        }
    }
    return rep;
}

// ---- JSON ---------------------------------------------------------------------------------------------

json to_json(const FDReport& r) {
    json j{{"eps_grid", r.eps_grid},   {"estimates", r.estimates}, {"stderrs", r.stderrs},
           {"base_value", r.base_value}, {"richardson", r.richardson}, {"mc_stderr", r.mc_stderr},
           {"n", r.n},                   {"flags", r.flags}};
    if (r.agreement) {
        const Agreement& a = *r.agreement;
        j["agreement"] = {{"estimate", a.estimate}, {"estimate_stderr", a.estimate_stderr},
                          {"fd", a.fd},             {"fd_stderr", a.fd_stderr},
                          {"tolerance", a.tolerance}, {"difference", a.difference},
                          {"pass", a.pass}};
    }
    return j;
}

FDReport fd_report_from_json(const json& j) {
    JsonReader rd(j, "");
    rd.require_object();
    rd.only({"eps_grid", "estimates", "stderrs", "base_value", "richardson", "mc_stderr", "n", "flags", "agreement"});
    FDReport r;
    r.eps_grid = rd.numbers("eps_grid");
    r.estimates = rd.numbers("estimates");
    r.stderrs = rd.numbers("stderrs");
    if (r.eps_grid.size() < 2) rd.fail("eps_grid", "needs at least two points");
    for (std::size_t k = 1; k < r.eps_grid.size(); ++k)
        if (!(r.eps_grid[k] < r.eps_grid[k - 1])) rd.fail("eps_grid", "must be strictly decreasing");
    if (r.estimates.size() != r.eps_grid.size()) rd.fail("estimates", "length differs from eps_grid");
    if (r.stderrs.size() != r.eps_grid.size()) rd.fail("stderrs", "length differs from eps_grid");
    r.base_value = rd.number("base_value");
    r.richardson = rd.number("richardson");
    r.mc_stderr = rd.number("mc_stderr");
    long n = rd.integer("n");
    if (n < 0) rd.fail("n", "must be non-negative");
    r.n = static_cast<std::size_t>(n);
    JsonReader flags = rd.at("flags");
    flags.require_array();
    for (std::size_t i = 0; i < flags.size(); ++i) r.flags.push_back(flags.at(i).as_string());
    if (rd.has("agreement")) {
        JsonReader a = rd.at("agreement");
        a.require_object();
        a.only({"estimate", "estimate_stderr", "fd", "fd_stderr", "tolerance", "difference", "pass"});
        Agreement ag;
        ag.estimate = a.number("estimate");
        ag.estimate_stderr = a.number("estimate_stderr");
        ag.fd = a.number("fd");
        ag.fd_stderr = a.number("fd_stderr");
        ag.tolerance = a.number("tolerance");
        ag.difference = a.number("difference");
        if (!a.raw().contains("pass") || !a.raw()["pass"].is_boolean()) a.fail("pass", "must be a boolean");
        ag.pass = a.raw()["pass"].get<bool>();
        r.agreement = ag;
    }
    return r;
}

json to_json(const DiscreteOracleReport& r) {
    return json{{"eps_grid", r.eps_grid},     {"values", r.values},         {"estimates", r.estimates},
                {"base_value", r.base_value}, {"richardson", r.richardson}, {"derivative", r.derivative},
                {"analytic", r.analytic},     {"atoms", r.atoms},           {"flags", r.flags}};
}

}  // namespace qs
