// Acceptance run: one PASS/FAIL line per criterion, detail lines indented.
// Exit status is the number of failed criteria (0 when all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "quantsens/casestudy.hpp"
#include "quantsens/copula.hpp"
#include "quantsens/estimators.hpp"
#include "quantsens/oracle.hpp"
#include "quantsens/special.hpp"
#include "quantsens/stress.hpp"

using namespace qs;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

void detail(const std::string& s) { std::cout << "    " << s << "\n" << std::flush; }

struct Outcome {
    bool pass;
    std::string summary;
};

// ---- models ------------------------------------------------------------------------------

Matrix matrix4(const double (&v)[4][4]) {
    Matrix m(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) m(i, j) = v[i][j];
    return m;
}

// Two obligors (X1 normal, X2 uniform), two lognormal LoBs, t4 dependence.
LossModelSpec two_obligor(bool dependent, bool median_thresholds) {
    LossModelSpec s;
    s.x_marginals = {Normal{0, 1}, Uniform01{}};
    s.z_marginals = {lognormal_from_mean_cov(100, 0.2), lognormal_from_mean_cov(100, 0.2)};
    s.thresholds = median_thresholds ? std::vector<double>{0.0, 0.5} : std::vector<double>{normal_quantile(0.3), 0.3};
    s.g = {IdentityG{0}, LayerSumG{{{1, 80, 60}, {0, 100, 40}}}};
    if (dependent) {
        const double sig[4][4] = {{1, 0.4, 0.3, 0.2}, {0.4, 1, 0.25, 0.3}, {0.3, 0.25, 1, 0.5}, {0.2, 0.3, 0.5, 1}};
        s.dependence = make_mvt(matrix4(sig), 4);
    }
    return s;
}

struct Job {
    Factor target;
    StressSpec stress;
};

std::string job_name(const Job& j) { return factor_name(j.target) + " " + type_name(j.stress); }

std::string rm_name(const RiskMeasureSpec& rm) {
    return std::holds_alternative<Mean>(rm) ? "mean" : fmt("%s@%g", type_name(rm).c_str(), level(rm));
}

const Factor X1{FactorKind::X, 0}, X2{FactorKind::X, 1}, Z1{FactorKind::Z, 0}, Z2{FactorKind::Z, 1};

// ---- criteria ----------------------------------------------------------------------------

Outcome compound_baseline() {
    auto t0 = Clock::now();
    CompoundPoint p = run_compound_point(CompoundConfig{}, 1000000, {101, 0}, BootstrapSpec{0, 0.9, {}});
    double secs = seconds_since(t0);
    bool ok = std::fabs(p.scaled_freq - 0.414) <= 0.02 && std::fabs(p.scaled_sev - 0.429) <= 0.02 && secs < 120;
    return {ok, fmt("compound baseline n=1e6: scaled freq %.4f (0.414 +- 0.02), scaled sev %.4f (0.429 +- 0.02), "
                    "%.1f s (< 120 s)",
                    p.scaled_freq, p.scaled_sev, secs)};
}

Outcome reinsurance_headline() {
    auto t0 = Clock::now();
    ReinsuranceStudyParams p;
    p.n = 1000000;
    p.sensitivities = false;
    p.seed = {102, 0};
    ReinsuranceStudyResult r = run_reinsurance_study(ReinsuranceConfig{}, p);
    double secs = seconds_since(t0);
    bool ok = std::fabs(r.p_loss_positive - 0.05044) <= 0.003 && secs < 300;
    return {ok, fmt("reinsurance P(L>0) n=1e6: %.4f%% (5.044%% +- 0.3pp), %.1f s (< 300 s)", 100 * r.p_loss_positive,
                    secs)};
}

// Estimates vs finite differences for every job and risk measure on one model.
int fd_gate(const std::string& label, const LossModelSpec& spec, const std::vector<Job>& jobs, StressMode mode,
            const std::vector<RiskMeasureSpec>& rms, std::uint64_t seed, int& total) {
    const BandSpec band{0.005};
    ScenarioSet base = simulate(spec, 1000000, {seed, 1});
    std::vector<std::size_t> js;
    for (const auto& j : jobs)
        for (std::size_t k : required_conditioning(spec, j.target, mode))
            if (std::find(js.begin(), js.end(), k) == js.end()) js.push_back(k);
    ConditionalSets cond = make_conditional_sets(spec, js, band, 200000, {seed, 2});
    std::vector<SensitivityRequest> reqs;
    for (const auto& j : jobs)
        for (const auto& rm : rms) reqs.push_back({j.target, j.stress, rm, mode});
    auto ests = sensitivities(base, cond, spec, reqs, band, BootstrapSpec{30, 0.9, {seed, 3}});
    base = ScenarioSet{};
    cond.clear();

    ScenarioSet big = simulate(spec, 4000000, {seed, 4});
    int failed = 0;
    for (std::size_t r = 0; r < reqs.size(); ++r) {
        const auto& q = reqs[r];
        FDReport fd = fd_sensitivity(big, spec, q.target, q.stress, q.rm, mode, {0.02, 0.01, 0.005});
        Agreement a = compare(fd, ests[r]);
        ++total;
        failed += !a.pass;
        std::string flags;
        for (const auto& f : fd.flags) flags += " [" + f + "]";
        detail(fmt("%s %s %s %s: estimate %.5g (se %.2g) fd %.5g (se %.2g) diff %.3g tol %.3g%s", a.pass ? "ok  " : "FAIL",
                   label.c_str(), job_name({q.target, q.stress}).c_str(), rm_name(q.rm).c_str(), a.estimate,
                   a.estimate_stderr, a.fd, a.fd_stderr, a.difference, a.tolerance, flags.c_str()));
    }
    return failed;
}

Outcome oracle_gate() {
    auto t0 = Clock::now();
    int total = 0, failed = 0;
    const std::vector<RiskMeasureSpec> rms{VaR{0.95}, ES{0.95}, Mean{}};

    LossModelSpec spec = two_obligor(true, false);
    std::vector<Job> marginal{
        {Z1, Additive{1.0}},
        {Z2, Proportional{1.0}},
        {X1, Probability{1.0, Normal{0, 1}}},
        {Z2, TailUpper{quantile(spec.z_marginals[1], 0.8)}},
        {X1, TailLower{0.0}},
        {Z2, Mixture{spec.z_marginals[1], lognormal_from_mean_cov(110, 0.2)}},
        {X2, Wang{1}},
    };
    failed += fd_gate("marginal", spec, marginal, StressMode::Marginal, rms, 103, total);

    LossModelSpec med = two_obligor(true, true);
    std::vector<Job> cascade{
        {Z1, Additive{1.0}},
        {Z2, TailUpper{quantile(med.z_marginals[1], 0.8)}},
        {X1, Additive{1.0}},
        {X2, Wang{1}},
    };
    failed += fd_gate("cascade", med, cascade, StressMode::Cascade, rms, 104, total);

    DiscreteModelSpec dm = make_compound_model(make_finite({0, 1, 2, 3}, {0.4, 0.3, 0.2, 0.1}),
                                               make_finite({1, 2, 5}, {0.5, 0.3, 0.2}));
    DiscreteScenarioSet ds = simulate_discrete(dm, 1000000, {105, 1});
    for (StressSpec stress : {StressSpec{Wang{1}}, StressSpec{Wang{-1}}}) {
        for (RiskMeasureSpec rm : {RiskMeasureSpec{ES{0.85}}, RiskMeasureSpec{ES{0.9}}, RiskMeasureSpec{ES{0.95}}}) {
            DiscreteOracleReport ex = brute_force_discrete(dm, stress, rm, {0.004, 0.002});
            SensitivityEstimate est = discrete_sens(ds, dm, stress, rm, BandSpec{}, BootstrapSpec{30, 0.9, {105, 2}});
            bool ok = std::fabs(est.value - ex.derivative) <= 3 * est.std_error;
            ++total;
            failed += !ok;
            detail(fmt("%s discrete W %s %s: estimate %.5g (se %.2g) exact %.5g%s, 3-se gate", ok ? "ok  " : "FAIL",
                       type_name(stress).c_str(), rm_name(rm).c_str(), est.value, est.std_error, ex.derivative,
                       ex.analytic ? "" : " (richardson)"));
        }
    }
    return {failed == 0, fmt("oracle gate: %d/%d comparisons agree (fd n=4e6, max(5%%, 2 combined se); "
                             "discrete 3 se), %.0f s",
                             total - failed, total, seconds_since(t0))};
}

Outcome psi1_gate() {
    struct Combo {
        const char* name;
        BivariateCopulaSpec cop;
        DistributionSpec fi, fj;
    };
    const std::vector<Combo> combos{
        {"gaussian(0.6)", GaussianCopula{0.6}, Normal{0, 1}, Normal{0, 1}},
        {"gaussian(-0.4)", GaussianCopula{-0.4}, lognormal_from_mean_cov(100, 0.15), Normal{1, 2}},
        {"t4(0.5)", TCopula{0.5, 4}, StudentT{4, false}, StudentT{4, false}},
        {"t4(0.3)", TCopula{0.3, 4}, Gamma{5, 1}, lognormal_from_mean_cov(100, 0.1)},
        {"clayton(2)", Archimedean{Clayton{2.0}}, Uniform01{}, Uniform01{}},
        {"clayton(2)", Archimedean{Clayton{2.0}}, Normal{0, 1}, Gamma{3, 2}},
        {"gumbel(1.5)", Archimedean{Gumbel{1.5}}, Uniform01{}, Uniform01{}},
        {"gumbel(1.5)", Archimedean{Gumbel{1.5}}, StudentT{4, false}, Normal{0, 1}},
    };
    double worst_all = 0;
    for (const auto& c : combos) {
        double worst = 0;
        for (int a = 0; a < 21; ++a) {
            double xi = quantile(c.fi, 0.05 + 0.9 * a / 20);
            double h = 1e-5 * std::max(1.0, std::sqrt(variance(c.fi)));
            for (int b = 0; b < 21; ++b) {
                double v = 0.05 + 0.9 * b / 20;
                double xj = conditional_quantile(c.cop, v, xi, c.fi, c.fj);
                double fd = (conditional_quantile(c.cop, v, xi + h, c.fi, c.fj) -
                             conditional_quantile(c.cop, v, xi - h, c.fi, c.fj)) / (2 * h);
                worst = std::max(worst, std::fabs(psi1(c.cop, xi, xj, c.fi, c.fj) - fd));
            }
        }
        detail(fmt("%s %s: max |psi1 - centred difference| = %.2e", worst < 1e-5 ? "ok  " : "FAIL", c.name, worst));
        worst_all = std::max(worst_all, worst);
    }
    return {worst_all < 1e-5, fmt("psi1 vs centred differences, 21x21 grid: max error %.2e (< 1e-5)", worst_all)};
}

Outcome euler_gate() {
    // Z1 enters the loss only through g1 = Z1
    LossModelSpec spec = two_obligor(true, false);
    spec.g[1] = LayerSumG{{{1, 80, 60}}};
    ScenarioSet base = simulate(spec, 1000000, {106, 1});
    double worst = 0;
    for (double alpha : {0.9, 0.95, 0.975}) {
        SensitivityEstimate est = marginal_sens(base, {}, spec, Z1, Proportional{1.0}, ES{alpha}, BandSpec{},
                                                BootstrapSpec{0, 0.9, {}});
        double q = risk_measure(base.L, VaR{alpha});
        long double s = 0;
        std::size_t c = 0;
        for (std::size_t i = 0; i < base.n; ++i)
            if (base.L[i] >= q) {
                s += base.Z[0][i] * (base.X[0][i] <= spec.thresholds[0]);
                ++c;
            }
        double direct = static_cast<double>(s / c);
        double err = std::fabs(est.value - direct);
        detail(fmt("alpha %.3f: estimate %.15g direct %.15g |diff| %.2e", alpha, est.value, direct, err));
        worst = std::max(worst, err);
    }
    return {worst <= 1e-12, fmt("Euler allocation identity on 1e6 fixed scenarios: max |diff| %.2e (<= 1e-12)", worst)};
}

Outcome axiom_gate() {
    auto qgrid = [](const DistributionSpec& d) {
        std::vector<double> g;
        for (int i = 1; i < 41; ++i) g.push_back(quantile(d, 0.02 + 0.96 * i / 41));
        return g;
    };
    std::vector<double> line, positive, unit;
    for (int i = 0; i <= 40; ++i) line.push_back(-4 + 0.2 * i);
    for (int i = 1; i <= 40; ++i) positive.push_back(5.0 * i);
    for (int i = 1; i < 40; ++i) unit.push_back(i / 40.0);
    const std::vector<std::pair<StressSpec, std::vector<double>>> cases{
        {Additive{2.0}, line},
        {Additive{-0.7}, line},
        {Proportional{0.5}, positive},
        {Proportional{-1.5}, positive},
        {Probability{1.0, Normal{0, 1}}, qgrid(Normal{0, 1})},
        {Probability{-2.0, StudentT{4, false}}, qgrid(StudentT{4, false})},
        {Probability{0.5, Uniform01{}}, unit},
        {Mixture{lognormal_from_mean_cov(100, 0.1), lognormal_from_mean_cov(110, 0.1)},
         qgrid(lognormal_from_mean_cov(100, 0.1))},
        {Mixture{Normal{0, 1}, Normal{-0.5, 1}}, qgrid(Normal{0, 1})},
        {TailUpper{1.0}, line},
        {TailLower{-0.5}, line},
        {Wang{1}, unit},
        {Wang{-1}, unit},
    };
    int failed = 0;
    for (const auto& [s, grid] : cases) {
        AxiomReport r = check_axioms(s, grid, 0.01);
        bool ok = r.ok && r.max_roundtrip_error <= 1e-9 && r.max_K_error <= 1e-6 && r.max_Kinv_error <= 1e-6 &&
                  r.sign_violations == 0;
        failed += !ok;
        detail(fmt("%s %-12s roundtrip %.1e K %.1e Kinv %.1e sign violations %zu", ok ? "ok  " : "FAIL",
                   type_name(s).c_str(), r.max_roundtrip_error, r.max_K_error, r.max_Kinv_error, r.sign_violations));
        for (const auto& f : r.failures) detail("  " + f);
    }
    return {failed == 0, fmt("stress axioms: %zu/%zu variants pass (roundtrip 1e-9, K/Kinv 1e-6, sign constancy)",
                             cases.size() - failed, cases.size())};
}

Outcome coincidence_gate() {
    LossModelSpec spec = two_obligor(false, false);
    const BandSpec band{0.005};
    ScenarioSet base = simulate(spec, 400000, {107, 1});
    ConditionalSets cond = make_conditional_sets(spec, {0, 1}, band, 100000, {107, 2});
    std::vector<SensitivityRequest> reqs;
    for (Factor t : {X1, X2, Z1, Z2})
        for (RiskMeasureSpec rm : {RiskMeasureSpec{VaR{0.95}}, RiskMeasureSpec{ES{0.95}}, RiskMeasureSpec{Mean{}}})
            for (StressMode mode : {StressMode::Marginal, StressMode::Cascade})
                reqs.push_back({t, t.kind == FactorKind::X && t.index == 1 ? StressSpec{Wang{1}} : StressSpec{Additive{1.0}},
                                rm, mode});
    auto est = sensitivities(base, cond, spec, reqs, band, BootstrapSpec{30, 0.9, {107, 3}});
    int failed = 0, total = 0;
    for (std::size_t r = 0; r < reqs.size(); r += 2) {
        const auto &m = est[r], &c = est[r + 1];
        double tol = 2 * std::hypot(m.std_error, c.std_error);
        bool ok = std::fabs(m.value - c.value) <= tol;
        failed += !ok;
        ++total;
        detail(fmt("%s %s %s: marginal %.6g cascade %.6g tol %.2g", ok ? "ok  " : "FAIL",
                   job_name({reqs[r].target, reqs[r].stress}).c_str(), rm_name(reqs[r].rm).c_str(), m.value, c.value,
                   tol));
    }
    return {failed == 0, fmt("cascade = marginal under independence: %d/%d within 2 combined se", total - failed, total)};
}

Outcome reinsurance_ranks() {
    auto t0 = Clock::now();
    ReinsuranceStudyParams p;
    p.alphas = {0.975};
    p.seed = {108, 0};
    ReinsuranceStudyResult r = run_reinsurance_study(ReinsuranceConfig{}, p);
    auto show = [](const std::vector<std::size_t>& v) {
        std::string s;
        for (auto k : v) s += (s.empty() ? "" : " ") + std::to_string(k);
        return s;
    };
    auto zes = ranking(r.z_sens, "ES");
    auto xes = ranking(r.x_sens, "ES"), xvar = ranking(r.x_sens, "VaR");
    detail("S_Z[ES] order: " + show(zes));
    detail("S_X[ES] order: " + show(xes));
    detail("S_X[VaR] order: " + show(xvar));
    bool top6 = !zes.empty() && zes.front() == 6;
    std::set<std::size_t> bottom(zes.end() - std::min<std::size_t>(4, zes.size()), zes.end());
    bool bottom4 = bottom == std::set<std::size_t>{2, 4, 7, 8};
    auto pos = [](const std::vector<std::size_t>& v, std::size_t k) {
        return std::find(v.begin(), v.end(), k) - v.begin();
    };
    bool x78 = pos(xes, 7) < pos(xvar, 7) && pos(xes, 8) < pos(xvar, 8);
    detail(fmt("LoB 6 tops S_Z[ES]: %s; bottom four {2,4,7,8}: %s; reinsurers 7, 8 higher under ES: %s",
               top6 ? "yes" : "no", bottom4 ? "yes" : "no", x78 ? "yes" : "no"));

    int violations = 0, pairs = 0;
    for (std::size_t a = 0; a < r.delta_sweep.size(); ++a)
        for (std::size_t b = a + 1; b < r.delta_sweep.size(); ++b) {
            const auto &ra = r.delta_sweep[a].second, &rb = r.delta_sweep[b].second;
            for (std::size_t k = 0; k < ra.size(); ++k) {
                const auto &ea = ra[k].estimate, &eb = rb[k].estimate;
                double tol = 2 * std::hypot(ea.std_error, eb.std_error);
                ++pairs;
                if (std::fabs(ea.value - eb.value) > tol) {
                    ++violations;
                    detail(fmt("delta %.4f vs %.4f, %s %s: %.4g vs %.4g (tol %.2g)", r.delta_sweep[a].first,
                               r.delta_sweep[b].first, ra[k].target.c_str(), type_name(ra[k].rm).c_str(), ea.value,
                               eb.value, tol));
                }
            }
        }
    bool ok = top6 && bottom4 && x78 && violations == 0;
    return {ok, fmt("reinsurance ranks at 0.975 (top %s, bottom four %s, X7/X8 %s); delta sweep %d/%d pairs within "
                    "2 bootstrap se; %.0f s",
                    top6 ? "ok" : "wrong", bottom4 ? "ok" : "wrong", x78 ? "ok" : "wrong", pairs - violations, pairs,
                    seconds_since(t0))};
}

Outcome compound_monotone() {
    auto t0 = Clock::now();
    auto curve = [](CompoundSweep s, bool sev) {
        auto grid = default_grid(s);
        auto pts = run_compound_study(s, grid, CompoundConfig{}, 200000, {109, 0}, BootstrapSpec{0, 0.9, {}});
        std::vector<double> y;
        std::string line;
        for (const auto& p : pts) {
            y.push_back(sev ? p.scaled_sev : p.scaled_freq);
            line += fmt(" %.4g:%.4f", p.grid_value, y.back());
        }
        double rho = spearman(grid, y);
        detail(fmt("%s %s along %s:%s  spearman %.3f", rho > 0.9 ? "ok  " : "FAIL", sev ? "severity" : "frequency",
                   sweep_name(s).c_str(), line.c_str(), rho));
        return rho;
    };
    double a = curve(CompoundSweep::Skewness, true);
    double b = curve(CompoundSweep::Overdispersion, false);
    return {a > 0.9 && b > 0.9,
            fmt("compound monotonicity: spearman severity/skewness %.3f, frequency/overdispersion %.3f (> 0.9), %.0f s",
                a, b, seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    app.add_option("--only", only, "run only these criteria (1-9)")->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, compound_baseline}, {2, reinsurance_headline}, {3, oracle_gate},
        {4, psi1_gate},         {5, euler_gate},           {6, axiom_gate},
        {7, coincidence_gate},  {8, reinsurance_ranks},    {9, compound_monotone},
    };
    int failed = 0;
    for (const auto& [k, run] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), k) == only.end()) continue;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << k << "] " << o.summary << "\n" << std::flush;
    }
    return failed;
}
