#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "quantsens/error.hpp"
#include "quantsens/estimators.hpp"
#include "quantsens/io.hpp"
#include "quantsens/oracle.hpp"
#include "quantsens/special.hpp"

using namespace qs;

namespace {

// No indicators (U <= 1 always), linear g on two Gaussian-coupled lognormals.
LossModelSpec smooth_model() {
    LossModelSpec s;
    s.x_marginals = {Uniform01{}};
    s.z_marginals = {lognormal_from_mean_cov(100, 0.3), lognormal_from_mean_cov(50, 0.5)};
    s.thresholds = {1.0};
    s.g = {LinearG{{1.0, 2.0}, {}, 0.0}};
    s.dependence = PairCopulas{{{1, 2, GaussianCopula{0.5}}}};
    return s;
}

// Same, with a layer so that the stressed risk measure is curved in eps.
LossModelSpec layered_model() {
    LossModelSpec s = smooth_model();
    s.g = {LayerSumG{{{0, 100, 50}, {1, 40, 60}}}};
    return s;
}

DiscreteModelSpec bernoulli_model() {
    return make_compound_model(make_finite({0, 1}, {0.7, 0.3}), make_finite({1}, {1}));
}

double corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("finite differences match the estimator on a smooth model") {
    LossModelSpec spec = smooth_model();
    ScenarioSet base = simulate(spec, 1000000, {1, 0});
    const Factor z1{FactorKind::Z, 0};
    for (RiskMeasureSpec rm : {RiskMeasureSpec{ES{0.95}}, RiskMeasureSpec{VaR{0.95}}, RiskMeasureSpec{Mean{}}}) {
        CAPTURE(type_name(rm));
        FDReport fd = fd_sensitivity(base, spec, z1, Proportional{1.0}, rm, StressMode::Marginal, {2e-3, 1e-3});
        SensitivityEstimate est =
            marginal_sens(base, {}, spec, z1, Proportional{1.0}, rm, BandSpec{}, BootstrapSpec{0, 0.9, {}});
        CHECK(std::fabs(fd.estimates.back() - est.value) <= 0.01 * std::fabs(est.value));
        CHECK(fd.flags.empty());
    }
}

TEST_CASE("difference quotients converge at first order") {
    LossModelSpec spec = layered_model();
    FDReport fd = fd_sensitivity(spec, {FactorKind::Z, 0}, Proportional{1.0}, Mean{}, StressMode::Marginal,
                                 {0.08, 0.04, 0.02, 0.01}, 400000, {2, 0});
    for (std::size_t k = 0; k + 2 < fd.estimates.size(); ++k) {
        double g1 = fd.estimates[k] - fd.estimates[k + 1];
        double g2 = fd.estimates[k + 1] - fd.estimates[k + 2];
        CAPTURE(k);
        CHECK(g1 / g2 == doctest::Approx(2.0).epsilon(0.2));
    }
    CHECK(fd.flags.empty());
    // extrapolation removes most of the bias
    CHECK(std::fabs(fd.richardson - fd.estimates.back()) < std::fabs(fd.estimates[0] - fd.estimates.back()));
}

TEST_CASE("common random numbers") {
    LossModelSpec spec = smooth_model();
    ScenarioSet base = simulate(spec, 100000, {3, 0});
    const Factor z2{FactorKind::Z, 1};
    double c1 = corr(base.L, simulate_stressed(base, spec, z2, Additive{10.0}, 0.5, StressMode::Marginal));
    double c2 = corr(base.L, simulate_stressed(base, spec, z2, Proportional{1.0}, 0.1, StressMode::Marginal));
    double c3 = corr(base.L, simulate_stressed(base, spec, z2, Proportional{1.0}, 0.01, StressMode::Marginal));
    CHECK(c1 > 0.999);
    CHECK(c2 < c3);
    CHECK(c3 > 0.9999);

    // smooth model: the quotient's noise does not grow as eps shrinks
    FDReport s = fd_sensitivity(base, spec, z2, Proportional{1.0}, ES{0.9}, StressMode::Marginal, {0.04, 0.01});
    CHECK(s.stderrs[1] / s.stderrs[0] == doctest::Approx(1.0).epsilon(0.25));

    // indicator model: variance ~ 1/(eps n), so quartering eps doubles the stderr
    LossModelSpec ind = fixtures::two_obligor(false);
    ScenarioSet b2 = simulate(ind, 400000, {4, 0});
    FDReport f = fd_sensitivity(b2, ind, {FactorKind::X, 0}, Additive{1.0}, Mean{}, StressMode::Marginal,
                                {0.08, 0.02});
    CHECK(f.stderrs[1] / f.stderrs[0] == doctest::Approx(2.0).epsilon(0.3));
}

TEST_CASE("indicator model: tail stress on an obligor agrees with the estimator") {
    LossModelSpec spec = fixtures::two_obligor();
    const Factor x1{FactorKind::X, 0};
    const StressSpec stress = TailLower{0.0};
    ScenarioSet base = simulate(spec, 200000, {5, 0});
    BandSpec band{0.01};
    ConditionalSets cond = make_conditional_sets(spec, {0}, band, 50000, {6, 0});
    FDReport fd = fd_sensitivity(spec, x1, stress, ES{0.95}, StressMode::Marginal, {0.1, 0.05}, 1000000, {7, 0});
    SensitivityEstimate est = marginal_sens(base, cond, spec, x1, stress, ES{0.95}, band, BootstrapSpec{30, 0.9, {8, 0}});
    Agreement a = compare(fd, est);
    CAPTURE(a.estimate);
    CAPTURE(a.fd);
    CAPTURE(a.tolerance);
    CHECK(a.pass);
    CHECK(est.value > 0);  // lowering X1 below 0 triggers more defaults
}

TEST_CASE("argument errors") {
    LossModelSpec spec = smooth_model();
    const Factor z1{FactorKind::Z, 0};
    auto fd = [&](std::vector<double> grid) {
        return fd_sensitivity(spec, z1, Proportional{1.0}, Mean{}, StressMode::Marginal, grid, 1000, {});
    };
    CHECK_THROWS_AS(fd({0.01}), InvalidArgument);
    CHECK_THROWS_AS(fd({0.01, 0.02}), InvalidArgument);
    CHECK_THROWS_AS(fd({0.01, 0.0}), InvalidArgument);
    // past the range where a shrinking proportional stress stays increasing
    CHECK_THROWS_AS(fd_sensitivity(spec, z1, Proportional{-1.0}, Mean{}, StressMode::Marginal, {2.0, 0.5}, 1000, {}),
                    InvalidArgument);
    CHECK_THROWS_AS(fd_sensitivity(spec, {FactorKind::Z, 5}, Proportional{1.0}, Mean{}, StressMode::Marginal,
                                   {0.02, 0.01}, 1000, {}),
                    InvalidArgument);
}

TEST_CASE("report JSON round trip") {
    FDReport r;
    r.eps_grid = {0.02, 0.01};
    r.estimates = {1.5, 1.25};
    r.stderrs = {0.1, 0.2};
    r.base_value = 3;
    r.richardson = 1.0;
    r.mc_stderr = 0.3;
    r.n = 10;
    r.flags = {"x"};
    r.agreement = Agreement{1.1, 0.05, 1.0, 0.3, 0.6, 0.1, true};
    FDReport back = fd_report_from_json(to_json(r));
    CHECK(to_json(back) == to_json(r));

    json bad = to_json(r);
    bad["eps_grid"] = {0.01, 0.02};
    CHECK_THROWS_WITH_AS(fd_report_from_json(bad), doctest::Contains("/eps_grid"), ConfigError);
    bad = to_json(r);
    bad["extra"] = 1;
    CHECK_THROWS_AS(fd_report_from_json(bad), ConfigError);
}

TEST_CASE("exact enumeration: Bernoulli frequency under a Wang stress") {
    DiscreteModelSpec dm = bernoulli_model();
    const StressSpec wang = Wang{1};
    const double dens = normal_pdf(normal_quantile(0.7));
    const std::vector<double> grid{0.02, 0.01, 0.005};

    DiscreteOracleReport mean = brute_force_discrete(dm, wang, Mean{}, grid);
    CHECK(mean.base_value == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(mean.derivative == doctest::Approx(dens).epsilon(1e-12));
    CHECK(mean.richardson == doctest::Approx(dens).epsilon(1e-4));
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(mean.values[k] == doctest::Approx(1 - normal_cdf(normal_quantile(0.7) - grid[k])).epsilon(1e-13));

    // q = 0 inside the atom at 0: ES_0.5 = 2 P(T = 1)
    DiscreteOracleReport es = brute_force_discrete(dm, wang, ES{0.5}, grid);
    CHECK(es.analytic);
    CHECK(es.base_value == doctest::Approx(0.6).epsilon(1e-14));
    CHECK(es.derivative == doctest::Approx(2 * dens).epsilon(1e-12));

    // q = 1 is the largest atom: ES_0.9 does not move
    DiscreteOracleReport top = brute_force_discrete(dm, wang, ES{0.9}, grid);
    CHECK(top.base_value == doctest::Approx(1.0));
    CHECK(top.derivative == 0.0);
    CHECK(top.richardson == doctest::Approx(0.0).scale(1));

    // alpha on the jump at 0.7: flagged, derivative from the difference quotients
    DiscreteOracleReport edge = brute_force_discrete(dm, wang, VaR{0.7}, grid);
    CHECK_FALSE(edge.analytic);
    CHECK_FALSE(edge.flags.empty());
}

TEST_CASE("exact law at eps = 0 is the unstressed law") {
    DiscreteModelSpec dm = make_compound_model(make_finite({0, 1, 2, 3}, {0.4, 0.3, 0.2, 0.1}),
                                               make_finite({1, 2, 5}, {0.5, 0.3, 0.2}));
    const StressSpec wang = Wang{1};
    DiscreteLaw a = exact_law(dm), b = exact_law(dm, &wang, 0.0);
    CHECK(a.values == b.values);
    CHECK(a.probs == b.probs);
    double total = 0;
    for (double p : a.probs) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(risk_measure(a, Mean{}) == doctest::Approx(1.0 * (0.5 + 0.6 + 1.0)).epsilon(1e-14));
    CHECK(risk_measure(a, ES{0.9}) == doctest::Approx(risk_measure(b, ES{0.9})));
}

TEST_CASE("discrete estimator matches exact enumeration") {
    DiscreteModelSpec dm = make_compound_model(make_finite({0, 1, 2, 3}, {0.4, 0.3, 0.2, 0.1}),
                                               make_finite({1, 2, 5}, {0.5, 0.3, 0.2}));
    DiscreteScenarioSet ds = simulate_discrete(dm, 1000000, {9, 0});
    for (StressSpec stress : {StressSpec{Wang{1}}, StressSpec{Wang{-1}}}) {
        for (double alpha : {0.85, 0.9}) {
            CAPTURE(alpha);
            DiscreteOracleReport ex = brute_force_discrete(dm, stress, ES{alpha}, {0.004, 0.002});
            REQUIRE(ex.analytic);
            CHECK(ex.richardson == doctest::Approx(ex.derivative).epsilon(1e-3));
            SensitivityEstimate est = discrete_sens(ds, dm, stress, ES{alpha}, BandSpec{}, BootstrapSpec{30, 0.9, {10, 0}});
            CAPTURE(est.value);
            CAPTURE(ex.derivative);
            CHECK(std::fabs(est.value - ex.derivative) <= 3 * est.std_error);
        }
    }
}

TEST_CASE("enumeration limits and severities") {
    std::vector<double> v, p;
    for (int i = 0; i < 50; ++i) v.push_back(1 + std::sqrt(2.0) * i * i), p.push_back(1.0 / 50);
    DiscreteModelSpec big = make_compound_model(make_finite({0, 5}, {0.5, 0.5}), make_finite(v, p));
    CHECK_THROWS_AS(exact_law(big, nullptr, 0.0, 10000), InvalidArgument);
    DiscreteModelSpec gamma = make_compound_model(make_finite({0, 1}, {0.5, 0.5}), Gamma{5, 1});
    CHECK_THROWS_AS(brute_force_discrete(gamma, Wang{1}, ES{0.9}, {0.02, 0.01}), InvalidArgument);
}
