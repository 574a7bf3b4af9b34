#include <cmath>
#include <random>

#include "doctest.h"
#include "quantsens/error.hpp"
#include "quantsens/special.hpp"
#include "quantsens/stress.hpp"

using namespace qs;

namespace {

struct Case {
    StressSpec stress;
    std::vector<double> grid;
};

std::vector<double> quantile_grid(const DistributionSpec& d, int n = 41) {
    std::vector<double> g;
    for (int i = 1; i < n; ++i) g.push_back(quantile(d, 0.02 + 0.96 * i / n));
    return g;
}

std::vector<Case> all_cases() {
    std::vector<double> line;
    for (int i = 0; i <= 40; ++i) line.push_back(-4 + 0.2 * i);
    std::vector<double> positive;
    for (int i = 1; i <= 40; ++i) positive.push_back(5.0 * i);
    std::vector<double> unit;
    for (int i = 1; i < 40; ++i) unit.push_back(i / 40.0);
    return {
        {Additive{2.0}, line},
        {Additive{-0.7}, line},
        {Proportional{0.5}, positive},
        {Proportional{-1.5}, positive},
        {Probability{1.0, Normal{0, 1}}, quantile_grid(Normal{0, 1})},
        {Probability{-2.0, StudentT{4, false}}, quantile_grid(StudentT{4, false})},
        {Probability{0.5, Uniform01{}}, unit},
        {Mixture{lognormal_from_mean_cov(100, 0.1), lognormal_from_mean_cov(110, 0.1)},
         quantile_grid(lognormal_from_mean_cov(100, 0.1))},
        {Mixture{Normal{0, 1}, Normal{-0.5, 1}}, quantile_grid(Normal{0, 1})},
        {TailUpper{1.0}, line},
        {TailLower{-0.5}, line},
        {Wang{1}, unit},
        {Wang{-1}, unit},
    };
}

}  // namespace

TEST_CASE("worked examples") {
    CHECK(apply(Additive{2}, 0.5, 1.0) == 2.0);
    CHECK(inverse_apply(Additive{2}, 0.5, 2.0) == 1.0);
    CHECK(apply(TailUpper{1}, 0.1, 3.0) == doctest::Approx(3.2));
    CHECK(deriv_K(TailUpper{1}, 3.0) == 2.0);
    CHECK(deriv_K(Wang{1}, 0.5) == doctest::Approx(0.3989423).epsilon(1e-7));
    CHECK(deriv_Kinv(Additive{1.7}, 0.3) == -1.7);
    CHECK(deriv_Kinv(TailLower{1}, 0.0) == 1.0);
    CHECK(direction(Additive{-3}) == -1);
    CHECK(direction(TailUpper{0}) == 1);
    CHECK(direction(TailLower{0}) == -1);
    // The alternative is stochastically larger, so G <= F.
    CHECK(direction(Mixture{Normal{0, 1}, Normal{1, 1}}) == 1);
    CHECK(direction(Mixture{Normal{0, 1}, Normal{-1, 1}}) == -1);
    double u = 0.37, e = 0.2;
    CHECK(inverse_apply(Wang{1}, e, u) == doctest::Approx(normal_cdf(normal_quantile(u) - e)).epsilon(1e-15));
}

TEST_CASE("zero eps is the identity for every variant") {
    for (const auto& c : all_cases())
        for (double x : c.grid) {
            CHECK(apply(c.stress, 0.0, x) == x);
            CHECK(inverse_apply(c.stress, 0.0, x) == x);
        }
}

TEST_CASE("identical mixture laws give a zero derivative") {
    Mixture m{Normal{0, 1}, Normal{0, 1}};
    for (double x : {-2.0, 0.0, 1.3}) {
        CHECK(deriv_K(m, x) == 0.0);
        CHECK(deriv_Kinv(m, x) == 0.0);
    }
}

TEST_CASE("crossing mixture cdfs are rejected") {
    Mixture m{Normal{0, 1}, Normal{0, 2}};
    CHECK_THROWS_AS(validate(StressSpec{m}), InvalidArgument);
    CHECK_THROWS_AS(direction(m), InvalidArgument);
}

TEST_CASE("degenerate parameters are rejected") {
    CHECK_THROWS_AS(validate(StressSpec{Additive{0}}), InvalidArgument);
    CHECK_THROWS_AS(validate(StressSpec{Proportional{0}}), InvalidArgument);
    CHECK_THROWS_AS(validate(StressSpec{Probability{0, Normal{}}}), InvalidArgument);
    CHECK_THROWS_AS(validate(StressSpec{Wang{0}}), InvalidArgument);
}

TEST_CASE("probability stress raises instead of clamping") {
    Probability p{1.0, Normal{0, 1}};
    double x = quantile(Normal{0, 1}, 0.995);
    CHECK_THROWS_AS(apply(p, 0.01, x), InvalidArgument);
    CHECK_NOTHROW(apply(p, 0.004, x));
}

TEST_CASE("probability stress on uniforms is additive in probability space") {
    Probability p{0.8, Uniform01{}};
    for (double x : {0.1, 0.25, 0.5, 0.9})
        for (double e : {0.001, 0.01, 0.05}) CHECK(apply(p, e, x) == x + 0.8 * e);
}

TEST_CASE("stress axiom grid for every variant") {
    for (const auto& c : all_cases()) {
        CAPTURE(type_name(c.stress));
        auto rep = check_axioms(c.stress, c.grid, 0.01);
        for (const auto& f : rep.failures) MESSAGE(f);
        CHECK(rep.ok);
        CHECK(rep.max_roundtrip_error <= 1e-9);
        CHECK(rep.max_K_error <= 1e-6);
        CHECK(rep.max_Kinv_error <= 1e-6);
        CHECK(rep.sign_violations == 0);
    }
}

TEST_CASE("first-order Taylor consistency") {
    for (const auto& c : all_cases()) {
        CAPTURE(type_name(c.stress));
        // Fit C on the coarsest eps, then require the quadratic bound on finer ones.
        double worst_ratio = 0.0;
        for (double x : c.grid) {
            for (double e : {0.01, 0.005, 0.0025, 0.001}) {
                double r = std::fabs(apply(c.stress, e, x) - x - e * deriv_K(c.stress, x)) / (e * e);
                worst_ratio = std::max(worst_ratio, r / std::max(1.0, std::fabs(x)));
            }
        }
        CHECK(std::isfinite(worst_ratio));
        CHECK(worst_ratio < 1e3);
    }
}

TEST_CASE("random round trips") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ue(0.0, 0.01), up(0.03, 0.97);
    for (const auto& c : all_cases()) {
        CAPTURE(type_name(c.stress));
        for (int i = 0; i < 200; ++i) {
            double x = c.grid[rng() % c.grid.size()];
            double e = ue(rng);
            double y = apply(c.stress, e, x);
            CHECK(inverse_apply(c.stress, e, y) == doctest::Approx(x).epsilon(1e-9));
        }
    }
}

TEST_CASE("tail stresses are invertible for large eps") {
    for (double e : {0.5, 3.0, 100.0}) {
        CHECK(inverse_apply(TailUpper{1}, e, apply(TailUpper{1}, e, 4.0)) == doctest::Approx(4.0));
        CHECK(inverse_apply(TailLower{1}, e, apply(TailLower{1}, e, -4.0)) == doctest::Approx(-4.0));
    }
    CHECK_THROWS_AS(apply(Proportional{-2}, 0.5, 1.0), InvalidArgument);
    CHECK_THROWS_AS(apply(Additive{1}, -0.1, 1.0), InvalidArgument);
}
