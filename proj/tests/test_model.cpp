#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "quantsens/error.hpp"
#include "quantsens/io.hpp"
#include "quantsens/model.hpp"
#include "quantsens/special.hpp"

using namespace qs;

namespace {

LossModelSpec bernoulli_model(std::size_t m, double p) {
    LossModelSpec s;
    for (std::size_t j = 0; j < m; ++j) {
        s.x_marginals.push_back(Normal{0, 1});
        s.thresholds.push_back(normal_quantile(p));
        s.g.push_back(LinearG{{}, {}, 1.0});
    }
    return s;
}

// Two obligors, two lines of business, t4 dependence.
LossModelSpec small_model() {
    LossModelSpec s;
    s.x_marginals = {Normal{0, 1}, StudentT{4, false}};
    s.z_marginals = {lognormal_from_mean_cov(100, 0.2), lognormal_from_mean_cov(50, 0.3)};
    s.thresholds = {normal_quantile(0.3), student_t_quantile(0.2, 4)};
    s.g = {IdentityG{0}, LayerSumG{{{1, 40, 30}, {0, 90, 50}}}};
    Matrix R(4, 4, 0.0);
    double r[4][4] = {{1, 0.4, 0.3, 0.2}, {0.4, 1, 0.25, 0.1}, {0.3, 0.25, 1, 0.5}, {0.2, 0.1, 0.5, 1}};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) R(i, j) = r[i][j];
    s.dependence = make_mvt(R, 4);
    return s;
}

LossModelSpec independent_copy(LossModelSpec s) {
    s.dependence = Independence{};
    return s;
}

}  // namespace

TEST_CASE("factor names are 1-based") {
    CHECK(factor_name({FactorKind::Z, 2}) == "Z3");
    Factor f = parse_factor("X12");
    CHECK(f.kind == FactorKind::X);
    CHECK(f.index == 11);
    CHECK_THROWS_AS(parse_factor("X0"), InvalidArgument);
    CHECK_THROWS_AS(parse_factor("Y1"), InvalidArgument);
}

TEST_CASE("partial_g") {
    GFunctionSpec layer = LayerSumG{{{0, 2, 3}}};
    double z = 4, x = 0;
    CHECK(partial_g(layer, &z, &x, {FactorKind::Z, 0}) == 1.0);
    z = 6;
    CHECK(partial_g(layer, &z, &x, {FactorKind::Z, 0}) == 0.0);
    z = 5;  // kink
    CHECK(partial_g(layer, &z, &x, {FactorKind::Z, 0}) == 0.0);
    CHECK(evaluate_g(layer, &z, &x) == 3.0);

    GFunctionSpec id = IdentityG{1};
    double zz[2] = {3, 7};
    CHECK(partial_g(id, zz, &x, {FactorKind::Z, 1}) == 1.0);
    CHECK(partial_g(id, zz, &x, {FactorKind::Z, 0}) == 0.0);

    SUBCASE("matches centred differences away from kinks") {
        std::vector<GFunctionSpec> gs = {
            LinearG{{0.5, -2.0, 1.25}, {0.3, 0.0}, 4.0},
            LayerSumG{{{0, 1, 2}, {1, 0.5, 1}, {0, 2.5, 4}, {2, 0, 10}}},
            IdentityG{2},
        };
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> uz(-1, 8);
        for (const auto& g : gs) {
            for (int trial = 0; trial < 300; ++trial) {
                double zv[3] = {uz(rng), uz(rng), uz(rng)};
                double xv[2] = {uz(rng), uz(rng)};
                for (std::size_t k = 0; k < 3; ++k) {
                    const double h = 1e-6;
                    double zp[3] = {zv[0], zv[1], zv[2]}, zm[3] = {zv[0], zv[1], zv[2]};
                    zp[k] += h;
                    zm[k] -= h;
                    double fd = (evaluate_g(g, zp, xv) - evaluate_g(g, zm, xv)) / (2 * h);
                    // skip points within h of a kink, where the difference is not a derivative
                    double pp = partial_g(g, zp, xv, {FactorKind::Z, k});
                    double pm = partial_g(g, zm, xv, {FactorKind::Z, k});
                    if (pp != pm) continue;
                    CHECK(std::fabs(partial_g(g, zv, xv, {FactorKind::Z, k}) - fd) < 1e-8);
                }
            }
        }
    }
}

TEST_CASE("simulate: Bernoulli indicator examples") {
    const std::size_t n = 200000;
    auto s1 = simulate(bernoulli_model(1, 0.3), n, {11, 0});
    double mean = 0;
    for (double l : s1.L) mean += l;
    mean /= n;
    CHECK(std::fabs(mean - 0.3) < 4 * std::sqrt(0.21 / n));

    auto s2 = simulate(bernoulli_model(2, 0.3), n, {12, 0});
    double p2 = 0;
    for (double l : s2.L) p2 += l == 2.0;
    p2 /= n;
    CHECK(std::fabs(p2 - 0.09) < 4 * std::sqrt(0.09 * 0.91 / n));
}

TEST_CASE("simulate: L is regenerable and the run is deterministic") {
    auto spec = small_model();
    auto a = simulate(spec, 30000, {5, 1});
    auto b = simulate(spec, 30000, {5, 1});
    CHECK(a.L == b.L);
    std::vector<double> x, z;
    for (std::size_t i = 0; i < a.n; i += 97) {
        a.row(i, x, z);
        CHECK(evaluate_loss(spec, x.data(), z.data()) == a.L[i]);
        CHECK(cdf(spec.x_marginals[0], x[0]) == doctest::Approx(a.aux.U[0][i]).epsilon(1e-9));
    }
    set_max_threads(1);
    auto c = simulate(spec, 30000, {5, 1});
    set_max_threads(0);
    CHECK(a.L == c.L);
    auto other = simulate(spec, 30000, {5, 2});
    CHECK(a.L != other.L);
}

TEST_CASE("simulate: pair copulas carry their dependence") {
    LossModelSpec s = bernoulli_model(1, 0.5);
    s.z_marginals = {Normal{0, 1}, Normal{0, 1}};
    s.g = {IdentityG{0}};
    s.dependence = PairCopulas{{{1, 2, GaussianCopula{0.6}}}};
    auto sc = simulate(s, 100000, {3, 0});
    double sxy = 0, sxx = 0, syy = 0, sx0 = 0;
    for (std::size_t i = 0; i < sc.n; ++i) {
        sxy += sc.Z[0][i] * sc.Z[1][i];
        sxx += sc.Z[0][i] * sc.Z[0][i];
        syy += sc.Z[1][i] * sc.Z[1][i];
        sx0 += sc.X[0][i] * sc.Z[0][i];
    }
    CHECK(sxy / std::sqrt(sxx * syy) == doctest::Approx(0.6).epsilon(0.02));
    CHECK(std::fabs(sx0 / sc.n) < 0.015);
}

TEST_CASE("simulate_stressed: eps = 0 is the base column bitwise") {
    auto spec = small_model();
    auto base = simulate(spec, 20000, {1, 0});
    for (auto mode : {StressMode::Marginal, StressMode::Cascade}) {
        CHECK(simulate_stressed(base, spec, {FactorKind::Z, 0}, Proportional{1}, 0.0, mode) == base.L);
        CHECK(simulate_stressed(base, spec, {FactorKind::X, 1}, Additive{1}, 0.0, mode) == base.L);
    }
}

TEST_CASE("simulate_stressed: cascade equals marginal under independence") {
    auto spec = independent_copy(small_model());
    auto base = simulate(spec, 20000, {2, 0});
    struct Item {
        Factor f;
        StressSpec s;
    };
    std::vector<Item> items = {
        {{FactorKind::Z, 0}, Proportional{1}},
        {{FactorKind::Z, 1}, TailUpper{60}},
        {{FactorKind::X, 0}, Additive{-1}},
        {{FactorKind::X, 1}, Probability{1, StudentT{4, false}}},
        {{FactorKind::X, 0}, Mixture{Normal{0, 1}, Normal{-0.5, 1}}},
    };
    for (const auto& it : items) {
        auto a = simulate_stressed(base, spec, it.f, it.s, 0.005, StressMode::Marginal);
        auto b = simulate_stressed(base, spec, it.f, it.s, 0.005, StressMode::Cascade);
        double worst = 0;
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("simulate_stressed: tail stress on an increasing g only raises losses") {
    auto spec = small_model();
    auto base = simulate(spec, 50000, {4, 0});
    auto st = simulate_stressed(base, spec, {FactorKind::Z, 0}, TailUpper{quantile(spec.z_marginals[0], 0.6)}, 0.05,
                                StressMode::Marginal);
    std::size_t raised = 0;
    for (std::size_t i = 0; i < st.size(); ++i) {
        CHECK(st[i] >= base.L[i]);
        raised += st[i] > base.L[i];
    }
    CHECK(raised > 1000);
}

TEST_CASE("simulate_stressed: converges to the base column as eps -> 0") {
    auto spec = small_model();
    auto base = simulate(spec, 20000, {6, 0});
    for (auto mode : {StressMode::Marginal, StressMode::Cascade}) {
        double prev_sup = INFINITY;
        std::size_t prev_changed = SIZE_MAX;
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            auto z = simulate_stressed(base, spec, {FactorKind::Z, 0}, Additive{5}, eps, mode);
            double sup = 0;
            for (std::size_t i = 0; i < z.size(); ++i) sup = std::max(sup, std::fabs(z[i] - base.L[i]));
            CHECK(sup < prev_sup);
            prev_sup = sup;
            // X-targets move indicators, so the number of changed rows shrinks instead
            auto x = simulate_stressed(base, spec, {FactorKind::X, 0}, Additive{1}, eps, StressMode::Marginal);
            std::size_t changed = 0;
            for (std::size_t i = 0; i < x.size(); ++i) changed += x[i] != base.L[i];
            CHECK(changed <= prev_changed);
            prev_changed = changed;
        }
        CHECK(prev_sup < 1e-3 * 5 * 2);
        CHECK(prev_changed < 20);
    }
}

TEST_CASE("cascade: Gaussian pair with normal marginals moves by r times the shift") {
    LossModelSpec s;
    s.x_marginals = {Normal{0, 1}};
    s.thresholds = {50.0};  // always in default
    s.z_marginals = {Normal{0, 1}, Normal{0, 1}};
    s.g = {IdentityG{1}};
    s.dependence = PairCopulas{{{1, 2, GaussianCopula{0.35}}}};
    auto base = simulate(s, 5000, {8, 0});
    auto st = simulate_stressed(base, s, {FactorKind::Z, 0}, Additive{2}, 0.01, StressMode::Cascade);
    double worst = 0;
    for (std::size_t i = 0; i < st.size(); ++i) {
        if (std::fabs(base.Z[0][i]) > 4 || std::fabs(base.Z[1][i]) > 4) continue;
        worst = std::max(worst, std::fabs(st[i] - base.L[i] - 0.35 * 0.02));
    }
    CHECK(worst < 1e-9);
    auto marg = simulate_stressed(base, s, {FactorKind::Z, 0}, Additive{2}, 0.01, StressMode::Marginal);
    CHECK(marg == base.L);
}

TEST_CASE("simulate_stressed: argument checks") {
    auto spec = small_model();
    auto base = simulate(spec, 1000, {9, 0});
    CHECK_THROWS_AS(simulate_stressed(base, spec, {FactorKind::Z, 5}, Additive{1}, 0.01, StressMode::Marginal),
                    InvalidArgument);
    CHECK_THROWS_AS(simulate_stressed(base, spec, {FactorKind::Z, 0}, Additive{1}, -0.01, StressMode::Marginal),
                    InvalidArgument);
    CHECK_THROWS_AS(simulate_stressed(base, spec, {FactorKind::Z, 0}, Proportional{-2}, 0.6, StressMode::Marginal),
                    InvalidArgument);
    CHECK_THROWS_AS(
        simulate_stressed(base, spec, {FactorKind::X, 0}, Probability{1, Normal{0, 2}}, 0.01, StressMode::Marginal),
        InvalidArgument);
    auto other = spec;
    other.thresholds[0] += 0.1;
    CHECK_THROWS_AS(simulate_stressed(base, other, {FactorKind::Z, 0}, Additive{1}, 0.01, StressMode::Marginal),
                    InvalidArgument);
}

TEST_CASE("model validation") {
    auto s = small_model();
    CHECK_NOTHROW(validate(s));
    auto bad = s;
    bad.thresholds.pop_back();
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
    bad = s;
    bad.g[1] = LayerSumG{{{0, -1, 2}}};
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
    bad = s;
    bad.g[0] = IdentityG{4};
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
    bad = s;
    bad.g[0] = LinearG{{1}, {1}, 0};
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
    bad.general_mode = true;
    CHECK_NOTHROW(validate(bad));
    bad = independent_copy(s);
    bad.dependence = PairCopulas{{{0, 2, GaussianCopula{0.2}}, {2, 3, GaussianCopula{0.1}}}};
    CHECK_THROWS_AS(validate(bad), InvalidArgument);
}

TEST_CASE("model hash and JSON round trip") {
    auto s = small_model();
    json j = to_json(s);
    auto back = loss_model_from_json(JsonReader(j, ""));
    CHECK(model_hash(back) == model_hash(s));
    auto t = s;
    t.thresholds[1] = std::nextafter(t.thresholds[1], 0.0);
    CHECK(model_hash(t) != model_hash(s));
}

TEST_CASE("scenario CSV round trip is bit exact") {
    auto spec = small_model();
    auto base = simulate(spec, 3000, {10, 3});
    auto dir = std::filesystem::temp_directory_path() / "quantsens_test_model";
    std::filesystem::create_directories(dir);
    std::string path = (dir / "scen.csv").string();
    write_scenarios(path, base);
    auto back = read_scenarios(path, spec);
    CHECK(back.n == base.n);
    CHECK(back.X == base.X);
    CHECK(back.Z == base.Z);
    CHECK(back.L == base.L);
    CHECK(back.seed.seed == 10);
    CHECK(back.seed.stream == 3);
    for (std::size_t i = 0; i < base.n; i += 101) CHECK(back.aux.U[2][i] == doctest::Approx(base.aux.U[2][i]));
    auto other = spec;
    other.z_marginals[0] = lognormal_from_mean_cov(101, 0.2);
    CHECK_THROWS_AS(read_scenarios(path, other), InvalidArgument);
    std::filesystem::remove_all(dir);
}

TEST_CASE("discrete model") {
    auto nb = make_negative_binomial(5, 2.5, 0.999);
    auto dm = make_compound_model(nb, Gamma{5, 1});
    CHECK(dm.support.size() == 23);
    CHECK(dm.cdf.back() == 1.0);
    CHECK(severity_slots(dm) == 22);
    auto ds = simulate_discrete(dm, 100000, {1, 0});
    std::vector<double> freq(dm.support.size(), 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
        freq[ds.k[i]] += 1.0 / ds.n;
        if (i % 37 == 0) {
            double s = 0;
            for (std::size_t l = 0; l < dm.support[ds.k[i]]; ++l) s += ds.y_row(i)[l];
            CHECK(ds.T[i] == s);
        }
    }
    for (std::size_t k = 0; k < freq.size(); ++k) {
        double p = dm.cdf[k] - (k ? dm.cdf[k - 1] : 0.0);
        CHECK(std::fabs(freq[k] - p) < 5 * std::sqrt(p * (1 - p) / ds.n) + 1e-12);
    }

    DiscreteModelSpec tab;
    tab.support = {0, 1};
    tab.cdf = {0.4, 1.0};
    tab.severity = make_finite({1.0}, {1.0});
    tab.h = TabulatedH{{0.0, 1.0}};
    CHECK_NOTHROW(validate(tab));
    auto ts = simulate_discrete(tab, 1000, {2, 0});
    for (std::size_t i = 0; i < ts.n; ++i) CHECK(ts.T[i] == (ts.U[i] > 0.4 ? 1.0 : 0.0));
    tab.cdf = {0.4, 0.9};
    CHECK_THROWS_AS(validate(tab), InvalidArgument);
    CHECK(model_hash(dm) != model_hash(tab));
}
