#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "quantsens/casestudy.hpp"
#include "quantsens/error.hpp"
#include "quantsens/io.hpp"

using namespace qs;

TEST_CASE("embedded tables") {
    const std::vector<double> covs{0.1, 0.08, 0.15, 0.08, 0.14, 0.19, 0.083, 0.064, 0.13, 0.17, 0.17, 0.17};
    CHECK(solvency_lob_covs() == covs);
    const Matrix& R = solvency_correlation();
    REQUIRE(R.rows == 12);
    check_correlation(R);
    CHECK(min_eigenvalue(R) > 0);
    // row 9 is 0.5 everywhere except LoBs 10 and 12
    for (std::size_t k = 0; k < 12; ++k) {
        CAPTURE(k);
        double expect = k == 8 ? 1.0 : (k == 9 || k == 11) ? 0.25 : 0.5;
        CHECK(R(8, k) == expect);
    }
    CHECK(R(0, 1) == 0.5);
    CHECK(R(3, 11) == 0.5);
    CHECK(R(9, 10) == 0.25);
}

TEST_CASE("reinsurance model") {
    ReinsuranceConfig cfg;
    LossModelSpec spec = build_reinsurance_model(cfg);
    REQUIRE(spec.m() == 8);
    REQUIRE(spec.n() == 12);
    const auto& mvt = std::get<MultivariateTSpec>(spec.dependence);
    CHECK(mvt.nu == 4);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j)
            if (i != j) CHECK(mvt.sigma(i, j) == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(mvt.sigma(8 + 2, 8 + 7) == 0.5);

    for (std::size_t j = 0; j < 8; ++j) CHECK(cdf(spec.x_marginals[j], spec.thresholds[j]) == doctest::Approx(cfg.default_probs[j]).epsilon(1e-10));
    CHECK(cdf(spec.x_marginals[6], spec.thresholds[6]) == doctest::Approx(0.01).epsilon(1e-10));

    // reinsurer 1: LoBs 1, 2 between the 55% and 85% quantiles
    const auto& g1 = std::get<LayerSumG>(spec.g[0]);
    REQUIRE(g1.terms.size() == 2);
    const DistributionSpec z1 = lognormal_from_mean_cov(100, 0.1);
    CHECK(g1.terms[0].z_index == 0);
    CHECK(g1.terms[0].s == doctest::Approx(quantile(z1, 0.55)).epsilon(1e-14));
    CHECK(g1.terms[0].s + g1.terms[0].t == doctest::Approx(quantile(z1, 0.85)).epsilon(1e-14));
    CHECK(std::get<LayerSumG>(spec.g[5]).terms[1].z_index == 11);
    // reinsurer 8: LoBs 7-12 between the 85% and 95% quantiles
    const auto& g8 = std::get<LayerSumG>(spec.g[7]);
    REQUIRE(g8.terms.size() == 6);
    CHECK(g8.terms[0].z_index == 6);
    const DistributionSpec z12 = lognormal_from_mean_cov(100, 0.17);
    CHECK(g8.terms[5].s == doctest::Approx(quantile(z12, 0.85)).epsilon(1e-14));
    CHECK(g8.terms[5].t == doctest::Approx(quantile(z12, 0.95) - quantile(z12, 0.85)).epsilon(1e-12));

    cfg.default_probs.pop_back();
    CHECK_THROWS_AS(build_reinsurance_model(cfg), InvalidArgument);
}

TEST_CASE("factor model correlations") {
    LossModelSpec spec = build_reinsurance_model(ReinsuranceConfig{});
    const auto& mvt = std::get<MultivariateTSpec>(spec.dependence);
    MvtSample s = sample_mvt(mvt, 200000, {31, 0});
    const std::size_t d = mvt.sigma.rows, n = s.n;
    double worst = 0;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b) {
            double sab = 0, saa = 0, sbb = 0;
            for (std::size_t i = 0; i < n; ++i) {
                double x = s.latents[a][i], y = s.latents[b][i];
                sab += x * y, saa += x * x, sbb += y * y;
            }
            worst = std::max(worst, std::fabs(sab / std::sqrt(saa * sbb) - mvt.sigma(a, b)));
        }
    CHECK(worst < 0.01);
}

TEST_CASE("headline loss probability") {
    ReinsuranceStudyParams p;
    p.n = 200000;
    p.sensitivities = false;
    p.seed = {41, 0};
    ReinsuranceStudyResult r = run_reinsurance_study(ReinsuranceConfig{}, p);
    CHECK(std::fabs(r.p_loss_positive - 0.05044) < 0.003);
    CHECK(r.es > r.var);
    CHECK(r.var > 0);
    double total = 0;
    for (auto [x, c] : r.histogram) total += c;
    CHECK(total == doctest::Approx(r.p_loss_positive * r.n));
}

TEST_CASE("small reinsurance study writes its tables") {
    ReinsuranceStudyParams p;
    p.n = 100000;
    p.n_conditional = 20000;
    p.alphas = {0.96, 0.975};
    p.delta_sweep = {0.005, 0.01};
    p.boot = {5, 0.9, {}};
    p.seed = {42, 0};
    ReinsuranceStudyResult r = run_reinsurance_study(ReinsuranceConfig{}, p);
    CHECK(r.z_sens.size() == 24);
    CHECK(r.x_sens.size() == 16);
    CHECK(r.es_alphas.size() == 2 * 20);
    REQUIRE(r.delta_sweep.size() == 2);
    CHECK(r.delta_sweep[1].second.size() == 16);
    for (const auto& row : r.z_sens) CHECK(row.estimate.value >= 0);

    auto dir = std::filesystem::temp_directory_path() / "qs_casestudy_test";
    std::filesystem::remove_all(dir);
    write_reinsurance_outputs(r, p, dir.string());
    for (const char* f : {"reinsurance_sens_z.csv", "reinsurance_sens_x.csv", "reinsurance_es_alphas.csv",
                          "reinsurance_delta_sweep.csv", "reinsurance_histogram.csv", "reinsurance_summary.json"})
        CHECK(std::filesystem::exists(dir / f));
    std::ifstream in(dir / "reinsurance_summary.json");
    json j = json::parse(in);
    CHECK(j["p_loss_positive"].get<double>() == r.p_loss_positive);
    CHECK(j["rank_z_es"].size() == 12);
    std::filesystem::remove_all(dir);
}

TEST_CASE("ranking") {
    auto row = [](std::string t, RiskMeasureSpec rm, double v) {
        SensitivityRow r{t, rm, "tail_upper", {}};
        r.estimate.value = v;
        return r;
    };
    std::vector<SensitivityRow> rows{row("Z1", ES{0.9}, 1.0), row("Z2", ES{0.9}, 3.0), row("Z3", ES{0.9}, 2.0),
                                     row("Z1", VaR{0.9}, 5.0)};
    CHECK(ranking(rows, "ES") == std::vector<std::size_t>{2, 3, 1});
    CHECK(ranking(rows, "VaR") == std::vector<std::size_t>{1});
}

TEST_CASE("compound baseline and scale invariance") {
    CompoundPoint p = run_compound_point(CompoundConfig{}, 200000, {51, 0}, BootstrapSpec{0, 0.9, {}});
    CHECK(p.scaled_freq == doctest::Approx(0.414).epsilon(0.02 / 0.414));
    CHECK(p.scaled_sev == doctest::Approx(0.429).epsilon(0.02 / 0.429));

    CompoundConfig scaled;
    scaled.gamma_scale = 7.0;
    CompoundPoint a = run_compound_point(CompoundConfig{}, 20000, {52, 0}, BootstrapSpec{0, 0.9, {}});
    CompoundPoint b = run_compound_point(scaled, 20000, {52, 0}, BootstrapSpec{0, 0.9, {}});
    CHECK(b.es == doctest::Approx(7 * a.es).epsilon(1e-12));
    CHECK(b.scaled_freq == doctest::Approx(a.scaled_freq).epsilon(1e-12));
    CHECK(b.scaled_sev == doctest::Approx(a.scaled_sev).epsilon(1e-12));
}

TEST_CASE("compound sweeps") {
    CHECK(with_grid_value(CompoundConfig{}, CompoundSweep::Skewness, 2 / std::sqrt(5.0)).gamma_shape ==
          doctest::Approx(5.0).epsilon(1e-14));
    CHECK(with_grid_value(CompoundConfig{}, CompoundSweep::Alpha, 0.99).alpha == 0.99);
    for (auto s : {CompoundSweep::FreqMean, CompoundSweep::Overdispersion, CompoundSweep::Skewness, CompoundSweep::Alpha}) {
        CHECK(parse_sweep(sweep_name(s)) == s);
        CHECK(default_grid(s).size() >= 5);
    }
    CHECK_THROWS_AS(parse_sweep("severity"), InvalidArgument);
    CHECK_THROWS_AS(with_grid_value(CompoundConfig{}, CompoundSweep::Skewness, 0.0), InvalidArgument);

    auto pts = run_compound_study(CompoundSweep::Skewness, {0.5, 1.0, 1.5}, CompoundConfig{}, 20000, {53, 0},
                                  BootstrapSpec{0, 0.9, {}});
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].grid_value == 0.5);
    CHECK(pts[0].scaled_sev < pts[2].scaled_sev);

    auto path = std::filesystem::temp_directory_path() / "qs_compound.csv";
    write_compound_csv(path.string(), CompoundSweep::Skewness, pts);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "skewness,es,scaled_freq,scaled_freq_stderr,scaled_sev,scaled_sev_stderr");
    std::filesystem::remove(path);
}

TEST_CASE("spearman") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 3, 4, 5}, {1, 3, 2, 5, 4}) == doctest::Approx(0.8));
    CHECK(spearman({1, 2, 3}, {1, 1, 2}) == doctest::Approx(std::sqrt(0.75)));
    CHECK_THROWS_AS(spearman({1}, {1}), InvalidArgument);
}
