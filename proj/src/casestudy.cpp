#include "quantsens/casestudy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "quantsens/error.hpp"
#include "quantsens/io.hpp"

namespace qs {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidArgument(msg);
}

}  // namespace

// ---- reinsurance ------------------------------------------------------------------------------

const std::vector<double>& solvency_lob_covs() {
    static const std::vector<double> covs{0.1, 0.08, 0.15, 0.08, 0.14, 0.19, 0.083, 0.064, 0.13, 0.17, 0.17, 0.17};
    return covs;
}

const Matrix& solvency_correlation() {
    static const Matrix R = [] {
        // clang-format off
        const double v[12][12] = {
            {1,    0.5,  0.5,  0.25, 0.5,  0.25, 0.5,  0.25, 0.5,  0.25, 0.25, 0.25},
            {0.5,  1,    0.25, 0.25, 0.25, 0.25, 0.5,  0.5,  0.5,  0.25, 0.25, 0.25},
            {0.5,  0.25, 1,    0.25, 0.25, 0.25, 0.25, 0.5,  0.5,  0.25, 0.5,  0.25},
            {0.25, 0.25, 0.25, 1,    0.25, 0.25, 0.25, 0.5,  0.5,  0.25, 0.5,  0.5},
            {0.5,  0.25, 0.25, 0.25, 1,    0.5,  0.5,  0.25, 0.5,  0.5,  0.25, 0.25},
            {0.25, 0.25, 0.25, 0.25, 0.5,  1,    0.5,  0.25, 0.5,  0.5,  0.25, 0.25},
            {0.5,  0.5,  0.25, 0.25, 0.5,  0.5,  1,    0.25, 0.5,  0.5,  0.25, 0.25},
            {0.25, 0.5,  0.5,  0.5,  0.25, 0.25, 0.25, 1,    0.5,  0.25, 0.25, 0.5},
            {0.5,  0.5,  0.5,  0.5,  0.5,  0.5,  0.5,  0.5,  1,    0.25, 0.5,  0.25},
            {0.25, 0.25, 0.25, 0.25, 0.5,  0.5,  0.5,  0.25, 0.25, 1,    0.25, 0.25},
            {0.25, 0.25, 0.5,  0.5,  0.25, 0.25, 0.25, 0.25, 0.5,  0.25, 1,    0.25},
            {0.25, 0.25, 0.25, 0.5,  0.25, 0.25, 0.25, 0.5,  0.25, 0.25, 0.25, 1},
        };
        // clang-format on
        Matrix m(12, 12);
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t j = 0; j < 12; ++j) m(i, j) = v[i][j];
        return m;
    }();
    return R;
}

void validate(const ReinsuranceConfig& cfg) {
    require(cfg.m_reins >= 3, "reinsurance: need at least three reinsurers");
    require(cfg.n_lob == 2 * (cfg.m_reins - 2),
            "reinsurance: the layer assignment needs n_lob = 2 (m_reins - 2)");
    require(cfg.lob_covs.size() == cfg.n_lob, "reinsurance: lob_covs must have n_lob entries");
    require(cfg.default_probs.size() == cfg.m_reins, "reinsurance: default_probs must have m_reins entries");
    require(cfg.R.rows == cfg.n_lob && cfg.R.cols == cfg.n_lob, "reinsurance: R must be n_lob x n_lob");
    require(cfg.lob_mean > 0, "reinsurance: lob_mean must be positive");
    for (double c : cfg.lob_covs) require(c > 0, "reinsurance: CoVs must be positive");
    for (double p : cfg.default_probs) require(p > 0 && p < 1, "reinsurance: default probabilities must be in (0,1)");
    for (auto [a, b] : {cfg.low_layer, cfg.high_layer})
        require(0 < a && a < b && b < 1, "reinsurance: layer bands must satisfy 0 < lo < hi < 1");
    require(cfg.lambda > 0 && cfg.lambda < 1, "reinsurance: lambda must be in (0,1)");
    require(cfg.nu > 2, "reinsurance: nu must exceed 2");
}

LossModelSpec build_reinsurance_model(const ReinsuranceConfig& cfg) {
    validate(cfg);
    LossModelSpec s;
    for (double cov : cfg.lob_covs) s.z_marginals.push_back(lognormal_from_mean_cov(cfg.lob_mean, cov));
    const DistributionSpec xm = StudentT{cfg.nu, true};
    for (double p : cfg.default_probs) {
        s.x_marginals.push_back(xm);
        s.thresholds.push_back(quantile(xm, p));
    }
    auto layer = [&](std::size_t k, std::pair<double, double> band) {
        double lo = quantile(s.z_marginals[k], band.first);
        return LayerTerm{k, lo, quantile(s.z_marginals[k], band.second) - lo};
    };
    const std::size_t pairs = cfg.m_reins - 2, half = cfg.n_lob / 2;
    for (std::size_t j = 0; j < pairs; ++j)
        s.g.push_back(LayerSumG{{layer(2 * j, cfg.low_layer), layer(2 * j + 1, cfg.low_layer)}});
    for (std::size_t part = 0; part < 2; ++part) {
        LayerSumG g;
        for (std::size_t k = part * half; k < (part + 1) * half; ++k) g.terms.push_back(layer(k, cfg.high_layer));
        s.g.push_back(g);
    }
    s.dependence = build_factor_sigma(cfg.R, cfg.lambda, cfg.m_reins, cfg.nu);
    validate(s);
    return s;
}

namespace {

std::vector<SensitivityRequest> x_requests(const LossModelSpec& spec, const std::vector<RiskMeasureSpec>& rms,
                                           double tail) {
    std::vector<SensitivityRequest> out;
    for (const auto& rm : rms)
        for (std::size_t j = 0; j < spec.m(); ++j)
            out.push_back({{FactorKind::X, j}, TailLower{quantile(spec.x_marginals[j], tail)}, rm, StressMode::Marginal});
    return out;
}

std::vector<SensitivityRequest> z_requests(const LossModelSpec& spec, const std::vector<RiskMeasureSpec>& rms,
                                           double tail) {
    std::vector<SensitivityRequest> out;
    for (const auto& rm : rms)
        for (std::size_t k = 0; k < spec.n(); ++k)
            out.push_back({{FactorKind::Z, k}, TailUpper{quantile(spec.z_marginals[k], tail)}, rm, StressMode::Marginal});
    return out;
}

std::vector<SensitivityRow> to_rows(const std::vector<SensitivityRequest>& req,
                                    const std::vector<SensitivityEstimate>& est, std::size_t from, std::size_t count) {
    std::vector<SensitivityRow> rows;
    for (std::size_t i = from; i < from + count; ++i)
        rows.push_back({factor_name(req[i].target), req[i].rm, type_name(req[i].stress), est[i]});
    return rows;
}

std::vector<std::size_t> all_x(const LossModelSpec& spec) {
    std::vector<std::size_t> js(spec.m());
    std::iota(js.begin(), js.end(), 0);
    return js;
}

}  // namespace

ReinsuranceStudyResult run_reinsurance_study(const ReinsuranceConfig& cfg, const ReinsuranceStudyParams& params) {
    require(params.n >= 1000, "reinsurance study: n too small");
    require(params.alpha > 0 && params.alpha < 1, "reinsurance study: alpha must be in (0,1)");
    require(params.z_tail > 0 && params.z_tail < 1 && params.x_tail > 0 && params.x_tail < 1,
            "reinsurance study: tail levels must be in (0,1)");
    const LossModelSpec spec = build_reinsurance_model(cfg);

    ReinsuranceStudyResult res;
    ScenarioSet base = simulate(spec, params.n, substream(params.seed, 1));
    res.n = base.n;
    std::size_t pos = 0;
    double lmax = 0;
    for (double l : base.L) {
        pos += l > 0;
        lmax = std::max(lmax, l);
    }
    res.p_loss_positive = double(pos) / base.n;
    res.p_loss_positive_stderr = std::sqrt(res.p_loss_positive * (1 - res.p_loss_positive) / base.n);
    res.var = risk_measure(base.L, VaR{params.alpha});
    res.es = risk_measure(base.L, ES{params.alpha});

    const std::size_t bins = 50;
    if (lmax > 0) {
        std::vector<double> count(bins, 0.0);
        for (double l : base.L)
            if (l > 0) count[std::min<std::size_t>(bins - 1, static_cast<std::size_t>(l / lmax * bins))] += 1;
        for (std::size_t b = 0; b < bins; ++b) res.histogram.emplace_back(lmax * b / bins, count[b]);
    }
    if (!params.sensitivities) return res;

    BootstrapSpec boot = params.boot;
    boot.seed = substream(params.seed, 2);

    // headline level plus the ES alpha sweep, one set of resamples
    std::vector<RiskMeasureSpec> head{VaR{params.alpha}, ES{params.alpha}};
    std::vector<RiskMeasureSpec> sweep;
    for (double a : params.alphas) sweep.push_back(ES{a});
    std::vector<SensitivityRequest> req = z_requests(spec, head, params.z_tail);
    auto add = [&](std::vector<SensitivityRequest> more) { req.insert(req.end(), more.begin(), more.end()); };
    add(x_requests(spec, head, params.x_tail));
    add(z_requests(spec, sweep, params.z_tail));
    add(x_requests(spec, sweep, params.x_tail));

    const BandSpec band{params.delta};
    ConditionalSets cond = make_conditional_sets(spec, all_x(spec), band, params.n_conditional, substream(params.seed, 3));
    std::vector<SensitivityEstimate> est = sensitivities(base, cond, spec, req, band, boot);
    const std::size_t nz = 2 * spec.n(), nx = 2 * spec.m();
    res.z_sens = to_rows(req, est, 0, nz);
    res.x_sens = to_rows(req, est, nz, nx);
    res.es_alphas = to_rows(req, est, nz + nx, req.size() - nz - nx);

    const std::vector<SensitivityRequest> xreq = x_requests(spec, head, params.x_tail);
    for (std::size_t k = 0; k < params.delta_sweep.size(); ++k) {
        const double d = params.delta_sweep[k];
        if (d == params.delta) {
            res.delta_sweep.emplace_back(d, res.x_sens);
            continue;
        }
        const BandSpec b{d};
        ConditionalSets c = make_conditional_sets(spec, all_x(spec), b, params.n_conditional, substream(params.seed, 10 + k));
        std::vector<SensitivityEstimate> e = sensitivities(base, c, spec, xreq, b, boot);
        res.delta_sweep.emplace_back(d, to_rows(xreq, e, 0, xreq.size()));
    }
    return res;
}

std::vector<std::size_t> ranking(const std::vector<SensitivityRow>& rows, const std::string& rm_type) {
    std::vector<std::pair<double, std::size_t>> v;
    for (const auto& r : rows)
        if (type_name(r.rm) == rm_type) v.emplace_back(r.estimate.value, parse_factor(r.target).index + 1);
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::size_t> out;
    for (const auto& p : v) out.push_back(p.second);
    return out;
}

json summary_json(const ReinsuranceStudyResult& res, const ReinsuranceStudyParams& params) {
    json j{{"n", res.n},
           {"p_loss_positive", res.p_loss_positive},
           {"p_loss_positive_stderr", res.p_loss_positive_stderr},
           {"alpha", params.alpha},
           {"VaR", res.var},
           {"ES", res.es},
           {"delta", params.delta},
           {"n_conditional", params.n_conditional},
           {"bootstrap", {{"replicates", params.boot.replicates}, {"fraction", params.boot.fraction}}},
           {"seed", params.seed.seed}};
    if (!res.z_sens.empty()) {
        j["rank_z_var"] = ranking(res.z_sens, "VaR");
        j["rank_z_es"] = ranking(res.z_sens, "ES");
        j["rank_x_var"] = ranking(res.x_sens, "VaR");
        j["rank_x_es"] = ranking(res.x_sens, "ES");
    }
    return j;
}

void write_reinsurance_outputs(const ReinsuranceStudyResult& res, const ReinsuranceStudyParams& params,
                               const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto path = [&](const std::string& f) { return (std::filesystem::path(dir) / f).string(); };
    {
        std::ofstream h(path("reinsurance_histogram.csv"));
        h << "bin_left,count\n";
        for (auto [x, c] : res.histogram) h << format_double(x) << "," << c << "\n";
        if (!h) throw Error("write failed for " + path("reinsurance_histogram.csv"));
    }
    if (!res.z_sens.empty()) {
        write_sensitivity_csv(path("reinsurance_sens_z.csv"), res.z_sens);
        write_sensitivity_csv(path("reinsurance_sens_x.csv"), res.x_sens);
        write_sensitivity_csv(path("reinsurance_es_alphas.csv"), res.es_alphas);
        std::ofstream d(path("reinsurance_delta_sweep.csv"));
        d << "delta,target,rm,alpha,value,stderr,ci_low,ci_high,n_effective\n";
        for (const auto& [delta, rows] : res.delta_sweep)
            for (const auto& r : rows) {
                const auto& e = r.estimate;
                d << format_double(delta) << "," << r.target << "," << type_name(r.rm) << ","
                  << format_double(level(r.rm)) << "," << format_double(e.value) << "," << format_double(e.std_error)
                  << "," << format_double(e.ci_low) << "," << format_double(e.ci_high) << "," << e.n_effective << "\n";
            }
        if (!d) throw Error("write failed for " + path("reinsurance_delta_sweep.csv"));
    }
    std::ofstream s(path("reinsurance_summary.json"));
    s << summary_json(res, params).dump(2) << "\n";
    if (!s) throw Error("write failed for " + path("reinsurance_summary.json"));
}

// ---- compound -----------------------------------------------------------------------------------

DiscreteModelSpec build_compound_model(const CompoundConfig& cfg) {
    require(cfg.gamma_shape > 0 && cfg.gamma_scale > 0, "compound: gamma parameters must be positive");
    require(cfg.alpha > 0 && cfg.alpha < 1, "compound: alpha must be in (0,1)");
    return make_compound_model(make_negative_binomial(cfg.freq_mean, cfg.overdispersion, cfg.truncation),
                               Gamma{cfg.gamma_shape, cfg.gamma_scale});
}

std::string sweep_name(CompoundSweep s) {
    switch (s) {
        case CompoundSweep::FreqMean: return "freq_mean";
        case CompoundSweep::Overdispersion: return "overdispersion";
        case CompoundSweep::Skewness: return "skewness";
        case CompoundSweep::Alpha: return "alpha";
    }
    return "";
}

CompoundSweep parse_sweep(const std::string& name) {
    for (auto s : {CompoundSweep::FreqMean, CompoundSweep::Overdispersion, CompoundSweep::Skewness, CompoundSweep::Alpha})
        if (sweep_name(s) == name) return s;
    throw InvalidArgument("unknown compound sweep '" + name + "'");
}

std::vector<double> default_grid(CompoundSweep s) {
    switch (s) {
        case CompoundSweep::FreqMean: return {2, 3.5, 5, 7.5, 10};
        case CompoundSweep::Overdispersion: return {1.5, 2, 2.5, 3.5, 5};
        case CompoundSweep::Skewness: return {0.5, 0.7, 2 / std::sqrt(5.0), 1.2, 1.5};
        case CompoundSweep::Alpha: return {0.9, 0.925, 0.95, 0.975, 0.99};
    }
    return {};
}

CompoundConfig with_grid_value(CompoundConfig cfg, CompoundSweep s, double value) {
    switch (s) {
        case CompoundSweep::FreqMean: cfg.freq_mean = value; break;
        case CompoundSweep::Overdispersion: cfg.overdispersion = value; break;
        case CompoundSweep::Skewness:
            require(value > 0, "compound: skewness must be positive");
            cfg.gamma_shape = 4 / (value * value);
            break;
        case CompoundSweep::Alpha: cfg.alpha = value; break;
    }
    return cfg;
}

CompoundPoint run_compound_point(const CompoundConfig& cfg, std::size_t n, const SeedSpec& seed,
                                 const BootstrapSpec& boot) {
    const DiscreteModelSpec dm = build_compound_model(cfg);
    const DiscreteScenarioSet ds = simulate_discrete(dm, n, seed);
    SensitivityEstimate f = compound_freq_sens(ds, dm, cfg.alpha, boot);
    SensitivityEstimate s = compound_sev_sens(ds, dm, cfg.alpha, boot);
    CompoundPoint p;
    p.es = f.diagnostics.at("es");
    p.scaled_freq = f.diagnostics.at("scaled");
    p.scaled_freq_stderr = f.diagnostics.at("scaled_stderr");
    p.scaled_sev = s.diagnostics.at("scaled");
    p.scaled_sev_stderr = s.diagnostics.at("scaled_stderr");
    return p;
}

std::vector<CompoundPoint> run_compound_study(CompoundSweep sweep, const std::vector<double>& grid,
                                              const CompoundConfig& base, std::size_t n, const SeedSpec& seed,
                                              const BootstrapSpec& boot) {
    require(!grid.empty(), "compound study: empty grid");
    std::vector<CompoundPoint> out;
    // same seed at every grid point, so the curves share their noise
    for (double v : grid) {
        CompoundPoint p = run_compound_point(with_grid_value(base, sweep, v), n, seed, boot);
        p.grid_value = v;
        out.push_back(p);
    }
    return out;
}

void write_compound_csv(const std::string& path, CompoundSweep sweep, const std::vector<CompoundPoint>& pts) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path);
    out << sweep_name(sweep) << ",es,scaled_freq,scaled_freq_stderr,scaled_sev,scaled_sev_stderr\n";
    for (const auto& p : pts)
        out << format_double(p.grid_value) << "," << format_double(p.es) << "," << format_double(p.scaled_freq) << ","
            << format_double(p.scaled_freq_stderr) << "," << format_double(p.scaled_sev) << ","
            << format_double(p.scaled_sev_stderr) << "\n";
    if (!out) throw Error("write failed for " + path);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size() && a.size() >= 2, "spearman: need two equal-length samples");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (i + j) / 2.0 + 1;
            i = j + 1;
        }
        return r;
    };
    std::vector<double> ra = ranks(a), rb = ranks(b);
    const double n = a.size(), m = (n + 1) / 2;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (ra[i] - m) * (rb[i] - m);
        saa += (ra[i] - m) * (ra[i] - m);
        sbb += (rb[i] - m) * (rb[i] - m);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace qs
