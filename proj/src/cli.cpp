#include "quantsens/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "quantsens/casestudy.hpp"
#include "quantsens/error.hpp"
#include "quantsens/io.hpp"
#include "quantsens/oracle.hpp"
#include "quantsens/parallel.hpp"

namespace qs {

namespace fs = std::filesystem;

namespace {

RiskMeasureSpec rm_from_json(const JsonReader& r) {
    r.require_object();
    std::string type = r.string("type");
    for (auto& c : type) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (type == "mean") {
        r.only({"type"});
        return Mean{};
    }
    r.only({"type", "alpha"});
    double a = r.number("alpha");
    if (!(a > 0 && a < 1)) r.fail("alpha", "must lie in (0,1)");
    if (type == "var") return VaR{a};
    if (type == "es") return ES{a};
    r.fail("type", "unknown risk measure '" + type + "' (VaR, ES or mean)");
}

RiskMeasureSpec rm_from_flag(const std::string& name, double alpha) {
    std::string t = name;
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!(alpha > 0 && alpha < 1)) throw InvalidArgument("--alpha must lie in (0,1)");
    if (t == "var") return VaR{alpha};
    if (t == "es") return ES{alpha};
    if (t == "mean") return Mean{};
    throw InvalidArgument("--rm must be var, es or mean");
}

std::size_t positive_size(const JsonReader& r, const std::string& key) {
    long v = r.integer(key);
    if (v <= 0) r.fail(key, "must be a positive integer");
    return static_cast<std::size_t>(v);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", "config file '" + path + "' is not valid JSON: " + e.what());
    }
    const std::string base_dir = fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string();

    JsonReader r(doc, "");
    r.require_object();
    r.only({"version", "model", "targets", "stresses", "risk_measures", "mode", "n_scenarios", "n_conditional", "seed",
            "delta", "bootstrap", "eps_grid", "output_dir"});
    if (!r.has("version")) r.fail("version", "missing config version (expected " + std::to_string(kConfigVersion) + ")");
    if (r.integer("version") != kConfigVersion)
        r.fail("version", "unsupported config version " + r.raw()["version"].dump() + " (expected " +
                              std::to_string(kConfigVersion) + ")");

    RunConfig cfg;
    JsonReader m = r.at("model");
    m.require_object();
    const std::string mtype = m.string("type", "loss");
    if (mtype == "loss")
        cfg.model = loss_model_from_json(m, base_dir);
    else
        cfg.model = discrete_model_from_json(m);

    if (r.has("risk_measures")) {
        JsonReader rms = r.at("risk_measures");
        rms.require_array();
        for (std::size_t i = 0; i < rms.size(); ++i) cfg.risk_measures.push_back(rm_from_json(rms.at(i)));
    }
    if (r.has("mode")) {
        std::string mode = r.string("mode");
        if (mode != "marginal" && mode != "cascade" && mode != "discrete")
            r.fail("mode", "must be marginal, cascade or discrete");
        cfg.mode = mode;
    }
    if (r.has("n_scenarios")) cfg.n_scenarios = positive_size(r, "n_scenarios");
    if (r.has("n_conditional")) cfg.n_conditional = positive_size(r, "n_conditional");
    if (r.has("seed")) {
        long s = r.integer("seed");
        if (s < 0) r.fail("seed", "must be non-negative");
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    cfg.delta = r.number("delta", cfg.delta);
    if (!(cfg.delta > 0 && cfg.delta < 0.5)) r.fail("delta", "must lie in (0, 0.5)");
    if (r.has("bootstrap")) {
        JsonReader b = r.at("bootstrap");
        b.require_object();
        b.only({"B", "fraction"});
        long B = b.integer("B", static_cast<long>(cfg.bootstrap.replicates));
        if (B < 0 || B == 1) b.fail("B", "must be 0 or at least 2");
        cfg.bootstrap.replicates = static_cast<std::size_t>(B);
        cfg.bootstrap.fraction = b.number("fraction", cfg.bootstrap.fraction);
        if (!(cfg.bootstrap.fraction > 0 && cfg.bootstrap.fraction <= 1)) b.fail("fraction", "must lie in (0,1]");
    }
    if (r.has("eps_grid")) cfg.eps_grid = r.numbers("eps_grid");
    cfg.output_dir = r.string("output_dir", cfg.output_dir);

    // targets x stresses
    std::vector<JsonReader> stresses;
    if (r.has("stresses")) {
        JsonReader s = r.at("stresses");
        s.require_array();
        for (std::size_t i = 0; i < s.size(); ++i) stresses.push_back(s.at(i));
    }
    auto parse_stress = [&](const JsonReader& sr, const std::string& target) {
        if (cfg.is_discrete()) return stress_from_json(sr);
        const auto& spec = std::get<LossModelSpec>(cfg.model);
        Factor f = parse_factor(target);
        const DistributionSpec& marginal = spec.marginal(f);
        StressSpec s = stress_from_json(sr, &marginal);
        try {
            check_stress_target(spec, f, s);
        } catch (const InvalidArgument& e) {
            sr.fail(e.what());
        }
        return s;
    };
    auto check_target = [&](const JsonReader& at, const std::string& name) {
        if (cfg.is_discrete()) {
            if (name != "W") at.fail("discrete models have the single target W");
            return;
        }
        try {
            check_factor(std::get<LossModelSpec>(cfg.model), parse_factor(name));
        } catch (const InvalidArgument& e) {
            at.fail(e.what());
        }
    };
    if (r.has("targets")) {
        JsonReader t = r.at("targets");
        t.require_array();
        for (std::size_t i = 0; i < t.size(); ++i) {
            JsonReader ti = t.at(i);
            if (ti.raw().is_string()) {
                std::string name = ti.as_string();
                check_target(ti, name);
                if (stresses.empty()) ti.fail("target without a stress: add a \"stresses\" list or use {factor, stress}");
                for (const auto& sr : stresses) cfg.jobs.push_back({name, parse_stress(sr, name)});
            } else {
                ti.require_object();
                ti.only({"factor", "stress"});
                std::string name = ti.string("factor");
                check_target(ti.at("factor"), name);
                cfg.jobs.push_back({name, parse_stress(ti.at("stress"), name)});
            }
        }
    } else if (cfg.is_discrete()) {
        for (const auto& sr : stresses) cfg.jobs.push_back({"W", parse_stress(sr, "W")});
    }
    if (cfg.is_discrete() && cfg.mode && *cfg.mode != "discrete")
        r.fail("mode", "discrete models only support mode \"discrete\"");
    if (!cfg.is_discrete() && cfg.mode && *cfg.mode == "discrete")
        r.fail("mode", "mode \"discrete\" needs a compound or discrete model");
    return cfg;
}

namespace {

struct Common {
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
    std::optional<std::string> out;
};

struct SensFlags {
    std::string config;
    std::optional<std::string> mode;
    std::optional<std::string> rm;
    std::optional<double> alpha;
    std::optional<double> delta;
    std::optional<std::vector<double>> eps_grid;
};

void apply_common(RunConfig& cfg, const Common& c) {
    if (c.seed) cfg.seed = *c.seed;
    if (c.n) cfg.n_scenarios = *c.n;
    if (c.out) cfg.output_dir = *c.out;
}

std::vector<RiskMeasureSpec> resolve_rms(const RunConfig& cfg, const SensFlags& f) {
    if (f.rm) return {rm_from_flag(*f.rm, f.alpha.value_or(0.975))};
    std::vector<RiskMeasureSpec> rms = cfg.risk_measures;
    if (rms.empty()) rms.push_back(ES{0.975});
    if (f.alpha) {
        if (!(*f.alpha > 0 && *f.alpha < 1)) throw InvalidArgument("--alpha must lie in (0,1)");
        for (auto& rm : rms) {
            if (auto* v = std::get_if<VaR>(&rm)) v->alpha = *f.alpha;
            if (auto* e = std::get_if<ES>(&rm)) e->alpha = *f.alpha;
        }
    }
    return rms;
}

std::string resolve_mode(const RunConfig& cfg, const SensFlags& f) {
    std::string mode = f.mode ? *f.mode : cfg.mode ? *cfg.mode : cfg.is_discrete() ? "discrete" : "marginal";
    if (mode != "marginal" && mode != "cascade" && mode != "discrete")
        throw InvalidArgument("--mode must be marginal, cascade or discrete");
    if (cfg.is_discrete() != (mode == "discrete"))
        throw InvalidArgument(cfg.is_discrete() ? "discrete models need --mode discrete"
                                                : "--mode discrete needs a compound or discrete model");
    return mode;
}

std::string ensure_dir(const std::string& dir) {
    fs::create_directories(dir);
    return dir;
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

struct SensRun {
    std::vector<SensitivityRow> rows;
    std::vector<std::pair<TargetStress, RiskMeasureSpec>> keys;
};

SensRun compute_sensitivities(const RunConfig& cfg, const std::vector<RiskMeasureSpec>& rms, const std::string& mode,
                              double delta) {
    SensRun run;
    if (cfg.jobs.empty()) throw InvalidArgument("config has no targets/stresses to evaluate");
    const SeedSpec seed{cfg.seed, 0};
    BootstrapSpec boot = cfg.bootstrap;
    boot.seed = substream(seed, 3);
    const BandSpec band{delta};

    if (mode == "discrete") {
        const auto& dm = std::get<DiscreteModelSpec>(cfg.model);
        DiscreteScenarioSet ds = simulate_discrete(dm, cfg.n_scenarios, substream(seed, 1));
        for (const auto& job : cfg.jobs)
            for (const auto& rm : rms) {
                run.rows.push_back({job.target, rm, type_name(job.stress), discrete_sens(ds, dm, job.stress, rm, band, boot)});
                run.keys.emplace_back(job, rm);
            }
        return run;
    }
    const auto& spec = std::get<LossModelSpec>(cfg.model);
    const StressMode sm = mode == "cascade" ? StressMode::Cascade : StressMode::Marginal;
    std::vector<SensitivityRequest> req;
    std::set<std::size_t> js;
    for (const auto& job : cfg.jobs) {
        Factor f = parse_factor(job.target);
        for (std::size_t j : required_conditioning(spec, f, sm)) js.insert(j);
        for (const auto& rm : rms) {
            req.push_back({f, job.stress, rm, sm});
            run.keys.emplace_back(job, rm);
        }
    }
    ScenarioSet base = simulate(spec, cfg.n_scenarios, substream(seed, 1));
    ConditionalSets cond = make_conditional_sets(spec, {js.begin(), js.end()}, band,
                                                 cfg.n_conditional.value_or(cfg.n_scenarios), substream(seed, 2));
    std::vector<SensitivityEstimate> est = sensitivities(base, cond, spec, req, band, boot);
    for (std::size_t i = 0; i < req.size(); ++i)
        run.rows.push_back({factor_name(req[i].target), req[i].rm, type_name(req[i].stress), est[i]});
    return run;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string rm_label(const RiskMeasureSpec& rm) {
    return std::holds_alternative<Mean>(rm) ? "mean" : type_name(rm) + "@" + fmt(level(rm));
}

int cmd_simulate(const std::string& config, const Common& c, std::ostream& out) {
    RunConfig cfg = load_run_config(config);
    apply_common(cfg, c);
    const SeedSpec seed{cfg.seed, 0};
    const std::string path = join(ensure_dir(cfg.output_dir), "scenarios.csv");
    if (cfg.is_discrete()) {
        const auto& dm = std::get<DiscreteModelSpec>(cfg.model);
        DiscreteScenarioSet ds = simulate_discrete(dm, cfg.n_scenarios, substream(seed, 1));
        std::ofstream f(path);
        if (!f) throw InvalidArgument("cannot write " + path);
        f << "U,W,T\n";
        for (std::size_t i = 0; i < ds.n; ++i)
            f << format_double(ds.U[i]) << "," << format_double(dm.support[ds.k[i]]) << "," << format_double(ds.T[i]) << "\n";
        std::ofstream side(path + ".json");
        side << json{{"n", ds.n}, {"seed", cfg.seed}, {"stream", 1}, {"model_hash", ds.model_hash}}.dump(2) << "\n";
        if (!f || !side) throw Error("write failed for " + path);
    } else {
        ScenarioSet s = simulate(std::get<LossModelSpec>(cfg.model), cfg.n_scenarios, substream(seed, 1));
        write_scenarios(path, s);
    }
    out << "wrote " << path << " (" << cfg.n_scenarios << " scenarios)\n";
    return kExitOk;
}

int cmd_sens(const SensFlags& f, const Common& c, std::ostream& out) {
    RunConfig cfg = load_run_config(f.config);
    apply_common(cfg, c);
    const std::string mode = resolve_mode(cfg, f);
    const double delta = f.delta.value_or(cfg.delta);
    if (!(delta > 0 && delta < 0.5)) throw InvalidArgument("--delta must lie in (0, 0.5)");
    SensRun run = compute_sensitivities(cfg, resolve_rms(cfg, f), mode, delta);
    const std::string path = join(ensure_dir(cfg.output_dir), "sensitivities.csv");
    write_sensitivity_csv(path, run.rows);
    for (const auto& r : run.rows)
        out << r.target << " " << r.stress_type << " " << rm_label(r.rm) << ": " << fmt(r.estimate.value) << " (se "
            << fmt(r.estimate.std_error) << ")\n";
    out << "wrote " << path << "\n";
    return kExitOk;
}

int cmd_oracle(const SensFlags& f, const Common& c, std::ostream& out) {
    RunConfig cfg = load_run_config(f.config);
    apply_common(cfg, c);
    if (f.eps_grid) cfg.eps_grid = *f.eps_grid;
    const std::string mode = resolve_mode(cfg, f);
    const double delta = f.delta.value_or(cfg.delta);
    const std::vector<RiskMeasureSpec> rms = resolve_rms(cfg, f);
    for (const auto& job : cfg.jobs) validate_eps_grid(cfg.eps_grid, job.stress);

    SensRun run = compute_sensitivities(cfg, rms, mode, delta);
    json report = json::array();
    bool all_pass = true;
    for (std::size_t i = 0; i < run.rows.size(); ++i) {
        const auto& [job, rm] = run.keys[i];
        const SensitivityEstimate& est = run.rows[i].estimate;
        json entry{{"target", job.target}, {"stress", to_json(job.stress)}, {"rm", type_name(rm)}, {"alpha", level(rm)},
                   {"mode", mode}};
        bool pass;
        double reference, tol;
        if (mode == "discrete") {
            DiscreteOracleReport ex =
                brute_force_discrete(std::get<DiscreteModelSpec>(cfg.model), job.stress, rm, cfg.eps_grid);
            reference = ex.derivative;
            tol = 3 * est.std_error;
            pass = std::fabs(est.value - reference) <= tol;
            entry["exact"] = to_json(ex);
            entry["estimate"] = est.value;
            entry["estimate_stderr"] = est.std_error;
            entry["pass"] = pass;
        } else {
            const auto& spec = std::get<LossModelSpec>(cfg.model);
            FDReport fd = fd_sensitivity(spec, parse_factor(job.target), job.stress, rm,
                                         mode == "cascade" ? StressMode::Cascade : StressMode::Marginal, cfg.eps_grid,
                                         cfg.n_scenarios, substream(SeedSpec{cfg.seed, 0}, 4));
            fd.agreement = compare(fd, est);
            reference = fd.richardson;
            tol = fd.agreement->tolerance;
            pass = fd.agreement->pass;
            entry["fd"] = to_json(fd);
        }
        all_pass = all_pass && pass;
        report.push_back(entry);
        out << (pass ? "PASS " : "FAIL ") << job.target << " " << type_name(job.stress) << " " << rm_label(rm)
            << ": estimate=" << fmt(est.value) << " (se " << fmt(est.std_error) << ") reference=" << fmt(reference)
            << " tolerance=" << fmt(tol) << "\n";
    }
    const std::string path = join(ensure_dir(cfg.output_dir), "oracle_report.json");
    std::ofstream o(path);
    o << report.dump(2) << "\n";
    if (!o) throw Error("write failed for " + path);
    out << "wrote " << path << "\n";
    return all_pass ? kExitOk : kExitDisagree;
}

struct CaseFlags {
    std::string which;
    bool quick = false;
    std::optional<std::size_t> n_conditional;
    std::optional<std::size_t> replicates;
    std::vector<std::string> sweeps;
};

int cmd_casestudy(const CaseFlags& f, const Common& c, std::ostream& out) {
    const std::string dir = ensure_dir(c.out.value_or("out"));
    const SeedSpec seed{c.seed.value_or(0), 0};
    if (f.which == "reinsurance") {
        ReinsuranceStudyParams p;
        p.seed = seed;
        if (f.quick) {
            p.n = 100000;
            p.n_conditional = 20000;
            p.boot.replicates = 10;
        }
        if (c.n) p.n = *c.n;
        if (f.n_conditional) p.n_conditional = *f.n_conditional;
        if (f.replicates) p.boot.replicates = *f.replicates;
        ReinsuranceStudyResult res = run_reinsurance_study(ReinsuranceConfig{}, p);
        write_reinsurance_outputs(res, p, dir);
        out << "P(L>0) = " << fmt(res.p_loss_positive) << " (se " << fmt(res.p_loss_positive_stderr) << "), VaR "
            << fmt(res.var) << ", ES " << fmt(res.es) << " at alpha " << p.alpha << "\n";
        out << "wrote reinsurance_*.csv and reinsurance_summary.json to " << dir << "\n";
        return kExitOk;
    }
    // compound
    std::size_t n = c.n.value_or(f.quick ? 100000 : 1000000);
    std::size_t n_sweep = f.quick ? 20000 : std::max<std::size_t>(n / 5, 1000);
    BootstrapSpec boot{f.replicates.value_or(f.quick ? 10 : 50), 0.9, substream(seed, 2)};
    CompoundConfig base;
    CompoundPoint p = run_compound_point(base, n, substream(seed, 1), boot);
    json summary{{"n", n},
                 {"alpha", base.alpha},
                 {"es", p.es},
                 {"scaled_freq", p.scaled_freq},
                 {"scaled_freq_stderr", p.scaled_freq_stderr},
                 {"scaled_sev", p.scaled_sev},
                 {"scaled_sev_stderr", p.scaled_sev_stderr},
                 {"seed", seed.seed}};
    std::vector<std::string> sweeps = f.sweeps;
    if (sweeps.empty()) sweeps = {"freq_mean", "overdispersion", "skewness", "alpha"};
    BootstrapSpec sweep_boot{0, 0.9, {}};
    for (const auto& name : sweeps) {
        CompoundSweep s = parse_sweep(name);
        auto pts = run_compound_study(s, default_grid(s), base, n_sweep, substream(seed, 3), sweep_boot);
        write_compound_csv(join(dir, "compound_" + name + ".csv"), s, pts);
        std::vector<double> grid, fr, sv;
        for (const auto& q : pts) grid.push_back(q.grid_value), fr.push_back(q.scaled_freq), sv.push_back(q.scaled_sev);
        summary["spearman"][name] = {{"scaled_freq", spearman(grid, fr)}, {"scaled_sev", spearman(grid, sv)}};
    }
    summary["sweep_n"] = n_sweep;
    std::ofstream o(join(dir, "compound_summary.json"));
    o << summary.dump(2) << "\n";
    if (!o) throw Error("write failed for " + join(dir, "compound_summary.json"));
    out << "scaled ES sensitivities: frequency " << fmt(p.scaled_freq) << " (se " << fmt(p.scaled_freq_stderr)
        << "), severity " << fmt(p.scaled_sev) << " (se " << fmt(p.scaled_sev_stderr) << ")\n";
    out << "wrote compound_*.csv and compound_summary.json to " << dir << "\n";
    return kExitOk;
}

int cmd_validate(const std::string& config, std::ostream& out) {
    RunConfig cfg = load_run_config(config);
    std::string hash = cfg.is_discrete() ? model_hash(std::get<DiscreteModelSpec>(cfg.model))
                                         : model_hash(std::get<LossModelSpec>(cfg.model));
    out << "ok: " << (cfg.is_discrete() ? "discrete" : "loss") << " model " << hash << ", " << cfg.jobs.size()
        << " target/stress pairs, " << cfg.risk_measures.size() << " risk measures\n";
    return kExitOk;
}

const char* kFooter = R"(Precedence: command-line flags override config values, which override defaults.
Threads: --threads, else QUANTSENS_THREADS, else all hardware threads.
Exit codes: 0 ok, 1 oracle disagreement, 2 config error, 3 numerical error.
Outputs (in --out / output_dir):
  simulate    scenarios.csv + scenarios.csv.json
  sens        sensitivities.csv
  oracle      oracle_report.json
  casestudy   reinsurance_{sens_z,sens_x,es_alphas,delta_sweep,histogram}.csv, reinsurance_summary.json
              compound_{freq_mean,overdispersion,skewness,alpha}.csv, compound_summary.json)";

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Risk-factor sensitivities of VaR, ES and the mean", "quantsens"};
    app.footer(kFooter);
    app.require_subcommand(1);
    Common c;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--threads", c.threads, "worker thread cap")->check(CLI::PositiveNumber);
        sub->add_option("--seed", c.seed, "master seed");
        sub->add_option("--n", c.n, "number of scenarios")->check(CLI::PositiveNumber);
        sub->add_option("--out", c.out, "output directory");
    };
    SensFlags sf;
    auto add_sens = [&](CLI::App* sub) {
        sub->add_option("config", sf.config, "run config (JSON)")->required();
        sub->add_option("--mode", sf.mode, "marginal | cascade | discrete");
        sub->add_option("--rm", sf.rm, "var | es | mean (replaces the config's risk measures)");
        sub->add_option("--alpha", sf.alpha, "risk-measure level (default 0.975)");
        sub->add_option("--delta", sf.delta, "conditioning band half-width (default 0.005)");
        add_common(sub);
    };

    auto* sim = app.add_subcommand("simulate", "simulate scenarios");
    std::string sim_config;
    sim->add_option("config", sim_config, "run config (JSON)")->required();
    add_common(sim);

    auto* sens = app.add_subcommand("sens", "sensitivity estimates");
    add_sens(sens);

    auto* orc = app.add_subcommand("oracle", "check estimates against finite differences / exact enumeration");
    add_sens(orc);
    std::vector<double> eps;
    orc->add_option("--eps-grid", eps, "strictly decreasing eps values (default 0.02 0.01 0.005)")->expected(2, 64);

    auto* cs = app.add_subcommand("casestudy", "reproduce the reinsurance or compound study");
    CaseFlags cf;
    cs->add_option("which", cf.which, "reinsurance | compound")->required()->check(CLI::IsMember({"reinsurance", "compound"}));
    cs->add_flag("--quick", cf.quick, "10^5-scenario smoke run");
    cs->add_option("--n-conditional", cf.n_conditional, "conditioned scenarios per reinsurer")->check(CLI::PositiveNumber);
    cs->add_option("--replicates", cf.replicates, "bootstrap replicates");
    cs->add_option("--sweep", cf.sweeps, "compound sweeps to run (default all)");
    add_common(cs);

    auto* val = app.add_subcommand("validate", "check a config without running it");
    std::string val_config;
    val->add_option("config", val_config, "run config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }
    if (!eps.empty()) sf.eps_grid = eps;
    if (c.threads) set_max_threads(*c.threads);

    try {
        if (sim->parsed()) return cmd_simulate(sim_config, c, out);
        if (sens->parsed()) return cmd_sens(sf, c, out);
        if (orc->parsed()) return cmd_oracle(sf, c, out);
        if (cs->parsed()) return cmd_casestudy(cf, c, out);
        if (val->parsed()) return cmd_validate(val_config, out);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}

}  // namespace qs
