#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "quantsens/cli.hpp"
#include "quantsens/io.hpp"
#include "quantsens/oracle.hpp"

using namespace qs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("qs_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

json base_config() {
    return json::parse(R"({
      "version": 1,
      "model": {
        "type": "loss",
        "x_marginals": [{"type": "normal", "mean": 0, "sd": 1}, {"type": "uniform01"}],
        "z_marginals": [{"type": "lognormal", "mean": 100, "cov": 0.2}, {"type": "lognormal", "mean": 100, "cov": 0.2}],
        "thresholds": [0.0, 0.5],
        "g": [{"type": "identity", "z": "Z1"},
              {"type": "layer_sum", "terms": [{"z": "Z2", "s": 80, "t": 60}, {"z": "Z1", "s": 100, "t": 40}]}],
        "dependence": {"type": "independence"}
      },
      "targets": ["Z1", "X1"],
      "stresses": [{"type": "additive", "beta": 1}],
      "risk_measures": [{"type": "ES", "alpha": 0.9}],
      "n_scenarios": 20000,
      "n_conditional": 10000,
      "seed": 3,
      "delta": 0.01,
      "bootstrap": {"B": 10, "fraction": 0.9}
    })");
}

std::string write_config(const fs::path& dir, const json& j, const std::string& name = "config.json") {
    fs::path p = dir / name;
    std::ofstream(p) << j.dump(2);
    return p.string();
}

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "quantsens");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// rows of a sensitivity CSV as (target, value, stderr)
std::vector<std::tuple<std::string, double, double>> read_sens(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::vector<std::tuple<std::string, double, double>> rows;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        rows.emplace_back(f[0], std::stod(f[4]), std::stod(f[5]));
    }
    return rows;
}

}  // namespace

TEST_CASE("simulate: missing file, determinism, flag precedence") {
    fs::path dir = scratch("simulate");
    Result miss = run({"simulate", (dir / "nope.json").string()});
    CHECK(miss.code == kExitConfig);
    CHECK(miss.err.find("nope.json") != std::string::npos);

    std::string cfg = write_config(dir, base_config());
    REQUIRE(run({"simulate", cfg, "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run({"simulate", cfg, "--out", (dir / "b").string(), "--threads", "1"}).code == 0);
    CHECK(sha256_hex(slurp(dir / "a" / "scenarios.csv")) == sha256_hex(slurp(dir / "b" / "scenarios.csv")));
    CHECK(slurp(dir / "a" / "scenarios.csv.json") == slurp(dir / "b" / "scenarios.csv.json"));

    REQUIRE(run({"simulate", cfg, "--out", (dir / "c").string(), "--n", "1234"}).code == 0);
    json side = json::parse(slurp(dir / "c" / "scenarios.csv.json"));
    CHECK(side["n"] == 1234);
    json side_a = json::parse(slurp(dir / "a" / "scenarios.csv.json"));
    CHECK(side_a["n"] == 20000);
    fs::remove_all(dir);
}

TEST_CASE("sens: cascade reproduces marginal on an independence model") {
    fs::path dir = scratch("sens");
    std::string cfg = write_config(dir, base_config());
    REQUIRE(run({"sens", cfg, "--out", (dir / "m").string()}).code == 0);
    REQUIRE(run({"sens", cfg, "--mode", "cascade", "--out", (dir / "c").string()}).code == 0);
    auto m = read_sens(dir / "m" / "sensitivities.csv");
    auto c = read_sens(dir / "c" / "sensitivities.csv");
    REQUIRE(m.size() == 2);
    REQUIRE(c.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(std::get<0>(m[i]) == std::get<0>(c[i]));
        CHECK(std::fabs(std::get<1>(m[i]) - std::get<1>(c[i])) <=
              2 * std::hypot(std::get<2>(m[i]), std::get<2>(c[i])) + 1e-12);
    }
    fs::remove_all(dir);
}

TEST_CASE("sens: defaults and overrides") {
    fs::path dir = scratch("defaults");
    json j = base_config();
    j.erase("risk_measures");
    j.erase("delta");
    std::string cfg = write_config(dir, j);
    RunConfig rc = load_run_config(cfg);
    CHECK(rc.delta == 0.005);
    CHECK(rc.risk_measures.empty());
    REQUIRE(run({"sens", cfg, "--out", (dir / "d").string()}).code == 0);
    std::string csv = slurp(dir / "d" / "sensitivities.csv");
    CHECK(csv.find("Z1,ES,0.97499999999999998,additive") != std::string::npos);

    REQUIRE(run({"sens", cfg, "--rm", "var", "--alpha", "0.9", "--out", (dir / "e").string()}).code == 0);
    csv = slurp(dir / "e" / "sensitivities.csv");
    CHECK(csv.find("Z1,VaR,0.90000000000000002") != std::string::npos);
    CHECK(csv.find(",ES,") == std::string::npos);

    CHECK(run({"sens", cfg, "--mode", "discrete"}).code == kExitConfig);
    CHECK(run({"sens", cfg, "--rm", "median"}).code == kExitConfig);
    fs::remove_all(dir);
}

TEST_CASE("config errors name the JSON pointer") {
    fs::path dir = scratch("errors");
    json j = base_config();
    j["stresses"][0]["beta"] = 0;
    Result r = run({"sens", write_config(dir, j)});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("/stresses/0/beta") != std::string::npos);

    j = base_config();
    j["version"] = 2;
    r = run({"validate", write_config(dir, j)});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("/version") != std::string::npos);

    j = base_config();
    j["colour"] = "blue";
    CHECK(run({"validate", write_config(dir, j)}).code == kExitConfig);

    j = base_config();
    j["targets"] = {"Z9"};
    r = run({"validate", write_config(dir, j)});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("/targets/0") != std::string::npos);

    j = base_config();
    j["model"]["z_marginals"][1]["cov"] = -1;
    r = run({"validate", write_config(dir, j)});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("/model/z_marginals/1") != std::string::npos);

    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(run({"validate", (dir / "broken.json").string()}).code == kExitConfig);
    CHECK(run({"frobnicate"}).code == kExitConfig);
    CHECK(run({"validate", write_config(dir, base_config())}).code == 0);
    fs::remove_all(dir);
}

TEST_CASE("numerical errors exit 3") {
    fs::path dir = scratch("numerical");
    json j = json::parse(R"({
      "version": 1,
      "model": {"type": "compound",
                "frequency": {"type": "finite", "values": [0, 1], "probs": [0.7, 0.3]},
                "severity": {"type": "finite", "values": [1], "probs": [1]}},
      "stresses": [{"type": "wang", "sign": 1}],
      "risk_measures": [{"type": "VaR", "alpha": 0.9}],
      "n_scenarios": 1000,
      "bootstrap": {"B": 0}
    })");
    // T has two atoms: the quantile spacing around alpha is degenerate
    Result r = run({"sens", write_config(dir, j), "--out", (dir / "o").string()});
    CHECK(r.code == kExitNumerical);
    fs::remove_all(dir);
}

TEST_CASE("oracle: exit codes, eps grid flag, report schema") {
    fs::path dir = scratch("oracle");
    json j = json::parse(R"({
      "version": 1,
      "model": {
        "type": "loss",
        "x_marginals": [{"type": "normal", "mean": 0, "sd": 1}],
        "z_marginals": [{"type": "lognormal", "mean": 100, "cov": 1.0}],
        "default_probabilities": [0.3],
        "g": [{"type": "identity", "z": "Z1"}],
        "dependence": {"type": "pairs", "pairs": [{"a": "X1", "b": "Z1", "copula": {"type": "gaussian", "r": -0.95}}]}
      },
      "targets": [{"factor": "X1", "stress": {"type": "additive", "beta": 1}}],
      "risk_measures": [{"type": "mean"}],
      "n_scenarios": 200000,
      "seed": 5,
      "eps_grid": [0.02, 0.01],
      "delta": 0.005,
      "bootstrap": {"B": 10, "fraction": 0.9}
    })");
    std::string cfg = write_config(dir, j);
    Result ok = run({"oracle", cfg, "--out", (dir / "a").string(), "--eps-grid", "0.04", "0.02", "0.01"});
    CHECK(ok.code == kExitOk);
    CHECK(ok.out.find("PASS") != std::string::npos);
    json rep = json::parse(slurp(dir / "a" / "oracle_report.json"));
    REQUIRE(rep.size() == 1);
    FDReport fd = fd_report_from_json(rep[0]["fd"]);
    CHECK(fd.eps_grid == std::vector<double>{0.04, 0.02, 0.01});
    CHECK(to_json(fd) == rep[0]["fd"]);
    REQUIRE(fd.agreement);
    CHECK(fd.agreement->pass);

    // a wide conditioning band biases the estimate: both values are printed, exit 1
    Result bad = run({"oracle", cfg, "--out", (dir / "b").string(), "--delta", "0.29"});
    CHECK(bad.code == kExitDisagree);
    CHECK(bad.out.find("FAIL") != std::string::npos);
    CHECK(bad.out.find("estimate=") != std::string::npos);
    CHECK(bad.out.find("reference=") != std::string::npos);

    CHECK(run({"oracle", cfg, "--eps-grid", "0.01", "0.02"}).code == kExitConfig);
    fs::remove_all(dir);
}

TEST_CASE("casestudy quick runs") {
    fs::path dir = scratch("casestudy");
    Result r = run({"casestudy", "compound", "--quick", "--sweep", "skewness", "--out", dir.string()});
    REQUIRE(r.code == 0);
    json s = json::parse(slurp(dir / "compound_summary.json"));
    CHECK(std::fabs(s["scaled_freq"].get<double>() - 0.414) < 0.03);
    CHECK(std::fabs(s["scaled_sev"].get<double>() - 0.429) < 0.03);
    CHECK(fs::exists(dir / "compound_skewness.csv"));

    r = run({"casestudy", "reinsurance", "--quick", "--n-conditional", "5000", "--replicates", "4", "--out", dir.string()});
    REQUIRE(r.code == 0);
    json rs = json::parse(slurp(dir / "reinsurance_summary.json"));
    CHECK(std::fabs(rs["p_loss_positive"].get<double>() - 0.05044) < 0.003);
    CHECK(fs::exists(dir / "reinsurance_delta_sweep.csv"));
    CHECK(run({"casestudy", "mortgage"}).code == kExitConfig);
    fs::remove_all(dir);
}
