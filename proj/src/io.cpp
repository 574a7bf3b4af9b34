#include "quantsens/io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qs {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string escape_pointer_token(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

template <class F>
auto wrap(const JsonReader& r, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw ConfigError(r.pointer(), e.what());
    }
}

Factor factor_at(const JsonReader& r, const std::string& key) {
    const json& v = r.at(key).raw();
    try {
        if (v.is_string()) return parse_factor(v.get<std::string>());
    } catch (const InvalidArgument& e) {
        r.fail(key, e.what());
    }
    r.fail(key, "expected a factor name such as \"Z1\"");
}

}  // namespace

// ---- JsonReader -------------------------------------------------------------------

JsonReader::JsonReader(const json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {}

std::string JsonReader::child_pointer(const std::string& key) const { return ptr_ + "/" + escape_pointer_token(key); }

void JsonReader::fail(const std::string& msg) const { throw ConfigError(ptr_, msg); }
void JsonReader::fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(child_pointer(key), msg);
}

void JsonReader::require_object() const {
    if (!j_.is_object()) fail("expected an object");
}
void JsonReader::require_array() const {
    if (!j_.is_array()) fail("expected an array");
}

bool JsonReader::has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

JsonReader JsonReader::at(const std::string& key) const {
    require_object();
    if (!j_.contains(key)) fail(key, "missing required key");
    return JsonReader(j_.at(key), child_pointer(key));
}

JsonReader JsonReader::at(std::size_t i) const {
    require_array();
    if (i >= j_.size()) fail("index out of range");
    return JsonReader(j_.at(i), ptr_ + "/" + std::to_string(i));
}

std::size_t JsonReader::size() const {
    require_array();
    return j_.size();
}

double JsonReader::as_number() const {
    if (!j_.is_number()) fail("expected a number");
    double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
}

std::string JsonReader::as_string() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
}

double JsonReader::number(const std::string& key) const { return at(key).as_number(); }
double JsonReader::number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

long JsonReader::integer(const std::string& key) const {
    JsonReader c = at(key);
    if (!c.raw().is_number_integer()) c.fail("expected an integer");
    return c.raw().get<long>();
}
long JsonReader::integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

bool JsonReader::boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    JsonReader c = at(key);
    if (!c.raw().is_boolean()) c.fail("expected true or false");
    return c.raw().get<bool>();
}

std::string JsonReader::string(const std::string& key) const { return at(key).as_string(); }
std::string JsonReader::string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
}

std::vector<double> JsonReader::numbers(const std::string& key) const {
    JsonReader c = at(key);
    std::vector<double> out;
    for (std::size_t i = 0; i < c.size(); ++i) out.push_back(c.at(i).as_number());
    return out;
}

void JsonReader::only(std::initializer_list<const char*> keys) const {
    require_object();
    for (auto it = j_.begin(); it != j_.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            if (it.key() == k) known = true;
        if (!known) fail(it.key(), "unknown key");
    }
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---- distributions ---------------------------------------------------------------

json to_json(const DistributionSpec& d) {
    return std::visit(
        overloaded{
            [](const Normal& x) { return json{{"type", "normal"}, {"mean", x.mean}, {"sd", x.sd}}; },
            [](const Uniform01&) { return json{{"type", "uniform01"}}; },
            [](const Lognormal& x) { return json{{"type", "lognormal"}, {"mu", x.mu}, {"sigma", x.sigma}}; },
            [](const StudentT& x) {
                return json{{"type", "student_t"}, {"nu", x.nu}, {"standardised", x.standardised}};
            },
            [](const Gamma& x) { return json{{"type", "gamma"}, {"shape", x.shape}, {"scale", x.scale}}; },
            [](const NegativeBinomial& x) {
                return json{{"type", "negative_binomial"},
                            {"mean", x.mean},
                            {"overdispersion", x.overdispersion},
                            {"truncation_quantile", x.truncation_quantile}};
            },
            [](const InverseGamma& x) { return json{{"type", "inverse_gamma"}, {"shape", x.shape}, {"rate", x.rate}}; },
            [](const Finite& x) { return json{{"type", "finite"}, {"values", x.values}, {"probs", x.probs}}; },
        },
        d);
}

DistributionSpec distribution_from_json(const JsonReader& r) {
    r.require_object();
    std::string type = r.string("type");
    DistributionSpec d;
    if (type == "normal") {
        r.only({"type", "mean", "sd"});
        d = Normal{r.number("mean", 0.0), r.number("sd", 1.0)};
    } else if (type == "uniform01") {
        r.only({"type"});
        d = Uniform01{};
    } else if (type == "lognormal") {
        if (r.has("cov") || r.has("mean")) {
            r.only({"type", "mean", "cov"});
            d = wrap(r, [&] { return lognormal_from_mean_cov(r.number("mean"), r.number("cov")); });
        } else {
            r.only({"type", "mu", "sigma"});
            d = Lognormal{r.number("mu"), r.number("sigma")};
        }
    } else if (type == "student_t") {
        r.only({"type", "nu", "standardised"});
        d = StudentT{static_cast<int>(r.integer("nu")), r.boolean("standardised", false)};
    } else if (type == "gamma") {
        r.only({"type", "shape", "scale"});
        d = Gamma{r.number("shape"), r.number("scale", 1.0)};
    } else if (type == "negative_binomial") {
        r.only({"type", "mean", "overdispersion", "truncation_quantile"});
        d = wrap(r, [&] {
            return make_negative_binomial(r.number("mean"), r.number("overdispersion"),
                                          r.number("truncation_quantile", 0.999));
        });
    } else if (type == "inverse_gamma") {
        r.only({"type", "shape", "rate"});
        d = InverseGamma{r.number("shape"), r.number("rate")};
    } else if (type == "finite") {
        r.only({"type", "values", "probs"});
        d = wrap(r, [&] { return make_finite(r.numbers("values"), r.numbers("probs")); });
    } else {
        r.fail("type", "unknown distribution type '" + type + "'");
    }
    wrap(r, [&] {
        validate(d);
        return 0;
    });
    return d;
}

// ---- stresses ------------------------------------------------------------------------

json to_json(const StressSpec& s) {
    return std::visit(
        overloaded{
            [](const Additive& a) { return json{{"type", "additive"}, {"beta", a.beta}}; },
            [](const Proportional& a) { return json{{"type", "proportional"}, {"beta", a.beta}}; },
            [](const Probability& a) {
                return json{{"type", "probability"}, {"beta", a.beta}, {"marginal", to_json(a.marginal)}};
            },
            [](const Mixture& m) {
                return json{{"type", "mixture"}, {"base", to_json(m.base)}, {"alternative", to_json(m.alternative)}};
            },
            [](const TailUpper& t) { return json{{"type", "tail_upper"}, {"t", t.t}}; },
            [](const TailLower& t) { return json{{"type", "tail_lower"}, {"t", t.t}}; },
            [](const Wang& w) { return json{{"type", "wang"}, {"sign", w.sign}}; },
        },
        s);
}

StressSpec stress_from_json(const JsonReader& r, const DistributionSpec* target_marginal) {
    r.require_object();
    std::string type = r.string("type");
    auto marginal_or_target = [&](const char* key) -> DistributionSpec {
        if (r.has(key)) return distribution_from_json(r.at(key));
        if (!target_marginal) r.fail(key, "missing required key");
        return *target_marginal;
    };
    auto threshold = [&]() -> double {
        if (r.has("t_quantile")) {
            if (r.has("t")) r.fail("t_quantile", "give either t or t_quantile, not both");
            if (!target_marginal) r.fail("t_quantile", "t_quantile needs a target marginal");
            double p = r.number("t_quantile");
            if (!(p > 0 && p < 1)) r.fail("t_quantile", "must lie in (0,1)");
            return quantile(*target_marginal, p);
        }
        return r.number("t");
    };
    StressSpec s;
    if (type == "additive" || type == "proportional") {
        r.only({"type", "beta"});
        double beta = r.number("beta");
        if (beta == 0) r.fail("beta", "beta must be nonzero");
        s = type == "additive" ? StressSpec{Additive{beta}} : StressSpec{Proportional{beta}};
    } else if (type == "probability") {
        r.only({"type", "beta", "marginal"});
        double beta = r.number("beta");
        if (beta == 0) r.fail("beta", "beta must be nonzero");
        s = Probability{beta, marginal_or_target("marginal")};
    } else if (type == "mixture") {
        r.only({"type", "base", "alternative"});
        s = Mixture{marginal_or_target("base"), distribution_from_json(r.at("alternative"))};
    } else if (type == "tail_upper" || type == "tail_lower") {
        r.only({"type", "t", "t_quantile"});
        double t = threshold();
        s = type == "tail_upper" ? StressSpec{TailUpper{t}} : StressSpec{TailLower{t}};
    } else if (type == "wang") {
        r.only({"type", "sign"});
        long sign = r.integer("sign", 1);
        if (sign != 1 && sign != -1) r.fail("sign", "sign must be +1 or -1");
        s = Wang{static_cast<int>(sign)};
    } else {
        r.fail("type", "unknown stress type '" + type + "'");
    }
    wrap(r, [&] {
        validate(s);
        return 0;
    });
    return s;
}

// ---- copulas and dependence -------------------------------------------------------------

json to_json(const BivariateCopulaSpec& c) {
    return std::visit(overloaded{
                          [](const GaussianCopula& g) { return json{{"type", "gaussian"}, {"r", g.r}}; },
                          [](const TCopula& t) { return json{{"type", "t"}, {"r", t.r}, {"nu", t.nu}}; },
                          [](const Archimedean& a) {
                              return std::visit(overloaded{
                                                    [](const Clayton& c) {
                                                        return json{{"type", "clayton"}, {"theta", c.theta}};
                                                    },
                                                    [](const Gumbel& g) {
                                                        return json{{"type", "gumbel"}, {"theta", g.theta}};
                                                    },
                                                },
                                                a.generator);
                          },
                      },
                      c);
}

BivariateCopulaSpec copula_from_json(const JsonReader& r) {
    r.require_object();
    std::string type = r.string("type");
    BivariateCopulaSpec c;
    if (type == "gaussian") {
        r.only({"type", "r"});
        c = GaussianCopula{r.number("r")};
    } else if (type == "t") {
        r.only({"type", "r", "nu"});
        c = TCopula{r.number("r"), static_cast<int>(r.integer("nu"))};
    } else if (type == "clayton") {
        r.only({"type", "theta"});
        c = Archimedean{Clayton{r.number("theta")}};
    } else if (type == "gumbel") {
        r.only({"type", "theta"});
        c = Archimedean{Gumbel{r.number("theta")}};
    } else {
        r.fail("type", "unknown copula type '" + type + "'");
    }
    wrap(r, [&] {
        validate(c);
        return 0;
    });
    return c;
}

json to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Matrix matrix_from_json(const JsonReader& r) {
    std::size_t n = r.size();
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        JsonReader row = r.at(i);
        if (row.size() != n) row.fail("matrix must be square");
        for (std::size_t j = 0; j < n; ++j) m(i, j) = row.at(j).as_number();
    }
    return m;
}

json to_json(const DependenceSpec& d) {
    return std::visit(overloaded{
                          [](const Independence&) { return json{{"type", "independence"}}; },
                          [](const PairCopulas& p) {
                              json pairs = json::array();
                              for (const auto& cp : p.pairs)
                                  pairs.push_back({{"a", cp.a}, {"b", cp.b}, {"copula", to_json(cp.copula)}});
                              return json{{"type", "pairs"}, {"pairs", pairs}};
                          },
                          [](const MultivariateTSpec& t) {
                              return json{{"type", "multivariate_t"}, {"nu", t.nu}, {"sigma", to_json(t.sigma)}};
                          },
                      },
                      d);
}

DependenceSpec dependence_from_json(const JsonReader& r, std::size_t m, std::size_t n, const std::string& base_dir) {
    r.require_object();
    std::string type = r.string("type");
    auto joint = [&](const JsonReader& pr, const char* key) -> std::size_t {
        const json& v = pr.at(key).raw();
        if (v.is_number_integer()) return v.get<std::size_t>();
        Factor f = factor_at(pr, key);
        std::size_t limit = f.kind == FactorKind::X ? m : n;
        if (f.index >= limit) pr.fail(key, "factor index out of range");
        return f.kind == FactorKind::X ? f.index : m + f.index;
    };
    if (type == "independence") {
        r.only({"type"});
        return Independence{};
    }
    if (type == "pairs") {
        r.only({"type", "pairs"});
        PairCopulas p;
        JsonReader arr = r.at("pairs");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            JsonReader pr = arr.at(i);
            pr.only({"a", "b", "copula"});
            p.pairs.push_back({joint(pr, "a"), joint(pr, "b"), copula_from_json(pr.at("copula"))});
        }
        return p;
    }
    if (type == "multivariate_t") {
        r.only({"type", "nu", "sigma", "sigma_csv"});
        Matrix sigma;
        if (r.has("sigma_csv")) {
            std::filesystem::path p(r.string("sigma_csv"));
            if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
            sigma = wrap(r.at("sigma_csv"), [&] { return load_correlation_csv(p.string()); });
        } else {
            sigma = matrix_from_json(r.at("sigma"));
        }
        int nu = static_cast<int>(r.integer("nu", 4));
        return wrap(r, [&] { return make_mvt(sigma, nu); });
    }
    if (type == "factor_t") {
        r.only({"type", "nu", "R", "lambda"});
        Matrix R = matrix_from_json(r.at("R"));
        int nu = static_cast<int>(r.integer("nu", 4));
        return wrap(r, [&] { return build_factor_sigma(R, r.number("lambda"), m, nu); });
    }
    r.fail("type", "unknown dependence type '" + type + "'");
}

// ---- jump functions -------------------------------------------------------------------------

json to_json(const GFunctionSpec& g) {
    return std::visit(overloaded{
                          [](const LinearG& l) {
                              return json{{"type", "linear"}, {"z", l.z_coef}, {"x", l.x_coef}, {"intercept", l.intercept}};
                          },
                          [](const LayerSumG& l) {
                              json terms = json::array();
                              for (const auto& t : l.terms)
                                  terms.push_back({{"z", factor_name({FactorKind::Z, t.z_index})}, {"s", t.s}, {"t", t.t}});
                              return json{{"type", "layer_sum"}, {"terms", terms}};
                          },
                          [](const IdentityG& i) {
                              return json{{"type", "identity"}, {"z", factor_name({FactorKind::Z, i.z_index})}};
                          },
                      },
                      g);
}

GFunctionSpec g_from_json(const JsonReader& r) {
    r.require_object();
    std::string type = r.string("type");
    auto z_index = [&](const JsonReader& tr) {
        Factor f = factor_at(tr, "z");
        if (f.kind != FactorKind::Z) tr.fail("z", "expected a Z factor");
        return f.index;
    };
    if (type == "linear") {
        r.only({"type", "z", "x", "intercept"});
        LinearG l;
        if (r.has("z")) l.z_coef = r.numbers("z");
        if (r.has("x")) l.x_coef = r.numbers("x");
        l.intercept = r.number("intercept", 0.0);
        return l;
    }
    if (type == "layer_sum") {
        r.only({"type", "terms"});
        LayerSumG l;
        JsonReader arr = r.at("terms");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            JsonReader tr = arr.at(i);
            tr.only({"z", "s", "t"});
            LayerTerm t{z_index(tr), tr.number("s"), tr.number("t")};
            if (t.s < 0) tr.fail("s", "attachment must be >= 0");
            if (!(t.t > 0)) tr.fail("t", "limit must be > 0");
            l.terms.push_back(t);
        }
        return l;
    }
    if (type == "identity") {
        r.only({"type", "z"});
        return IdentityG{z_index(r)};
    }
    r.fail("type", "unknown g type '" + type + "'");
}

// ---- models -------------------------------------------------------------------------------------

json to_json(const LossModelSpec& spec) {
    json xm = json::array(), zm = json::array(), g = json::array();
    for (const auto& d : spec.x_marginals) xm.push_back(to_json(d));
    for (const auto& d : spec.z_marginals) zm.push_back(to_json(d));
    for (const auto& gj : spec.g) g.push_back(to_json(gj));
    return json{{"type", "loss"},
                {"x_marginals", xm},
                {"z_marginals", zm},
                {"thresholds", spec.thresholds},
                {"g", g},
                {"dependence", to_json(spec.dependence)},
                {"general_mode", spec.general_mode}};
}

LossModelSpec loss_model_from_json(const JsonReader& r, const std::string& base_dir) {
    r.only({"type", "x_marginals", "z_marginals", "thresholds", "default_probabilities", "g", "dependence",
            "general_mode"});
    if (r.string("type", "loss") != "loss") r.fail("type", "expected \"loss\"");
    LossModelSpec spec;
    JsonReader xm = r.at("x_marginals"), zm = r.at("z_marginals"), g = r.at("g");
    for (std::size_t i = 0; i < xm.size(); ++i) spec.x_marginals.push_back(distribution_from_json(xm.at(i)));
    for (std::size_t i = 0; i < zm.size(); ++i) spec.z_marginals.push_back(distribution_from_json(zm.at(i)));
    for (std::size_t i = 0; i < g.size(); ++i) spec.g.push_back(g_from_json(g.at(i)));
    if (r.has("thresholds") == r.has("default_probabilities"))
        r.fail("give exactly one of thresholds or default_probabilities");
    if (r.has("thresholds")) {
        spec.thresholds = r.numbers("thresholds");
    } else {
        auto ps = r.numbers("default_probabilities");
        if (ps.size() != spec.x_marginals.size())
            r.fail("default_probabilities", "length must equal the number of X marginals");
        for (std::size_t j = 0; j < ps.size(); ++j) {
            if (!(ps[j] > 0 && ps[j] < 1)) r.at("default_probabilities").at(j).fail("must lie in (0,1)");
            spec.thresholds.push_back(quantile(spec.x_marginals[j], ps[j]));
        }
    }
    spec.general_mode = r.boolean("general_mode", false);
    if (r.has("dependence"))
        spec.dependence = dependence_from_json(r.at("dependence"), spec.m(), spec.n(), base_dir);
    wrap(r, [&] {
        validate(spec);
        return 0;
    });
    return spec;
}

json to_json(const DiscreteModelSpec& dm) {
    json h = std::visit(overloaded{
                            [](const CompoundSum&) { return json{{"type", "compound_sum"}}; },
                            [](const TabulatedH& t) { return json{{"type", "tabulated"}, {"coefficient", t.coefficient}}; },
                        },
                        dm.h);
    return json{{"type", "discrete"},
                {"support", dm.support},
                {"cdf", dm.cdf},
                {"severity", to_json(dm.severity)},
                {"aggregation", h}};
}

DiscreteModelSpec discrete_model_from_json(const JsonReader& r) {
    std::string type = r.string("type");
    DiscreteModelSpec dm;
    if (type == "compound") {
        r.only({"type", "frequency", "severity"});
        DistributionSpec freq = distribution_from_json(r.at("frequency"));
        DistributionSpec sev = distribution_from_json(r.at("severity"));
        dm = wrap(r, [&] { return make_compound_model(freq, sev); });
    } else if (type == "discrete") {
        r.only({"type", "support", "cdf", "severity", "aggregation"});
        dm.support = r.numbers("support");
        dm.cdf = r.numbers("cdf");
        dm.severity = distribution_from_json(r.at("severity"));
        if (r.has("aggregation")) {
            JsonReader a = r.at("aggregation");
            std::string at = a.string("type");
            if (at == "compound_sum") {
                a.only({"type"});
                dm.h = CompoundSum{};
            } else if (at == "tabulated") {
                a.only({"type", "coefficient"});
                dm.h = TabulatedH{a.numbers("coefficient")};
            } else {
                a.fail("type", "unknown aggregation '" + at + "'");
            }
        }
    } else {
        r.fail("type", "expected \"compound\" or \"discrete\"");
    }
    wrap(r, [&] {
        validate(dm);
        return 0;
    });
    return dm;
}

// ---- digests and scenario files ------------------------------------------------------------------

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

void write_scenarios(const std::string& csv_path, const ScenarioSet& scen) {
    std::ofstream out(csv_path);
    if (!out) throw InvalidArgument("cannot write " + csv_path);
    for (std::size_t j = 0; j < scen.m(); ++j) out << "X" << j + 1 << ",";
    for (std::size_t k = 0; k < scen.nz(); ++k) out << "Z" << k + 1 << ",";
    out << "L\n";
    std::string line;
    for (std::size_t i = 0; i < scen.n; ++i) {
        line.clear();
        for (std::size_t j = 0; j < scen.m(); ++j) (line += format_double(scen.X[j][i])) += ',';
        for (std::size_t k = 0; k < scen.nz(); ++k) (line += format_double(scen.Z[k][i])) += ',';
        line += format_double(scen.L[i]);
        line += '\n';
        out << line;
    }
    json side = {{"n", scen.n},
                 {"m", scen.m()},
                 {"n_factors", scen.nz()},
                 {"seed", scen.seed.seed},
                 {"stream", scen.seed.stream},
                 {"model_hash", scen.model_hash}};
    std::ofstream sc(csv_path + ".json");
    sc << side.dump(2) << "\n";
    if (!out || !sc) throw Error("write failed for " + csv_path);
}

ScenarioSet read_scenarios(const std::string& csv_path, const LossModelSpec& spec) {
    std::ifstream sc(csv_path + ".json");
    if (!sc) throw InvalidArgument("missing sidecar " + csv_path + ".json");
    json side;
    try {
        sc >> side;
    } catch (const json::exception& e) {
        throw InvalidArgument(csv_path + ".json: " + e.what());
    }
    ScenarioSet s;
    s.model_hash = side.at("model_hash").get<std::string>();
    if (s.model_hash != model_hash(spec)) throw InvalidArgument("scenario file was generated from a different model");
    s.seed = {side.at("seed").get<std::uint64_t>(), side.at("stream").get<std::uint64_t>()};
    std::ifstream in(csv_path);
    if (!in) throw InvalidArgument("cannot open " + csv_path);
    std::string line;
    std::getline(in, line);
    const std::size_t m = spec.m(), nz = spec.n();
    s.X.assign(m, {});
    s.Z.assign(nz, {});
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const char* p = line.c_str();
        char* end = nullptr;
        std::vector<double> vals;
        for (;;) {
            vals.push_back(std::strtod(p, &end));
            if (end == p) throw InvalidArgument("malformed number in " + csv_path);
            if (*end != ',') break;
            p = end + 1;
        }
        if (vals.size() != m + nz + 1) throw InvalidArgument("wrong column count in " + csv_path);
        for (std::size_t j = 0; j < m; ++j) s.X[j].push_back(vals[j]);
        for (std::size_t k = 0; k < nz; ++k) s.Z[k].push_back(vals[m + k]);
        s.L.push_back(vals.back());
    }
    s.n = s.L.size();
    if (s.n != side.at("n").get<std::size_t>()) throw InvalidArgument("row count does not match sidecar");
    s.aux.U.assign(m + nz, std::vector<double>(s.n));
    for (std::size_t i = 0; i < s.n; ++i) {
        for (std::size_t j = 0; j < m; ++j) s.aux.U[j][i] = cdf(spec.x_marginals[j], s.X[j][i]);
        for (std::size_t k = 0; k < nz; ++k) s.aux.U[m + k][i] = cdf(spec.z_marginals[k], s.Z[k][i]);
    }
    return s;
}

}  // namespace qs
