#include "quantsens/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quantsens/error.hpp"
#include "quantsens/io.hpp"

namespace qs {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidArgument(msg);
}

// Copula uniforms can round to 0 or 1 far in the tails; keep them open.
double open_unit(double u) {
    constexpr double lo = 1e-300;
    constexpr double hi = 1.0 - 0x1p-53;
    return std::min(std::max(u, lo), hi);
}

bool is_integer(double v) { return std::isfinite(v) && v >= 0 && std::floor(v) == v; }

}  // namespace

// ---- factors and g ------------------------------------------------------------------

std::string factor_name(const Factor& f) {
    return (f.kind == FactorKind::X ? "X" : "Z") + std::to_string(f.index + 1);
}

Factor parse_factor(const std::string& name) {
    if (name.size() < 2 || (name[0] != 'X' && name[0] != 'Z'))
        throw InvalidArgument("bad factor name '" + name + "' (expected X<k> or Z<k>)");
    std::size_t k = 0;
    for (std::size_t i = 1; i < name.size(); ++i) {
        if (name[i] < '0' || name[i] > '9') throw InvalidArgument("bad factor name '" + name + "'");
        k = 10 * k + static_cast<std::size_t>(name[i] - '0');
    }
    if (k == 0) throw InvalidArgument("factor indices are 1-based: '" + name + "'");
    return {name[0] == 'X' ? FactorKind::X : FactorKind::Z, k - 1};
}

double evaluate_g(const GFunctionSpec& g, const double* z, const double* x) {
    return std::visit(overloaded{
                          [&](const LinearG& l) {
                              double v = l.intercept;
                              for (std::size_t k = 0; k < l.z_coef.size(); ++k) v += l.z_coef[k] * z[k];
                              for (std::size_t j = 0; j < l.x_coef.size(); ++j) v += l.x_coef[j] * x[j];
                              return v;
                          },
                          [&](const LayerSumG& l) {
                              double v = 0.0;
                              for (const auto& t : l.terms) v += std::min(std::max(z[t.z_index] - t.s, 0.0), t.t);
                              return v;
                          },
                          [&](const IdentityG& i) { return z[i.z_index]; },
                      },
                      g);
}

double partial_g(const GFunctionSpec& g, const double* z, const double*, const Factor& wrt) {
    return std::visit(overloaded{
                          [&](const LinearG& l) {
                              const auto& c = wrt.kind == FactorKind::Z ? l.z_coef : l.x_coef;
                              return wrt.index < c.size() ? c[wrt.index] : 0.0;
                          },
                          [&](const LayerSumG& l) {
                              if (wrt.kind != FactorKind::Z) return 0.0;
                              double v = 0.0;
                              for (const auto& t : l.terms) {
                                  double zk = z[t.z_index];
                                  if (t.z_index == wrt.index && zk > t.s && zk < t.s + t.t) v += 1.0;
                              }
                              return v;
                          },
                          [&](const IdentityG& i) {
                              return wrt.kind == FactorKind::Z && wrt.index == i.z_index ? 1.0 : 0.0;
                          },
                      },
                      g);
}

bool reads_x(const GFunctionSpec& g) {
    const auto* l = std::get_if<LinearG>(&g);
    return l && std::any_of(l->x_coef.begin(), l->x_coef.end(), [](double c) { return c != 0.0; });
}

// ---- loss model -----------------------------------------------------------------------

void validate(const LossModelSpec& spec) {
    const std::size_t m = spec.m(), n = spec.n();
    require(m > 0, "model needs at least one indicator term");
    require(spec.thresholds.size() == m, "thresholds: expected one per X marginal");
    require(spec.g.size() == m, "g: expected one jump function per X marginal");
    for (std::size_t j = 0; j < m; ++j) {
        validate(spec.x_marginals[j]);
        require(!is_discrete(spec.x_marginals[j]), "X" + std::to_string(j + 1) + ": marginal must be continuous");
        require(std::isfinite(spec.thresholds[j]), "thresholds must be finite");
    }
    for (const auto& d : spec.z_marginals) validate(d);
    for (std::size_t j = 0; j < m; ++j) {
        const std::string where = "g" + std::to_string(j + 1) + ": ";
        std::visit(overloaded{
                       [&](const LinearG& l) {
                           require(l.z_coef.size() <= n, where + "more Z coefficients than Z factors");
                           require(l.x_coef.size() <= m, where + "more X coefficients than X factors");
                           require(spec.general_mode || !reads_x(spec.g[j]),
                                   where + "X coefficients need general_mode");
                       },
                       [&](const LayerSumG& l) {
                           for (const auto& t : l.terms) {
                               require(t.z_index < n, where + "layer Z index out of range");
                               require(t.s >= 0 && std::isfinite(t.s), where + "layer attachment must be >= 0");
                               require(t.t > 0 && std::isfinite(t.t), where + "layer limit must be > 0");
                           }
                       },
                       [&](const IdentityG& i) { require(i.z_index < n, where + "Z index out of range"); },
                   },
                   spec.g[j]);
    }
    std::visit(overloaded{
                   [](const Independence&) {},
                   [&](const PairCopulas& p) {
                       std::vector<bool> used(m + n, false);
                       for (const auto& cp : p.pairs) {
                           require(cp.a < m + n && cp.b < m + n, "copula pair index out of range");
                           require(cp.a != cp.b, "copula pair must join two different coordinates");
                           require(!used[cp.a] && !used[cp.b], "copula pairs must be disjoint");
                           used[cp.a] = used[cp.b] = true;
                           validate(cp.copula);
                       }
                   },
                   [&](const MultivariateTSpec& t) {
                       require(t.dimension == m + n && t.chol.rows == m + n,
                               "multivariate t dimension must equal the number of X and Z factors");
                   },
               },
               spec.dependence);
}

void check_factor(const LossModelSpec& spec, const Factor& f) {
    std::size_t limit = f.kind == FactorKind::X ? spec.m() : spec.n();
    require(f.index < limit, "factor " + factor_name(f) + " does not exist in this model");
}

BivariateCopulaSpec pair_copula(const LossModelSpec& spec, std::size_t a, std::size_t b) {
    return std::visit(overloaded{
                          [](const Independence&) -> BivariateCopulaSpec { return GaussianCopula{0.0}; },
                          [&](const PairCopulas& p) -> BivariateCopulaSpec {
                              for (const auto& cp : p.pairs)
                                  if ((cp.a == a && cp.b == b) || (cp.a == b && cp.b == a)) return cp.copula;
                              return GaussianCopula{0.0};
                          },
                          [&](const MultivariateTSpec& t) -> BivariateCopulaSpec {
                              return TCopula{t.sigma(a, b), t.nu};
                          },
                      },
                      spec.dependence);
}

std::string model_hash(const LossModelSpec& spec) { return sha256_hex(to_json(spec).dump()); }

double evaluate_loss(const LossModelSpec& spec, const double* x, const double* z, const double* thresholds) {
    const double* d = thresholds ? thresholds : spec.thresholds.data();
    double L = 0.0;
    for (std::size_t j = 0; j < spec.m(); ++j)
        if (x[j] <= d[j]) L += evaluate_g(spec.g[j], z, x);
    return L;
}

void ScenarioSet::row(std::size_t i, std::vector<double>& x, std::vector<double>& z) const {
    x.resize(m());
    z.resize(nz());
    for (std::size_t j = 0; j < m(); ++j) x[j] = X[j][i];
    for (std::size_t k = 0; k < nz(); ++k) z[k] = Z[k][i];
}

namespace {

// Fills X, Z and L from aux.U.
void finish_from_uniforms(ScenarioSet& s, const LossModelSpec& spec) {
    const std::size_t m = spec.m(), nz = spec.n();
    s.X.assign(m, std::vector<double>(s.n));
    s.Z.assign(nz, std::vector<double>(s.n));
    s.L.assign(s.n, 0.0);
    parallel_chunks(s.n, [&](std::size_t, std::size_t b, std::size_t e) {
        std::vector<double> x(m), z(nz);
        for (std::size_t i = b; i < e; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                double& u = s.aux.U[j][i];
                u = open_unit(u);
                x[j] = s.X[j][i] = quantile(spec.x_marginals[j], u);
            }
            for (std::size_t k = 0; k < nz; ++k) {
                double& u = s.aux.U[m + k][i];
                u = open_unit(u);
                z[k] = s.Z[k][i] = quantile(spec.z_marginals[k], u);
            }
            s.L[i] = evaluate_loss(spec, x.data(), z.data());
        }
    });
}

}  // namespace

ScenarioSet simulate(const LossModelSpec& spec, std::size_t n, const SeedSpec& seed) {
    validate(spec);
    require(n > 0, "simulate: need at least one scenario");
    const std::size_t d = spec.m() + spec.n();
    ScenarioSet s;
    s.n = n;
    s.seed = seed;
    s.model_hash = model_hash(spec);
    if (const auto* t = std::get_if<MultivariateTSpec>(&spec.dependence)) {
        MvtSample ms = sample_mvt(*t, n, seed, false);
        s.aux.U = std::move(ms.U);
        s.aux.W = std::move(ms.W);
    } else {
        s.aux.U.assign(d, std::vector<double>(n));
        const auto* pairs = std::get_if<PairCopulas>(&spec.dependence);
        parallel_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) {
            UniformStream rng(derive_seed(seed, c));
            for (std::size_t i = b; i < e; ++i) {
                for (std::size_t k = 0; k < d; ++k) s.aux.U[k][i] = rng.next();
                if (!pairs) continue;
                // the second coordinate's own draw is its conditional rank
                for (const auto& cp : pairs->pairs)
                    s.aux.U[cp.b][i] = conditional_quantile_u(cp.copula, s.aux.U[cp.b][i], s.aux.U[cp.a][i]);
            }
        });
    }
    finish_from_uniforms(s, spec);
    return s;
}

void check_scenarios(const ScenarioSet& scen, const LossModelSpec& spec) {
    require(scen.m() == spec.m() && scen.nz() == spec.n(), "scenario dimensions do not match the model");
    require(scen.model_hash == model_hash(spec), "scenarios were generated from a different model (hash mismatch)");
}

void check_stress_target(const LossModelSpec& spec, const Factor& target, const StressSpec& stress) {
    check_factor(spec, target);
    if (const DistributionSpec* bm = bound_marginal(stress))
        require(*bm == spec.marginal(target),
                "stress marginal does not match the marginal of " + factor_name(target));
    if (std::holds_alternative<Wang>(stress)) {
        auto [lo, hi] = support(spec.marginal(target));
        require(lo >= 0 && hi <= 1, "wang stress needs a target supported in (0,1)");
    }
}

std::vector<double> simulate_stressed(const ScenarioSet& base, const LossModelSpec& spec, const Factor& target,
                                      const StressSpec& stress, double eps, StressMode mode) {
    check_scenarios(base, spec);
    check_stress_target(spec, target, stress);
    require(eps >= 0 && eps < max_eps(stress), "stress level eps outside the stress's validity range");
    if (eps == 0.0) return base.L;

    const std::size_t m = spec.m(), nz = spec.n(), n = base.n;
    const std::size_t c = spec.joint_index(target);
    const bool is_x = target.kind == FactorKind::X;
    // Non-general X-targets: 1{k(X) <= d} == 1{X <= k^-1(d)}, and only the indicator moves.
    std::vector<double> d_override = spec.thresholds;
    const bool use_override = is_x && !spec.general_mode;
    if (use_override) d_override[target.index] = inverse_apply(stress, eps, spec.thresholds[target.index]);

    std::vector<BivariateCopulaSpec> pcs;
    std::vector<std::size_t> linked;  // joint coordinates regenerated in cascade mode
    if (mode == StressMode::Cascade) {
        require(!base.aux.U.empty(), "cascade mode needs the base scenarios' uniforms");
        for (std::size_t k = 0; k < m + nz; ++k) {
            if (k == c) continue;
            BivariateCopulaSpec pc = pair_copula(spec, c, k);
            if (is_independence(pc)) continue;
            linked.push_back(k);
            pcs.push_back(pc);
        }
    }
    const DistributionSpec& fc = spec.marginal(target);

    std::vector<double> out(n);
    parallel_chunks(n, [&](std::size_t, std::size_t b, std::size_t e) {
        std::vector<double> x(m), z(nz);
        for (std::size_t i = b; i < e; ++i) {
            base.row(i, x, z);
            double& tv = is_x ? x[target.index] : z[target.index];
            const double orig = tv;
            if (!use_override || !linked.empty()) tv = apply(stress, eps, orig);
            if (!linked.empty()) {
                double uc = base.aux.U[c][i];
                double uc_new = open_unit(cdf(fc, tv));
                for (std::size_t q = 0; q < linked.size(); ++q) {
                    std::size_t k = linked[q];
                    double v = conditional_latent(pcs[q], uc, base.aux.U[k][i]);
                    double uk = open_unit(regenerate(pcs[q], uc_new, v));
                    if (k < m) x[k] = quantile(spec.x_marginals[k], uk);
                    else z[k - m] = quantile(spec.z_marginals[k - m], uk);
                }
            }
            if (use_override) {
                tv = orig;
                out[i] = evaluate_loss(spec, x.data(), z.data(), d_override.data());
            } else {
                out[i] = evaluate_loss(spec, x.data(), z.data());
            }
        }
    });
    return out;
}

// ---- discrete input model --------------------------------------------------------------------

void validate(const DiscreteModelSpec& dm) {
    const std::size_t r = dm.support.size();
    require(r > 0, "discrete model: empty support");
    require(dm.cdf.size() == r, "discrete model: support and cdf lengths differ");
    for (std::size_t k = 0; k < r; ++k) {
        require(std::isfinite(dm.support[k]), "discrete model: support must be finite");
        require(dm.cdf[k] > 0 && dm.cdf[k] <= 1, "discrete model: cumulative probabilities must lie in (0,1]");
        if (k > 0) {
            require(dm.support[k] > dm.support[k - 1], "discrete model: support must be strictly increasing");
            require(dm.cdf[k] > dm.cdf[k - 1], "discrete model: cumulative probabilities must be strictly increasing");
        }
    }
    require(dm.cdf.back() == 1.0, "discrete model: last cumulative probability must be 1");
    validate(dm.severity);
    std::visit(overloaded{
                   [&](const CompoundSum&) {
                       for (double w : dm.support)
                           require(is_integer(w), "compound sum: support must be nonnegative integers");
                       require(dm.support.back() <= 1e6, "compound sum: support too large");
                   },
                   [&](const TabulatedH& t) {
                       require(t.coefficient.size() == r, "tabulated h: one coefficient per support point");
                   },
               },
               dm.h);
}

std::size_t severity_slots(const DiscreteModelSpec& dm) {
    if (std::holds_alternative<CompoundSum>(dm.h)) return static_cast<std::size_t>(dm.support.back());
    return 1;
}

double aggregate(const DiscreteModelSpec& dm, std::size_t k, const double* y) {
    return std::visit(overloaded{
                          [&](const CompoundSum&) {
                              double s = 0.0;
                              const auto w = static_cast<std::size_t>(dm.support[k]);
                              for (std::size_t l = 0; l < w; ++l) s += y[l];
                              return s;
                          },
                          [&](const TabulatedH& t) { return t.coefficient[k] * y[0]; },
                      },
                      dm.h);
}

DiscreteModelSpec make_compound_model(const DistributionSpec& frequency, const DistributionSpec& severity) {
    DiscreteModelSpec dm;
    dm.severity = severity;
    dm.h = CompoundSum{};
    if (const auto* nb = std::get_if<NegativeBinomial>(&frequency)) {
        require(nb->cdf != nullptr, "negative binomial frequency not tabulated, use make_negative_binomial");
        const auto& c = *nb->cdf;
        for (std::size_t k = 0; k < c.size(); ++k) {
            dm.support.push_back(static_cast<double>(k));
            dm.cdf.push_back(c[k]);
        }
    } else if (const auto* f = std::get_if<Finite>(&frequency)) {
        dm.support = f->values;
        dm.cdf = f->cum;
    } else {
        throw InvalidArgument("compound frequency must be negative_binomial or finite");
    }
    dm.cdf.back() = 1.0;
    validate(dm);
    return dm;
}

std::string model_hash(const DiscreteModelSpec& dm) { return sha256_hex(to_json(dm).dump()); }

DiscreteScenarioSet simulate_discrete(const DiscreteModelSpec& dm, std::size_t n, const SeedSpec& seed) {
    validate(dm);
    require(n > 0, "simulate_discrete: need at least one scenario");
    DiscreteScenarioSet s;
    s.n = n;
    s.slots = severity_slots(dm);
    s.seed = seed;
    s.model_hash = model_hash(dm);
    s.U.resize(n);
    s.k.resize(n);
    s.Y.resize(n * s.slots);
    s.T.resize(n);
    parallel_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) {
        UniformStream rng(derive_seed(seed, c));
        for (std::size_t i = b; i < e; ++i) {
            double u = rng.next();
            s.U[i] = u;
            auto it = std::lower_bound(dm.cdf.begin(), dm.cdf.end(), u);
            std::size_t k = std::min<std::size_t>(it - dm.cdf.begin(), dm.cdf.size() - 1);
            s.k[i] = static_cast<std::uint32_t>(k);
            double* y = s.Y.data() + i * s.slots;
            for (std::size_t l = 0; l < s.slots; ++l) y[l] = quantile(dm.severity, rng.next());
            s.T[i] = aggregate(dm, k, y);
        }
    });
    return s;
}

}  // namespace qs
