#include "quantsens/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "quantsens/error.hpp"
#include "quantsens/io.hpp"
#include "quantsens/special.hpp"

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

constexpr double kCumTol = 1e-9;

void check_band(double alpha, const BandSpec& band) {
    require(band.delta > 0 && band.delta < 0.5, "band delta must lie in (0, 0.5)");
    require(alpha - band.delta > 0 && alpha + band.delta < 1,
            "band (alpha - delta, alpha + delta) must lie inside (0,1)");
}

// Losses in ascending order; bootstrap weights of the base set are indexed by
// sorted position, which is legitimate because resampling is uniform.
struct SortedLoss {
    std::vector<std::uint32_t> order;
    std::vector<double> L;

    explicit SortedLoss(const std::vector<double>& v) : order(v.size()) {
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return v[a] < v[b]; });
        L.resize(v.size());
        for (std::size_t p = 0; p < v.size(); ++p) L[p] = v[order[p]];
    }
    std::size_t size() const { return L.size(); }
    std::size_t upper(double x) const { return std::upper_bound(L.begin(), L.end(), x) - L.begin(); }
    std::size_t lower(double x) const { return std::lower_bound(L.begin(), L.end(), x) - L.begin(); }
};

// Left quantiles of the weighted sample at ascending levels.
void weighted_quantiles(const std::vector<double>& sorted, const Weights& w, double total, const double* levels,
                        std::size_t k, double* out) {
    std::size_t next = 0;
    double cum = 0.0;
    for (std::size_t p = 0; p < sorted.size() && next < k; ++p) {
        if (w[p] == 0.0) continue;
        cum += w[p];
        while (next < k && cum >= levels[next] * total - kCumTol) out[next++] = sorted[p];
    }
    while (next < k) out[next++] = sorted.back();
}

enum class Cond { Band, Tail, All };

Cond cond_of(const RiskMeasureSpec& rm) {
    if (std::holds_alternative<VaR>(rm)) return Cond::Band;
    if (std::holds_alternative<ES>(rm)) return Cond::Tail;
    return Cond::All;
}

// Quantities of the weighted base sample shared by every term of a replicate.
struct QuantInfo {
    double total = 0, q = 0, q_lo = 0, q_hi = 0, f_hat = 0;
    std::size_t begin = 0, end = 0;  // sorted positions of the L-conditioning event
    double mass = 0;                 // weight inside it
};

QuantInfo quant_info(const SortedLoss& sl, const Weights& w, Cond cond, double alpha, double delta) {
    QuantInfo qi;
    for (double x : w) qi.total += x;
    if (cond == Cond::Band) {
        double lv[3] = {alpha - delta, alpha, alpha + delta}, out[3];
        weighted_quantiles(sl.L, w, qi.total, lv, 3, out);
        qi.q_lo = out[0];
        qi.q = out[1];
        qi.q_hi = out[2];
        if (!(qi.q_hi > qi.q_lo))
            throw NumericalError("degenerate quantile spacing around alpha (ties in L); widen the band");
        qi.f_hat = 2 * delta / (qi.q_hi - qi.q_lo);
        qi.begin = sl.upper(qi.q_lo);
        qi.end = sl.upper(qi.q_hi);
    } else if (cond == Cond::Tail) {
        weighted_quantiles(sl.L, w, qi.total, &alpha, 1, &qi.q);
        qi.begin = sl.lower(qi.q);
        qi.end = sl.size();
    } else {
        qi.begin = 0;
        qi.end = sl.size();
    }
    for (std::size_t p = qi.begin; p < qi.end; ++p) qi.mass += w[p];
    if (!(qi.mass > 0)) throw NumericalError("empty conditioning event for L");
    return qi;
}

double weighted_es(const SortedLoss& sl, const Weights& w, double alpha) {
    double total = 0;
    for (double x : w) total += x;
    double q;
    weighted_quantiles(sl.L, w, total, &alpha, 1, &q);
    double s = 0;
    for (std::size_t p = sl.upper(q); p < sl.size(); ++p) s += w[p] * (sl.L[p] - q);
    return q + s / ((1 - alpha) * total);
}

// Sum over j of d g_j / d(wrt) on defaulted terms.
double dsum(const LossModelSpec& spec, const double* x, const double* z, const Factor& wrt) {
    double s = 0;
    for (std::size_t j = 0; j < spec.m(); ++j)
        if (x[j] <= spec.thresholds[j]) s += partial_g(spec.g[j], z, x, wrt);
    return s;
}

// ---- sensitivity plans -----------------------------------------------------------------------

struct ContinuousTerm {
    std::size_t slot = 0;
    std::vector<double> a;  // integrand at sorted positions [floor_pos, n)
};

struct IndicatorTerm {
    std::size_t slot = 0;
    std::size_t dataset = 0;
    double f_d = 0;  // f_j(d_j)
    int c = 1;
    std::vector<double> Ls, g, w;  // side-of-boundary loss, g_j, K^-1 * Psi_1
};

struct Plan {
    RiskMeasureSpec rm;
    Cond cond = Cond::All;
    double alpha = 0;
    std::size_t floor_pos = 0;
    bool cascade = false;
    std::vector<Factor> slots;
    std::vector<ContinuousTerm> cont;
    std::vector<IndicatorTerm> ind;
    std::map<std::string, double> diagnostics;
    std::size_t n_cond_rows = 0;
};

struct Context {
    const ScenarioSet& base;
    const ConditionalSets& cond;
    const LossModelSpec& spec;
    const SortedLoss& sl;
    double delta;
    std::map<std::size_t, std::size_t> dataset_of;  // X index -> dataset id
    std::vector<const ScenarioSet*> datasets;
};

std::size_t dataset_for(Context& ctx, std::size_t j) {
    auto it = ctx.dataset_of.find(j);
    if (it != ctx.dataset_of.end()) return it->second;
    auto cs = ctx.cond.find(j);
    if (cs == ctx.cond.end())
        throw InvalidArgument("missing conditional scenarios for " + factor_name({FactorKind::X, j}));
    const ScenarioSet& s = cs->second;
    check_scenarios(s, ctx.spec);
    require(s.conditioning && s.conditioning->j == j,
            "conditional scenarios for " + factor_name({FactorKind::X, j}) + " are not conditioned on it");
    ctx.datasets.push_back(&s);
    return ctx.dataset_of[j] = ctx.datasets.size();  // 0 is the base set
}

std::size_t slot_for(Plan& plan, const Factor& f) {
    for (std::size_t s = 0; s < plan.slots.size(); ++s)
        if (plan.slots[s] == f) return s;
    plan.slots.push_back(f);
    return plan.slots.size() - 1;
}

// Integrand over the base rows at or above the floor; psi is only evaluated
// where the rest of the integrand is nonzero.
template <class Fn>
void add_continuous(Plan& plan, const Context& ctx, const Factor& slot, Fn&& integrand) {
    ContinuousTerm t;
    t.slot = slot_for(plan, slot);
    const std::size_t n = ctx.sl.size();
    t.a.assign(n - plan.floor_pos, 0.0);
    std::vector<double> x, z;
    bool any = false;
    for (std::size_t p = plan.floor_pos; p < n; ++p) {
        ctx.base.row(ctx.sl.order[p], x, z);
        double v = integrand(x.data(), z.data());
        t.a[p - plan.floor_pos] = v;
        any = any || v != 0.0;
    }
    if (any) plan.cont.push_back(std::move(t));
}

void add_indicator(Plan& plan, Context& ctx, const Factor& slot, std::size_t j, int c,
                   const std::function<double(const double*, const double*)>& weight) {
    IndicatorTerm t;
    t.slot = slot_for(plan, slot);
    t.dataset = dataset_for(ctx, j);
    t.c = c;
    t.f_d = pdf(ctx.spec.x_marginals[j], ctx.spec.thresholds[j]);
    const ScenarioSet& s = *ctx.datasets[t.dataset - 1];
    t.Ls.resize(s.n);
    t.g.resize(s.n);
    t.w.resize(s.n);
    std::vector<double> x, z;
    for (std::size_t r = 0; r < s.n; ++r) {
        s.row(r, x, z);
        double gj = evaluate_g(ctx.spec.g[j], z.data(), x.data());
        double others = 0;
        for (std::size_t l = 0; l < ctx.spec.m(); ++l)
            if (l != j && x[l] <= ctx.spec.thresholds[l]) others += evaluate_g(ctx.spec.g[l], z.data(), x.data());
        t.Ls[r] = c > 0 ? others + gj : others;
        t.g[r] = gj;
        t.w[r] = weight(x.data(), z.data());
    }
    plan.n_cond_rows += s.n;
    plan.ind.push_back(std::move(t));
}

// c(kappa; j) from the sign of Psi_1 on the conditional sample of X_j.
int resolve_direction(const std::string& label, int dir, const std::vector<double>& kinv, const std::vector<double>& psi,
                      std::map<std::string, double>& diag) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t r = 0; r < psi.size(); ++r) {
        if (kinv[r] == 0.0 || psi[r] == 0.0) continue;
        (psi[r] > 0 ? pos : neg) += 1;
    }
    std::size_t used = pos + neg;
    if (used == 0) {
        diag["c_" + label] = dir;
        return dir;
    }
    double agree = static_cast<double>(std::max(pos, neg)) / used;
    diag["sign_agreement_" + label] = agree;
    if (agree < 0.999) {
        std::ostringstream os;
        os << "direction of the cascade effect on " << label << " is not constant: only " << 100 * agree
           << "% of conditional scenarios share the sign of the Rosenblatt derivative (need 99.9%)";
        throw AssumptionViolation(os.str());
    }
    int c = dir * (pos >= neg ? 1 : -1);
    diag["c_" + label] = c;
    return c;
}

Plan build_plan(Context& ctx, const SensitivityRequest& req) {
    const LossModelSpec& spec = ctx.spec;
    check_stress_target(spec, req.target, req.stress);
    validate(req.rm);
    Plan plan;
    plan.rm = req.rm;
    plan.cond = cond_of(req.rm);
    plan.alpha = level(req.rm);
    plan.cascade = req.mode == StressMode::Cascade;
    if (plan.cond == Cond::Band) check_band(plan.alpha, BandSpec{ctx.delta});

    // Rows far below the L-conditioning event never enter it in any replicate.
    double floor_level = 0;
    if (plan.cond == Cond::Band) floor_level = std::max(0.0, plan.alpha - ctx.delta - 0.02);
    if (plan.cond == Cond::Tail) floor_level = std::max(0.0, plan.alpha - 0.02);
    if (floor_level > 0) {
        Weights ones(ctx.sl.size(), 1.0);
        double qf;
        weighted_quantiles(ctx.sl.L, ones, ctx.sl.size(), &floor_level, 1, &qf);
        plan.floor_pos = ctx.sl.lower(qf);
    }

    const std::size_t m = spec.m(), n = spec.n();
    const Factor target = req.target;
    const std::size_t c_joint = spec.joint_index(target);
    const DistributionSpec& ft = spec.marginal(target);
    const StressSpec& stress = req.stress;
    const int dir = direction(stress);
    const bool is_x = target.kind == FactorKind::X;
    auto tval = [&](const double* x, const double* z) { return is_x ? x[target.index] : z[target.index]; };
    slot_for(plan, target);

    // continuous factors
    for (std::size_t k = 0; k < m + n; ++k) {
        const Factor f = k < m ? Factor{FactorKind::X, k} : Factor{FactorKind::Z, k - m};
        const bool self = k == c_joint;
        if (f.kind == FactorKind::X && !spec.general_mode) continue;
        if (!self && !plan.cascade) continue;
        BivariateCopulaSpec pc = self ? BivariateCopulaSpec{GaussianCopula{0}} : pair_copula(spec, c_joint, k);
        if (!self && is_independence(pc)) continue;
        const DistributionSpec& fk = spec.marginal(f);
        add_continuous(plan, ctx, f, [&](const double* x, const double* z) {
            double d = dsum(spec, x, z, f);
            if (d == 0.0) return 0.0;
            double t = tval(x, z);
            double kk = deriv_K(stress, t);
            if (kk == 0.0) return 0.0;
            double psi = self ? 1.0 : psi1(pc, t, f.kind == FactorKind::X ? x[f.index] : z[f.index], ft, fk);
            return kk * psi * d;
        });
    }

    // indicator terms
    for (std::size_t j = 0; j < m; ++j) {
        const Factor f{FactorKind::X, j};
        const bool self = is_x && j == target.index;
        if (!self && !plan.cascade) continue;
        if (self) {
            const double kinv = deriv_Kinv(stress, spec.thresholds[j]);
            add_indicator(plan, ctx, f, j, dir, [kinv](const double*, const double*) { return kinv; });
            continue;
        }
        BivariateCopulaSpec pc = pair_copula(spec, c_joint, j);
        if (is_independence(pc)) continue;
        const ScenarioSet& s = *ctx.datasets[dataset_for(ctx, j) - 1];
        std::vector<double> kinv(s.n), psi(s.n);
        std::vector<double> x, z;
        for (std::size_t r = 0; r < s.n; ++r) {
            s.row(r, x, z);
            double t = tval(x.data(), z.data());
            kinv[r] = deriv_Kinv(stress, t);
            psi[r] = kinv[r] == 0.0 ? 0.0 : psi1(pc, t, x[j], ft, spec.x_marginals[j]);
        }
        int c = resolve_direction(factor_name(f), dir, kinv, psi, plan.diagnostics);
        std::size_t r = 0;
        add_indicator(plan, ctx, f, j, c, [&](const double*, const double*) {
            double v = kinv[r] * psi[r];
            ++r;
            return v;
        });
    }
    return plan;
}

// Values of one plan on a replicate: total then one entry per slot.
void evaluate_plan(const Plan& plan, const QuantInfo& qi, const std::vector<Weights>& w, std::vector<double>& out) {
    std::vector<double> slot(plan.slots.size(), 0.0);
    const Weights& wb = w[0];
    if (!plan.cont.empty() && qi.begin < plan.floor_pos)
        throw NumericalError("conditioning event fell below the precomputed floor");
    for (const auto& t : plan.cont) {
        // compensated: the sum runs in loss order, and callers compare it with tail averages taken in row order
        double s = 0, comp = 0;
        for (std::size_t p = qi.begin; p < qi.end; ++p) {
            double v = wb[p] * t.a[p - plan.floor_pos], u = s + v;
            comp += std::fabs(s) >= std::fabs(v) ? (s - u) + v : (v - u) + s;
            s = u;
        }
        slot[t.slot] += (s + comp) / qi.mass;
    }
    const double alpha = plan.alpha;
    for (const auto& t : plan.ind) {
        const Weights& wd = w[t.dataset];
        double s = 0, tot = 0;
        const double q = qi.q;
        for (std::size_t r = 0; r < t.Ls.size(); ++r) {
            tot += wd[r];
            if (wd[r] == 0.0 || t.w[r] == 0.0) continue;
            double phi;
            if (plan.cond == Cond::Band)
                phi = (t.Ls[r] <= q + t.c * t.g[r] ? 1.0 : 0.0) - (t.Ls[r] <= q ? 1.0 : 0.0);
            else if (plan.cond == Cond::Tail)
                phi = std::max(t.Ls[r] - t.c * t.g[r] - q, 0.0) - std::max(t.Ls[r] - q, 0.0);
            else
                phi = t.g[r];
            s += wd[r] * t.w[r] * phi;
        }
        if (!(tot > 0)) throw NumericalError("empty conditional sample");
        s /= tot;
        double v;
        if (plan.cond == Cond::Band) v = t.c * t.f_d / qi.f_hat * s;
        else if (plan.cond == Cond::Tail) v = -t.c * t.f_d / (1 - alpha) * s;
        else v = t.f_d * s;
        slot[t.slot] += v;
    }
    double total = 0;
    for (double v : slot) total += v;
    out.push_back(total);
    out.insert(out.end(), slot.begin(), slot.end());
}

}  // namespace

// ---- risk measures ----------------------------------------------------------------------------

void validate(const RiskMeasureSpec& rm) {
    std::visit(overloaded{
                   [](const VaR& v) { require(v.alpha > 0 && v.alpha < 1, "VaR level alpha must lie in (0,1)"); },
                   [](const ES& e) { require(e.alpha >= 0 && e.alpha < 1, "ES level alpha must lie in [0,1)"); },
                   [](const Mean&) {},
               },
               rm);
}

std::string type_name(const RiskMeasureSpec& rm) {
    return std::visit(overloaded{[](const VaR&) { return "VaR"; }, [](const ES&) { return "ES"; },
                                 [](const Mean&) { return "mean"; }},
                      rm);
}

double level(const RiskMeasureSpec& rm) {
    return std::visit(overloaded{[](const VaR& v) { return v.alpha; }, [](const ES& e) { return e.alpha; },
                                 [](const Mean&) { return 0.0; }},
                      rm);
}

double risk_measure(const std::vector<double>& L, const RiskMeasureSpec& rm) {
    require(!L.empty(), "risk measure of an empty sample");
    validate(rm);
    const std::size_t n = L.size();
    auto order_stat = [&](double alpha) {
        auto k = static_cast<std::size_t>(std::ceil(alpha * n - kCumTol));
        k = std::clamp<std::size_t>(k, 1, n);
        std::vector<double> v(L);
        std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
        return v[k - 1];
    };
    return std::visit(overloaded{
                          [&](const VaR& v) { return order_stat(v.alpha); },
                          [&](const ES& e) {
                              double q = order_stat(e.alpha);
                              double s = 0;
                              for (double l : L) s += std::max(l - q, 0.0);
                              return q + s / (n * (1 - e.alpha));
                          },
                          [&](const Mean&) { return std::accumulate(L.begin(), L.end(), 0.0) / n; },
                      },
                      rm);
}

double risk_measure(const ScenarioSet& scen, const RiskMeasureSpec& rm) { return risk_measure(scen.L, rm); }

double density_at_quantile(const std::vector<double>& L, double alpha, const BandSpec& band) {
    check_band(alpha, band);
    double lo = risk_measure(L, VaR{alpha - band.delta});
    double hi = risk_measure(L, VaR{alpha + band.delta});
    if (!(hi > lo)) throw NumericalError("degenerate quantile spacing around alpha (ties in L)");
    return 2 * band.delta / (hi - lo);
}

// ---- conditional scenarios -----------------------------------------------------------------------

ScenarioSet conditional_scenarios(const LossModelSpec& spec, std::size_t j, const BandSpec& band, std::size_t n,
                                  const SeedSpec& seed) {
    validate(spec);
    require(j < spec.m(), "conditioning index out of range");
    require(n > 0, "conditional_scenarios: need at least one scenario");
    require(band.delta > 0, "band delta must be positive");
    const double p = cdf(spec.x_marginals[j], spec.thresholds[j]);
    if (!(p - band.delta >= 0 && p + band.delta <= 1))
        throw InvalidArgument("conditioning band around F(d) = " + format_double(p) + " leaves [0,1]");
    const std::size_t m = spec.m(), d = m + spec.n();

    ScenarioSet s;
    s.n = n;
    s.seed = seed;
    s.model_hash = model_hash(spec);
    s.conditioning = ConditioningInfo{j, p, band.delta, n, n};
    s.aux.U.assign(d, std::vector<double>(n));
    const auto* mvt = std::get_if<MultivariateTSpec>(&spec.dependence);
    const auto* pairs = std::get_if<PairCopulas>(&spec.dependence);
    if (mvt) s.aux.W.resize(n);
    std::optional<MvtConditionalSampler> sampler;
    if (mvt) sampler.emplace(*mvt, j);

    parallel_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) {
        UniformStream rng(derive_seed(seed, c));
        std::vector<double> u(d);
        for (std::size_t i = b; i < e; ++i) {
            double uj = p - band.delta + 2 * band.delta * rng.next();
            uj = std::min(std::max(uj, 1e-300), 1.0 - 0x1p-53);
            if (sampler) {
                s.aux.W[i] = sampler->draw(uj, rng, u);
                u[j] = uj;
            } else {
                for (std::size_t k = 0; k < d; ++k) u[k] = rng.next();
                u[j] = uj;
                if (pairs) {
                    for (const auto& cp : pairs->pairs) {
                        if (cp.a == j) u[cp.b] = conditional_quantile_u(cp.copula, u[cp.b], uj);
                        else if (cp.b == j) u[cp.a] = conditional_quantile_u(cp.copula, u[cp.a], uj);
                        else u[cp.b] = conditional_quantile_u(cp.copula, u[cp.b], u[cp.a]);
                    }
                }
            }
            for (std::size_t k = 0; k < d; ++k) s.aux.U[k][i] = u[k];
        }
    });

    s.X.assign(m, std::vector<double>(n));
    s.Z.assign(spec.n(), std::vector<double>(n));
    s.L.assign(n, 0.0);
    parallel_chunks(n, [&](std::size_t, std::size_t b, std::size_t e) {
        std::vector<double> x(m), z(spec.n());
        for (std::size_t i = b; i < e; ++i) {
            for (std::size_t k = 0; k < d; ++k) {
                double& u = s.aux.U[k][i];
                u = std::min(std::max(u, 1e-300), 1.0 - 0x1p-53);
                if (k < m) x[k] = s.X[k][i] = quantile(spec.x_marginals[k], u);
                else z[k - m] = s.Z[k - m][i] = quantile(spec.z_marginals[k - m], u);
            }
            s.L[i] = evaluate_loss(spec, x.data(), z.data());
        }
    });
    return s;
}

std::vector<std::size_t> required_conditioning(const LossModelSpec& spec, const Factor& target, StressMode mode) {
    check_factor(spec, target);
    std::vector<std::size_t> js;
    const std::size_t c = spec.joint_index(target);
    for (std::size_t j = 0; j < spec.m(); ++j) {
        bool self = target.kind == FactorKind::X && j == target.index;
        if (self || (mode == StressMode::Cascade && !is_independence(pair_copula(spec, c, j)))) js.push_back(j);
    }
    return js;
}

ConditionalSets make_conditional_sets(const LossModelSpec& spec, const std::vector<std::size_t>& js,
                                      const BandSpec& band, std::size_t n, const SeedSpec& seed) {
    ConditionalSets out;
    for (std::size_t j : js)
        if (!out.count(j)) out.emplace(j, conditional_scenarios(spec, j, band, n, substream(seed, j + 1)));
    return out;
}

// ---- continuous-model sensitivities -----------------------------------------------------------------

std::vector<SensitivityEstimate> sensitivities(const ScenarioSet& scen, const ConditionalSets& cond,
                                               const LossModelSpec& spec,
                                               const std::vector<SensitivityRequest>& requests,
                                               const BandSpec& band, const BootstrapSpec& boot) {
    check_scenarios(scen, spec);
    require(band.delta > 0 && band.delta < 0.5, "band delta must lie in (0, 0.5)");
    SortedLoss sl(scen.L);
    Context ctx{scen, cond, spec, sl, band.delta, {}, {}};
    std::vector<Plan> plans;
    for (const auto& r : requests) plans.push_back(build_plan(ctx, r));

    std::vector<std::size_t> sizes{scen.n};
    for (const ScenarioSet* s : ctx.datasets) sizes.push_back(s->n);

    MultiStatistic stat = [&](const std::vector<Weights>& w) {
        std::map<std::pair<int, double>, QuantInfo> cache;
        std::vector<double> out;
        for (const auto& p : plans) {
            auto key = std::make_pair(static_cast<int>(p.cond), p.alpha);
            auto it = cache.find(key);
            if (it == cache.end()) it = cache.emplace(key, quant_info(sl, w[0], p.cond, p.alpha, band.delta)).first;
            evaluate_plan(p, it->second, w, out);
        }
        return out;
    };
    std::vector<BootstrapSummary> sums = bootstrap_multi(sizes, stat, boot);

    Weights ones(scen.n, 1.0);
    std::vector<SensitivityEstimate> est;
    std::size_t at = 0;
    for (const auto& p : plans) {
        SensitivityEstimate e;
        const BootstrapSummary& tot = sums[at];
        e.std_error = tot.std_error;
        e.n_bootstrap = tot.n_bootstrap;
        e.diagnostics = p.diagnostics;
        e.diagnostics["bootstrap_failed"] = static_cast<double>(tot.n_failed);
        e.diagnostics["full_sample"] = tot.full_sample;
        QuantInfo qi = quant_info(sl, ones, p.cond, p.alpha, band.delta);
        if (p.cond == Cond::Band) {
            e.diagnostics["f_hat"] = qi.f_hat;
            e.diagnostics["q_alpha"] = qi.q;
        } else if (p.cond == Cond::Tail) {
            e.diagnostics["q_alpha"] = qi.q;
        }
        e.diagnostics["n_conditional"] = static_cast<double>(p.n_cond_rows);
        e.n_effective = p.cont.empty() && !p.ind.empty() ? p.n_cond_rows : static_cast<std::size_t>(qi.mass);
        if (p.cascade) {
            double sum = 0;
            for (std::size_t s = 0; s < p.slots.size(); ++s) {
                double v = sums[at + 1 + s].value;
                e.decomposition.emplace_back(factor_name(p.slots[s]), v);
                sum += v;
            }
            e.value = sum;
        } else {
            e.value = tot.value;
        }
        e.ci_low = std::min(tot.ci_low, e.value);
        e.ci_high = std::max(tot.ci_high, e.value);
        at += 1 + p.slots.size();
        est.push_back(std::move(e));
    }
    return est;
}

SensitivityEstimate marginal_sens(const ScenarioSet& scen, const ConditionalSets& cond, const LossModelSpec& spec,
                                  const Factor& target, const StressSpec& stress, const RiskMeasureSpec& rm,
                                  const BandSpec& band, const BootstrapSpec& boot) {
    return sensitivities(scen, cond, spec, {{target, stress, rm, StressMode::Marginal}}, band, boot).front();
}

SensitivityEstimate cascade_sens(const ScenarioSet& scen, const ConditionalSets& cond, const LossModelSpec& spec,
                                 const Factor& target, const StressSpec& stress, const RiskMeasureSpec& rm,
                                 const BandSpec& band, const BootstrapSpec& boot) {
    return sensitivities(scen, cond, spec, {{target, stress, rm, StressMode::Cascade}}, band, boot).front();
}

// ---- discrete input -------------------------------------------------------------------------------

namespace {

void check_discrete(const DiscreteScenarioSet& ds, const DiscreteModelSpec& dm) {
    require(ds.n > 0, "empty discrete scenario set");
    require(ds.model_hash == model_hash(dm), "discrete scenarios were generated from a different model");
}

SensitivityEstimate from_summary(const std::vector<BootstrapSummary>& s) {
    SensitivityEstimate e;
    e.value = s[0].value;
    e.std_error = s[0].std_error;
    e.ci_low = s[0].ci_low;
    e.ci_high = s[0].ci_high;
    e.n_bootstrap = s[0].n_bootstrap;
    e.diagnostics["bootstrap_failed"] = static_cast<double>(s[0].n_failed);
    e.diagnostics["full_sample"] = s[0].full_sample;
    return e;
}

}  // namespace

SensitivityEstimate discrete_sens(const DiscreteScenarioSet& ds, const DiscreteModelSpec& dm,
                                  const StressSpec& stress, const RiskMeasureSpec& rm, const BandSpec& band,
                                  const BootstrapSpec& boot) {
    check_discrete(ds, dm);
    validate(stress);
    validate(rm);
    require(!std::holds_alternative<Mean>(rm), "discrete sensitivity: risk measure must be VaR or ES");
    const Cond cond = cond_of(rm);
    const double alpha = level(rm);
    if (cond == Cond::Band) check_band(alpha, band);
    const std::size_t r = dm.support.size();
    const int c = direction(stress);

    // weights K^-1(p_k); the last support point has no boundary above it
    std::vector<double> kinv(r, 0.0);
    for (std::size_t k = 0; k + 1 < r; ++k) kinv[k] = deriv_Kinv(stress, dm.cdf[k]);

    // side values: T on the pre-stress side and after the jump across p_k
    SortedLoss sl(ds.T);
    std::vector<double> before(ds.n), after(ds.n);
    std::vector<std::uint32_t> kk(ds.n);
    for (std::size_t p = 0; p < ds.n; ++p) {
        std::size_t i = sl.order[p];
        std::size_t k = ds.k[i];
        kk[p] = static_cast<std::uint32_t>(k);
        if (k + 1 >= r) continue;
        double hk = ds.T[i], hk1 = aggregate(dm, k + 1, ds.y_row(i));
        before[p] = c > 0 ? hk : hk1;
        after[p] = c > 0 ? hk1 : hk;
    }
    std::size_t n_eff = 0;
    for (std::size_t i = 0; i < ds.n; ++i) n_eff += ds.k[i] + 1 < r && kinv[ds.k[i]] != 0.0;

    MultiStatistic stat = [&](const std::vector<Weights>& w) {
        QuantInfo qi = quant_info(sl, w[0], cond, alpha, band.delta);
        std::vector<double> sum(r, 0.0), mass(r, 0.0);
        for (std::size_t p = 0; p < ds.n; ++p) {
            const double wp = w[0][p];
            if (wp == 0.0) continue;
            const std::size_t k = kk[p];
            mass[k] += wp;
            if (k + 1 >= r || kinv[k] == 0.0) continue;
            // T - c Delta_k h is the value after the jump
            double phi = cond == Cond::Band ? (after[p] <= qi.q ? 1.0 : 0.0) - (before[p] <= qi.q ? 1.0 : 0.0)
                                            : std::max(after[p] - qi.q, 0.0) - std::max(before[p] - qi.q, 0.0);
            sum[k] += wp * phi;
        }
        double v = 0;
        for (std::size_t k = 0; k + 1 < r; ++k) {
            if (kinv[k] == 0.0) continue;
            if (!(mass[k] > 0))
                throw NumericalError("support value w = " + format_double(dm.support[k]) + " has no simulated mass");
            v += kinv[k] * sum[k] / mass[k];
        }
        v *= cond == Cond::Band ? c / qi.f_hat : -c / (1 - alpha);
        return std::vector<double>{v};
    };
    SensitivityEstimate e = from_summary(bootstrap_multi({ds.n}, stat, boot));
    e.n_effective = n_eff;
    e.diagnostics["c"] = c;
    Weights ones(ds.n, 1.0);
    QuantInfo qi = quant_info(sl, ones, cond, alpha, band.delta);
    e.diagnostics["q_alpha"] = qi.q;
    if (cond == Cond::Band) e.diagnostics["f_hat"] = qi.f_hat;
    return e;
}

namespace {

void check_compound(const DiscreteModelSpec& cm, double alpha) {
    require(std::holds_alternative<CompoundSum>(cm.h), "compound sensitivity needs a compound-sum model");
    require(cm.support.front() == 0, "compound frequency support must start at 0");
    for (std::size_t k = 0; k < cm.support.size(); ++k)
        require(cm.support[k] == static_cast<double>(k), "compound frequency support must be 0, 1, ..., d");
    require(alpha > 0 && alpha < 1, "ES level alpha must lie in (0,1)");
}

// v(p) = phi(Phi^-1(p)) / (1 - alpha), zero at p in {0, 1}
double v_weight(double p, double alpha) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return normal_pdf(normal_quantile(p)) / (1 - alpha);
}

}  // namespace

SensitivityEstimate compound_freq_sens(const DiscreteScenarioSet& ds, const DiscreteModelSpec& cm, double alpha,
                                       const BootstrapSpec& boot) {
    check_discrete(ds, cm);
    check_compound(cm, alpha);
    const std::size_t d = cm.support.size() - 1;
    // coefficient of the k-summand stop-loss, k = 1..d: v(P(W <= k-1)) - v(P(W <= k))
    std::vector<double> coef(d + 1, 0.0);
    for (std::size_t k = 1; k <= d; ++k) coef[k] = v_weight(cm.cdf[k - 1], alpha) - v_weight(cm.cdf[k], alpha);
    SortedLoss sl(ds.T);

    MultiStatistic stat = [&](const std::vector<Weights>& w) {
        double total = 0;
        for (double x : w[0]) total += x;
        double q;
        weighted_quantiles(sl.L, w[0], total, &alpha, 1, &q);
        double es = weighted_es(sl, w[0], alpha);
        // stop-loss of the partial severity sums; rows are Y draws, independent of W
        std::vector<double> sl_k(d + 1, 0.0);
        for (std::size_t p = 0; p < ds.n; ++p) {
            const double wp = w[0][p];
            if (wp == 0.0) continue;
            const double* y = ds.y_row(sl.order[p]);
            double s = 0;
            for (std::size_t k = 1; k <= d; ++k) {
                s += y[k - 1];
                if (s > q) sl_k[k] += wp * (s - q);
            }
        }
        double v = 0;
        for (std::size_t k = 1; k <= d; ++k) v += coef[k] * sl_k[k] / total;
        return std::vector<double>{v, es, es > 0 ? v / es : 0.0};
    };
    auto s = bootstrap_multi({ds.n}, stat, boot);
    SensitivityEstimate e = from_summary(s);
    e.n_effective = ds.n;
    e.diagnostics["es"] = s[1].value;
    e.diagnostics["scaled"] = s[2].value;
    e.diagnostics["scaled_stderr"] = s[2].std_error;
    return e;
}

SensitivityEstimate compound_sev_sens(const DiscreteScenarioSet& ds, const DiscreteModelSpec& cm, double alpha,
                                      const BootstrapSpec& boot) {
    check_discrete(ds, cm);
    check_compound(cm, alpha);
    SortedLoss sl(ds.T);
    // per scenario: sum over its W severities of v(U_l) / f_Y(Y_l)
    std::vector<double> a(ds.n, 0.0);
    for (std::size_t p = 0; p < ds.n; ++p) {
        std::size_t i = sl.order[p];
        const double* y = ds.y_row(i);
        const auto w = static_cast<std::size_t>(cm.support[ds.k[i]]);
        double s = 0;
        for (std::size_t l = 0; l < w; ++l) {
            double f = pdf(cm.severity, y[l]);
            if (!(f > 0)) throw NumericalError("severity density underflows at y = " + format_double(y[l]));
            s += v_weight(cdf(cm.severity, y[l]), alpha) / f;
        }
        a[p] = s;
    }
    MultiStatistic stat = [&](const std::vector<Weights>& w) {
        double total = 0;
        for (double x : w[0]) total += x;
        double q;
        weighted_quantiles(sl.L, w[0], total, &alpha, 1, &q);
        double es = weighted_es(sl, w[0], alpha);
        double v = 0;
        for (std::size_t p = sl.upper(q); p < ds.n; ++p) v += w[0][p] * a[p];
        v /= total;
        return std::vector<double>{v, es, es > 0 ? v / es : 0.0};
    };
    auto s = bootstrap_multi({ds.n}, stat, boot);
    SensitivityEstimate e = from_summary(s);
    e.n_effective = ds.n - sl.upper(risk_measure(ds.T, VaR{alpha}));
    e.diagnostics["es"] = s[1].value;
    e.diagnostics["scaled"] = s[2].value;
    e.diagnostics["scaled_stderr"] = s[2].std_error;
    return e;
}

// ---- export --------------------------------------------------------------------------------------------

void write_sensitivity_csv(const std::string& path, const std::vector<SensitivityRow>& rows) {
    std::vector<std::string> cols;
    for (const auto& r : rows)
        for (const auto& [name, v] : r.estimate.decomposition)
            if (std::find(cols.begin(), cols.end(), name) == cols.end()) cols.push_back(name);
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path);
    out << "target,rm,alpha,stress_type,value,stderr,ci_low,ci_high,n_effective";
    for (const auto& c : cols) out << ",C_" << c;
    out << "\n";
    for (const auto& r : rows) {
        const auto& e = r.estimate;
        out << r.target << "," << type_name(r.rm) << "," << format_double(level(r.rm)) << "," << r.stress_type << ","
            << format_double(e.value) << "," << format_double(e.std_error) << "," << format_double(e.ci_low) << ","
            << format_double(e.ci_high) << "," << e.n_effective;
        for (const auto& c : cols) {
            out << ",";
            for (const auto& [name, v] : e.decomposition)
                if (name == c) out << format_double(v);
        }
        out << "\n";
    }
    if (!out) throw Error("write failed for " + path);
}

}  // namespace qs
