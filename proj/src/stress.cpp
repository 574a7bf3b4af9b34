#include "quantsens/stress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "quantsens/error.hpp"
#include "quantsens/special.hpp"

namespace qs {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidArgument(msg);
}

double positive_density(const DistributionSpec& d, double x, const char* who) {
    double f = pdf(d, x);
    if (!(f > 0)) {
        std::ostringstream os;
        os << who << ": zero density at x = " << x;
        throw NumericalError(os.str());
    }
    return f;
}

// Sign of G - F over the ordering grid: +1 if G <= F, -1 if G >= F, 0 if they cross.
int mixture_order(const Mixture& m) {
    std::vector<double> ps;
    ps.reserve(1003);
    ps.push_back(1e-6);
    for (int i = 0; i <= 1000; ++i) ps.push_back(std::clamp(i / 1000.0, 1e-6, 1 - 1e-6));
    ps.push_back(1 - 1e-6);
    bool below = true, above = true;
    for (double p : ps) {
        double x = quantile(m.base, p);
        double diff = cdf(m.alternative, x) - cdf(m.base, x);
        if (diff > 1e-12) below = false;
        if (diff < -1e-12) above = false;
    }
    if (below) return 1;
    if (above) return -1;
    return 0;
}

// Solves F_eps(y) = u for the mixture cdf by safeguarded Newton.
double mixture_solve(const Mixture& m, double eps, double u, double x0) {
    if (u <= 0.0 || u >= 1.0) return x0;
    auto F = [&](double y) { return (1 - eps) * cdf(m.base, y) + eps * cdf(m.alternative, y); };
    auto f = [&](double y) { return (1 - eps) * pdf(m.base, y) + eps * pdf(m.alternative, y); };
    double other = quantile(m.alternative, u);
    double lo = std::min(x0, other), hi = std::max(x0, other);
    if (F(lo) > u || F(hi) < u) {
        // The bracket follows from F_eps lying between F and G; widen defensively.
        double w = std::max(1.0, hi - lo);
        for (int i = 0; i < 200 && F(lo) > u; ++i) lo -= (w *= 2);
        w = std::max(1.0, hi - lo);
        for (int i = 0; i < 200 && F(hi) < u; ++i) hi += (w *= 2);
    }
    double y = std::clamp(x0, lo, hi);
    for (int it = 0; it < 200; ++it) {
        double r = F(y) - u;
        if (r == 0) return y;
        if (r > 0) hi = y; else lo = y;
        double d = f(y);
        double next = d > 0 ? y - r / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - y) <= 1e-15 * std::max(1.0, std::fabs(y)) || hi - lo <= 1e-15 * std::max(1.0, std::fabs(y)))
            return next;
        y = next;
    }
    throw NumericalError("mixture stress: root finding did not converge");
}

double prob_arg(double u) {
    if (!(u > 0.0 && u < 1.0)) {
        std::ostringstream os;
        os << "probability stress: shifted probability " << u << " escapes (0,1)";
        throw InvalidArgument(os.str());
    }
    return u;
}

double uniform_arg(double x, const char* who) {
    if (!(x > 0.0 && x < 1.0)) {
        std::ostringstream os;
        os << who << ": argument " << x << " outside (0,1)";
        throw InvalidArgument(os.str());
    }
    return x;
}

void check_eps(const StressSpec& s, double eps) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw InvalidArgument("stress: eps must be finite and >= 0");
    if (eps >= max_eps(s)) throw InvalidArgument("stress: eps outside the validity neighbourhood");
}

}  // namespace

void validate(const StressSpec& s) {
    std::visit(overloaded{
                   [](const Additive& a) {
                       require(a.beta != 0 && std::isfinite(a.beta), "additive stress: beta must be nonzero");
                   },
                   [](const Proportional& a) {
                       require(a.beta != 0 && std::isfinite(a.beta),
                               "proportional stress: beta must be nonzero");
                   },
                   [](const Probability& a) {
                       require(a.beta != 0 && std::isfinite(a.beta),
                               "probability stress: beta must be nonzero");
                       validate(a.marginal);
                       require(!is_discrete(a.marginal), "probability stress: marginal must be continuous");
                   },
                   [](const Mixture& m) {
                       validate(m.base);
                       validate(m.alternative);
                       require(!is_discrete(m.base) && !is_discrete(m.alternative),
                               "mixture stress: both laws must be continuous");
                       require(mixture_order(m) != 0,
                               "mixture stress: base and alternative cdfs cross, no consistent direction");
                   },
                   [](const TailUpper& t) { require(std::isfinite(t.t), "tail stress: t must be finite"); },
                   [](const TailLower& t) { require(std::isfinite(t.t), "tail stress: t must be finite"); },
                   [](const Wang& w) { require(w.sign == 1 || w.sign == -1, "wang stress: sign must be +1 or -1"); },
               },
               s);
}

double max_eps(const StressSpec& s) {
    if (auto p = std::get_if<Proportional>(&s)) return p->beta < 0 ? -1.0 / p->beta : kInf;
    if (std::holds_alternative<Mixture>(s)) return 1.0 + 1e-15;
    return kInf;
}

double apply(const StressSpec& s, double eps, double x) {
    check_eps(s, eps);
    if (eps == 0.0) return x;
    return std::visit(
        overloaded{
            [&](const Additive& a) { return x + a.beta * eps; },
            [&](const Proportional& a) { return x * (1 + a.beta * eps); },
            [&](const Probability& a) {
                return quantile(a.marginal, prob_arg(cdf(a.marginal, x) + a.beta * eps));
            },
            [&](const Mixture& m) { return mixture_solve(m, eps, cdf(m.base, x), x); },
            [&](const TailUpper& t) { return x >= t.t ? x + eps * (x - t.t) : x; },
            [&](const TailLower& t) { return x <= t.t ? x + eps * (x - t.t) : x; },
            [&](const Wang& w) {
                return normal_cdf(normal_quantile(uniform_arg(x, "wang stress")) + w.sign * eps);
            },
        },
        s);
}

double inverse_apply(const StressSpec& s, double eps, double y) {
    check_eps(s, eps);
    if (eps == 0.0) return y;
    return std::visit(
        overloaded{
            [&](const Additive& a) { return y - a.beta * eps; },
            [&](const Proportional& a) { return y / (1 + a.beta * eps); },
            [&](const Probability& a) {
                return quantile(a.marginal, prob_arg(cdf(a.marginal, y) - a.beta * eps));
            },
            [&](const Mixture& m) {
                double u = (1 - eps) * cdf(m.base, y) + eps * cdf(m.alternative, y);
                if (u <= 0.0 || u >= 1.0) return y;
                return quantile(m.base, u);
            },
            [&](const TailUpper& t) { return y >= t.t ? t.t + (y - t.t) / (1 + eps) : y; },
            [&](const TailLower& t) { return y <= t.t ? t.t + (y - t.t) / (1 + eps) : y; },
            [&](const Wang& w) {
                return normal_cdf(normal_quantile(uniform_arg(y, "wang stress")) - w.sign * eps);
            },
        },
        s);
}

double deriv_K(const StressSpec& s, double x) {
    return std::visit(
        overloaded{
            [&](const Additive& a) { return a.beta; },
            [&](const Proportional& a) { return a.beta * x; },
            [&](const Probability& a) { return a.beta / positive_density(a.marginal, x, "probability stress"); },
            [&](const Mixture& m) {
                return (cdf(m.base, x) - cdf(m.alternative, x)) / positive_density(m.base, x, "mixture stress");
            },
            [&](const TailUpper& t) { return std::max(x - t.t, 0.0); },
            [&](const TailLower& t) { return -std::max(t.t - x, 0.0); },
            [&](const Wang& w) { return w.sign * normal_pdf(normal_quantile(uniform_arg(x, "wang stress"))); },
        },
        s);
}

double deriv_Kinv(const StressSpec& s, double x) {
    return std::visit(
        overloaded{
            [&](const Additive& a) { return -a.beta; },
            [&](const Proportional& a) { return -a.beta * x; },
            [&](const Probability& a) { return -a.beta / positive_density(a.marginal, x, "probability stress"); },
            [&](const Mixture& m) {
                return (cdf(m.alternative, x) - cdf(m.base, x)) / positive_density(m.base, x, "mixture stress");
            },
            [&](const TailUpper& t) { return -std::max(x - t.t, 0.0); },
            [&](const TailLower& t) { return std::max(t.t - x, 0.0); },
            [&](const Wang& w) { return -w.sign * normal_pdf(normal_quantile(uniform_arg(x, "wang stress"))); },
        },
        s);
}

int direction(const StressSpec& s) {
    return std::visit(overloaded{
                          [](const Additive& a) { return a.beta > 0 ? 1 : -1; },
                          [](const Proportional& a) { return a.beta > 0 ? 1 : -1; },
                          [](const Probability& a) { return a.beta > 0 ? 1 : -1; },
                          [](const Mixture& m) {
                              int o = mixture_order(m);
                              if (o == 0)
                                  throw InvalidArgument("mixture stress: cdfs cross, no consistent direction");
                              return o;
                          },
                          [](const TailUpper&) { return 1; },
                          [](const TailLower&) { return -1; },
                          [](const Wang& w) { return w.sign; },
                      },
                      s);
}

std::string type_name(const StressSpec& s) {
    static const char* names[] = {"additive", "proportional", "probability", "mixture",
                                  "tail_upper", "tail_lower", "wang"};
    return names[s.index()];
}

const DistributionSpec* bound_marginal(const StressSpec& s) {
    if (auto p = std::get_if<Probability>(&s)) return &p->marginal;
    if (auto m = std::get_if<Mixture>(&s)) return &m->base;
    return nullptr;
}

AxiomReport check_axioms(const StressSpec& s, const std::vector<double>& xs, double eps0) {
    AxiomReport rep;
    auto fail = [&](const std::string& what, double x) {
        rep.ok = false;
        if (rep.failures.size() < 20) {
            std::ostringstream os;
            os << what << " at x = " << x;
            rep.failures.push_back(os.str());
        }
    };
    try {
        validate(s);
    } catch (const Error& e) {
        rep.ok = false;
        rep.failures.push_back(e.what());
        return rep;
    }
    const int c = direction(s);
    const double eps_grid[] = {eps0, eps0 / 2, eps0 / 4, eps0 / 10, eps0 / 100};
    // Three-level Richardson on forward quotients: error O(h^3).
    auto richardson = [](auto&& g, double h) {
        double d1 = g(h), d2 = g(h / 2), d4 = g(h / 4);
        double r12 = 2 * d2 - d1, r24 = 2 * d4 - d2;
        return (4 * r24 - r12) / 3;
    };
    for (double x : xs) {
        double prev_gap = kInf;
        for (double eps : eps_grid) {
            double y = apply(s, eps, x);
            double back = inverse_apply(s, eps, y);
            double rt = std::fabs(back - x) / std::max(1.0, std::fabs(x));
            rep.max_roundtrip_error = std::max(rep.max_roundtrip_error, rt);
            if (rt > 1e-9) fail("inverse round trip", x);
            double fwd = apply(s, eps, inverse_apply(s, eps, x));
            if (std::fabs(fwd - x) > 1e-9 * std::max(1.0, std::fabs(x))) fail("forward round trip", x);
            double gap = y - x;
            if (gap != 0 && (gap > 0 ? 1 : -1) != c) {
                ++rep.sign_violations;
                fail("direction sign", x);
            }
            if (std::fabs(gap) > prev_gap * (1 + 1e-9) + 1e-15) fail("eps -> 0 limit not monotone", x);
            prev_gap = std::fabs(gap);
        }
        double h = eps0 * 1e-2;
        double K = deriv_K(s, x);
        double Kfd = richardson([&](double e) { return (apply(s, e, x) - x) / e; }, h);
        double kerr = std::fabs(K - Kfd) / std::max(std::fabs(K), 1e-3);
        rep.max_K_error = std::max(rep.max_K_error, kerr);
        if (kerr > 1e-6) fail("K vs eps-difference", x);
        double Ki = deriv_Kinv(s, x);
        double Kifd = richardson([&](double e) { return (inverse_apply(s, e, x) - x) / e; }, h);
        double kierr = std::fabs(Ki - Kifd) / std::max(std::fabs(Ki), 1e-3);
        rep.max_Kinv_error = std::max(rep.max_Kinv_error, kierr);
        if (kierr > 1e-6) fail("Kinv vs eps-difference", x);
    }
    return rep;
}

}  // namespace qs
