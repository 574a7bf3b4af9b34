#include "quantsens/special.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <array>
#include <cmath>
#include <numbers>

#include "quantsens/error.hpp"

namespace qs {

namespace {

namespace bm = boost::math;
using Policy = bm::policies::policy<bm::policies::promote_double<false>>;

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

// Wichura's AS241 (PPND16), accurate to about 1e-16 before refinement.
double as241(double p) {
    double q = p - 0.5;
    double r, val;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        val = q *
              (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r +
                    67265.770927008700853) * r + 45921.953931549871457) * r +
                  13731.693765509461125) * r + 1971.5909503065514427) * r +
                133.14166789178437745) * r + 3.387132872796366608) /
              (((((((r * 5226.495278852545925 + 28729.085735721942674) * r +
                    39307.89580009271061) * r + 21213.794301586595867) * r +
                  5394.1960214247511077) * r + 687.1870074920579083) * r +
                42.313330701600911252) * r + 1.0);
        return val;
    }
    r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r +
                    0.24178072517745061177) * r + 1.27045825245236838258) * r +
                  3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r +
                    0.0151986665636164571966) * r + 0.14810397642748007459) * r +
                  0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r +
                    0.0012426609473880784386) * r + 0.026532189526576123093) * r +
                  0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r +
                    1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
                  0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return q < 0 ? -val : val;
}

// t(4) upper tail for y >= 0: (1-s)^2 (2+s) / 4 with s = y / sqrt(y^2+4).
double t4_sf(double y) {
    double h = std::sqrt(y * y + 4.0);
    double one_minus_s = 4.0 / (h * (h + y));
    double s = y / h;
    return one_minus_s * one_minus_s * (2.0 + s) * 0.25;
}

double t4_pdf(double x) {
    double b = 1.0 + 0.25 * x * x;
    return 0.375 / (b * b * std::sqrt(b));
}

double t4_quantile(double p) {
    double tail = p < 0.5 ? p : 1.0 - p;
    if (tail == 0.5) return 0.0;
    double a = 4.0 * tail * (1.0 - tail);
    double sa = std::sqrt(a);
    double q = std::cos(std::acos(sa) / 3.0) / sa;
    double y = 2.0 * std::sqrt(std::fmax(q - 1.0, 0.0));
    for (int it = 0; it < 3; ++it) {
        double step = (t4_sf(y) - tail) / t4_pdf(y);
        y += step;
        if (std::fabs(step) <= 1e-15 * (1.0 + y)) break;
    }
    return p < 0.5 ? -y : y;
}

double t_log_norm_const(int nu) {
    static const std::array<double, 65> table = [] {
        std::array<double, 65> t{};
        for (int v = 1; v < 65; ++v)
            t[v] = std::lgamma(0.5 * (v + 1)) - std::lgamma(0.5 * v) -
                   0.5 * std::log(v * std::numbers::pi);
        return t;
    }();
    if (nu < 65) return table[nu];
    return std::lgamma(0.5 * (nu + 1)) - std::lgamma(0.5 * nu) -
           0.5 * std::log(nu * std::numbers::pi);
}

template <class F>
double guarded(F&& f) {
    try {
        return f();
    } catch (const std::domain_error& e) {
        throw InvalidArgument(e.what());
    } catch (const std::overflow_error& e) {
        throw NumericalError(e.what());
    } catch (const boost::math::evaluation_error& e) {
        throw NumericalError(e.what());
    }
}

}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5); }

double normal_sf(double x) { return 0.5 * std::erfc(x * std::numbers::sqrt2 * 0.5); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw InvalidArgument("normal quantile: probability must lie in (0,1)");
    double x = as241(p);
    // One Halley step, always on the smaller tail so the residual keeps its digits.
    double e = x <= 0 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
    double d = normal_pdf(x);
    if (d > 0) {
        double u = e / d;
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double student_t_pdf(double x, int nu) {
    if (nu == 4) return t4_pdf(x);
    return std::exp(t_log_norm_const(nu) - 0.5 * (nu + 1) * std::log1p(x * x / nu));
}

double student_t_cdf(double x, int nu) {
    if (std::isnan(x)) throw InvalidArgument("t cdf: NaN argument");
    if (nu == 4) return x >= 0 ? 1.0 - t4_sf(x) : t4_sf(-x);
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return guarded([&] { return bm::cdf(bm::students_t_distribution<double, Policy>(nu), x); });
}

double student_t_quantile(double p, int nu) {
    if (!(p > 0.0 && p < 1.0))
        throw InvalidArgument("t quantile: probability must lie in (0,1)");
    if (nu == 4) return t4_quantile(p);
    return guarded(
        [&] { return bm::quantile(bm::students_t_distribution<double, Policy>(nu), p); });
}

double gamma_p(double a, double x) {
    if (x <= 0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return guarded([&] { return bm::gamma_p(a, x, Policy()); });
}

double gamma_q(double a, double x) {
    if (x <= 0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return guarded([&] { return bm::gamma_q(a, x, Policy()); });
}

double gamma_p_inv(double a, double p) {
    return guarded([&] { return bm::gamma_p_inv(a, p, Policy()); });
}

double gamma_q_inv(double a, double q) {
    return guarded([&] { return bm::gamma_q_inv(a, q, Policy()); });
}

double gamma_pdf(double shape, double scale, double x) {
    if (x < 0) return 0.0;
    if (x == 0) return shape == 1.0 ? 1.0 / scale : (shape < 1.0 ? INFINITY : 0.0);
    return guarded([&] { return bm::gamma_p_derivative(shape, x / scale, Policy()) / scale; });
}

}  // namespace qs
