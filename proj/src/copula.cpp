#include "quantsens/copula.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
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

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> view(const Matrix& m) {
    return Eigen::Map<const RowMat>(m.data.data(), static_cast<Eigen::Index>(m.rows),
                                    static_cast<Eigen::Index>(m.cols));
}

Matrix from_eigen(const RowMat& e) {
    Matrix m(static_cast<std::size_t>(e.rows()), static_cast<std::size_t>(e.cols()));
    Eigen::Map<RowMat>(m.data.data(), e.rows(), e.cols()) = e;
    return m;
}

// Lower Cholesky factor, or an empty matrix when the input is not positive definite.
Matrix cholesky(const Matrix& m) {
    Eigen::LLT<RowMat> llt(view(m));
    if (llt.info() != Eigen::Success) return {};
    RowMat L = llt.matrixL();
    // LLT does not flag every semidefinite input; reject a vanishing pivot too.
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        if (!(L(i, i) > 1e-12)) return {};
    return from_eigen(L);
}

double t_scale_factor(double yi, double r, int nu) {
    return std::sqrt((nu + yi * yi) * (1 - r * r) / (nu + 1.0));
}

void check_unit(double u, const char* who) {
    if (!(u > 0.0 && u < 1.0)) {
        std::ostringstream os;
        os << who << ": probability " << u << " outside (0,1)";
        throw InvalidArgument(os.str());
    }
}

double safe_density(const DistributionSpec& d, double x, const char* which) {
    double f = pdf(d, x);
    if (!(f > 0) || !std::isfinite(f)) {
        std::ostringstream os;
        os << "psi1: " << which << " marginal density underflows at x = " << x;
        throw NumericalError(os.str());
    }
    return f;
}

}  // namespace

// ---- generators -----------------------------------------------------------

double gen_psi(const GeneratorSpec& g, double t) {
    return std::visit(overloaded{
                          [t](const Clayton& c) { return std::pow(1 + t, -1 / c.theta); },
                          [t](const Gumbel& c) { return std::exp(-std::pow(t, 1 / c.theta)); },
                      },
                      g);
}

double gen_psi_inv(const GeneratorSpec& g, double u) {
    return std::visit(overloaded{
                          [u](const Clayton& c) { return std::expm1(-c.theta * std::log(u)); },
                          [u](const Gumbel& c) { return std::pow(-std::log(u), c.theta); },
                      },
                      g);
}

double gen_psi_d1(const GeneratorSpec& g, double t) {
    return std::visit(overloaded{
                          [t](const Clayton& c) {
                              double a = 1 / c.theta;
                              return -a * std::pow(1 + t, -a - 1);
                          },
                          [t](const Gumbel& c) {
                              double a = 1 / c.theta;
                              double ta = std::pow(t, a);
                              return -a * ta / t * std::exp(-ta);
                          },
                      },
                      g);
}

double gen_psi_d2(const GeneratorSpec& g, double t) {
    return std::visit(overloaded{
                          [t](const Clayton& c) {
                              double a = 1 / c.theta;
                              return a * (a + 1) * std::pow(1 + t, -a - 2);
                          },
                          [t](const Gumbel& c) {
                              double a = 1 / c.theta;
                              double ta = std::pow(t, a);
                              return a * ta / (t * t) * std::exp(-ta) * (a * ta + 1 - a);
                          },
                      },
                      g);
}

double gen_psi_d1_inv(const GeneratorSpec& g, double y) {
    if (!(y < 0)) throw InvalidArgument("generator: psi' inverse needs a negative argument");
    if (auto c = std::get_if<Clayton>(&g)) {
        return std::pow(-c->theta * y, -c->theta / (1 + c->theta)) - 1;
    }
    const double a = 1 / std::get<Gumbel>(g).theta;
    // Solve h(w) = log a + (a-1) w - exp(a w) = log(-y) with t = exp(w); h is
    // strictly decreasing and concave.
    const double target = std::log(-y);
    auto h = [&](double w) { return std::log(a) + (a - 1) * w - std::exp(a * w); };
    double lo = -1.0, hi = 1.0;
    for (int i = 0; i < 200 && h(lo) < target; ++i) lo *= 2;
    for (int i = 0; i < 200 && h(hi) > target; ++i) hi *= 2;
    if (h(lo) < target || h(hi) > target) throw NumericalError("gumbel: could not bracket psi' inverse");
    double w = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double r = h(w) - target;
        if (r > 0) lo = w; else hi = w;
        double d = (a - 1) - a * std::exp(a * w);
        double next = w - r / d;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - w) <= 1e-13 * std::max(1.0, std::fabs(w))) return std::exp(next);
        if (hi - lo <= 1e-15 * std::max(1.0, std::fabs(w))) return std::exp(next);
        w = next;
    }
    throw NumericalError("gumbel: psi' inverse did not converge within 200 iterations");
}

// ---- bivariate copulas ------------------------------------------------------

void validate(const BivariateCopulaSpec& c) {
    std::visit(overloaded{
                   [](const GaussianCopula& g) {
                       if (!(g.r > -1 && g.r < 1)) throw InvalidArgument("gaussian copula: r must lie in (-1,1)");
                   },
                   [](const TCopula& t) {
                       if (!(t.r > -1 && t.r < 1)) throw InvalidArgument("t copula: r must lie in (-1,1)");
                       if (t.nu < 3) throw InvalidArgument("t copula: nu must be at least 3");
                   },
                   [](const Archimedean& a) {
                       std::visit(overloaded{
                                      [](const Clayton& c) {
                                          if (!(c.theta > 0) || !std::isfinite(c.theta))
                                              throw InvalidArgument("clayton: theta must be positive");
                                      },
                                      [](const Gumbel& g) {
                                          if (!(g.theta >= 1) || !std::isfinite(g.theta))
                                              throw InvalidArgument("gumbel: theta must be at least 1");
                                      },
                                  },
                                  a.generator);
                   },
               },
               c);
}

bool is_independence(const BivariateCopulaSpec& c) {
    if (auto g = std::get_if<GaussianCopula>(&c)) return g->r == 0.0;
    if (auto a = std::get_if<Archimedean>(&c))
        if (auto gu = std::get_if<Gumbel>(&a->generator)) return gu->theta == 1.0;
    return false;
}

std::string type_name(const BivariateCopulaSpec& c) {
    if (std::holds_alternative<GaussianCopula>(c)) return "gaussian";
    if (std::holds_alternative<TCopula>(c)) return "t";
    return std::holds_alternative<Clayton>(std::get<Archimedean>(c).generator) ? "clayton" : "gumbel";
}

double conditional_cdf_u(const BivariateCopulaSpec& c, double uj, double ui) {
    check_unit(ui, "conditional cdf");
    check_unit(uj, "conditional cdf");
    return std::visit(overloaded{
                          [&](const GaussianCopula& g) {
                              double yi = normal_quantile(ui), yj = normal_quantile(uj);
                              return normal_cdf((yj - g.r * yi) / std::sqrt(1 - g.r * g.r));
                          },
                          [&](const TCopula& t) {
                              double yi = student_t_quantile(ui, t.nu), yj = student_t_quantile(uj, t.nu);
                              return student_t_cdf((yj - t.r * yi) / t_scale_factor(yi, t.r, t.nu), t.nu + 1);
                          },
                          [&](const Archimedean& a) {
                              double ai = gen_psi_inv(a.generator, ui), bj = gen_psi_inv(a.generator, uj);
                              return gen_psi_d1(a.generator, ai + bj) / gen_psi_d1(a.generator, ai);
                          },
                      },
                      c);
}

double conditional_quantile_u(const BivariateCopulaSpec& c, double v, double ui) {
    check_unit(ui, "conditional quantile");
    check_unit(v, "conditional quantile");
    return std::visit(overloaded{
                          [&](const GaussianCopula& g) {
                              double yi = normal_quantile(ui);
                              return normal_cdf(g.r * yi + std::sqrt(1 - g.r * g.r) * normal_quantile(v));
                          },
                          [&](const TCopula& t) {
                              double yi = student_t_quantile(ui, t.nu);
                              double yj = t.r * yi + t_scale_factor(yi, t.r, t.nu) *
                                                         student_t_quantile(v, t.nu + 1);
                              return student_t_cdf(yj, t.nu);
                          },
                          [&](const Archimedean& a) {
                              double ai = gen_psi_inv(a.generator, ui);
                              double s = gen_psi_d1_inv(a.generator, v * gen_psi_d1(a.generator, ai));
                              return gen_psi(a.generator, std::max(s - ai, 0.0));
                          },
                      },
                      c);
}

double psi1_u(const BivariateCopulaSpec& c, double ui, double uj) {
    check_unit(ui, "psi1");
    check_unit(uj, "psi1");
    return std::visit(overloaded{
                          [&](const GaussianCopula& g) {
                              if (g.r == 0.0) return 0.0;
                              double yi = normal_quantile(ui), yj = normal_quantile(uj);
                              double di = normal_pdf(yi);
                              if (!(di > 0)) throw NumericalError("psi1: normal density underflows");
                              return g.r * normal_pdf(yj) / di;
                          },
                          [&](const TCopula& t) {
                              double yi = student_t_quantile(ui, t.nu), yj = student_t_quantile(uj, t.nu);
                              double di = student_t_pdf(yi, t.nu);
                              if (!(di > 0)) throw NumericalError("psi1: t density underflows");
                              double slope = t.r + (yi * yj - t.r * yi * yi) / (t.nu + yi * yi);
                              return slope * student_t_pdf(yj, t.nu) / di;
                          },
                          [&](const Archimedean& a) {
                              const auto& g = a.generator;
                              double ai = gen_psi_inv(g, ui), bj = gen_psi_inv(g, uj), s = ai + bj;
                              double d1a = gen_psi_d1(g, ai), d1b = gen_psi_d1(g, bj), d1s = gen_psi_d1(g, s);
                              double d2a = gen_psi_d2(g, ai), d2s = gen_psi_d2(g, s);
                              if (!(d2s > 0) || !(d1a < 0))
                                  throw NumericalError("psi1: generator derivatives underflow");
                              return d1b / d1a * (d1s * d2a / (d2s * d1a) - 1.0);
                          },
                      },
                      c);
}

double psi1(const BivariateCopulaSpec& c, double xi, double xj, const DistributionSpec& fi,
            const DistributionSpec& fj) {
    if (is_independence(c)) return 0.0;
    double ui = cdf(fi, xi), uj = cdf(fj, xj);
    double dens_i = safe_density(fi, xi, "conditioning");
    double dens_j = safe_density(fj, xj, "target");
    return psi1_u(c, ui, uj) * dens_i / dens_j;
}

double conditional_quantile(const BivariateCopulaSpec& c, double v, double xi, const DistributionSpec& fi,
                            const DistributionSpec& fj) {
    return quantile(fj, conditional_quantile_u(c, v, cdf(fi, xi)));
}

double conditional_latent(const BivariateCopulaSpec& c, double ui, double uj) {
    return std::visit(overloaded{
                          [&](const GaussianCopula& g) {
                              return (normal_quantile(uj) - g.r * normal_quantile(ui)) / std::sqrt(1 - g.r * g.r);
                          },
                          [&](const TCopula& t) {
                              double yi = student_t_quantile(ui, t.nu);
                              return (student_t_quantile(uj, t.nu) - t.r * yi) / t_scale_factor(yi, t.r, t.nu);
                          },
                          [&](const Archimedean&) { return conditional_cdf_u(c, uj, ui); },
                      },
                      c);
}

double regenerate(const BivariateCopulaSpec& c, double ui_new, double latent) {
    return std::visit(overloaded{
                          [&](const GaussianCopula& g) {
                              return normal_cdf(g.r * normal_quantile(ui_new) + std::sqrt(1 - g.r * g.r) * latent);
                          },
                          [&](const TCopula& t) {
                              double yi = student_t_quantile(ui_new, t.nu);
                              return student_t_cdf(t.r * yi + t_scale_factor(yi, t.r, t.nu) * latent, t.nu);
                          },
                          [&](const Archimedean&) { return conditional_quantile_u(c, latent, ui_new); },
                      },
                      c);
}

// ---- multivariate t -----------------------------------------------------------

void check_correlation(const Matrix& m, double tol) {
    if (m.rows == 0 || m.rows != m.cols) throw InvalidArgument("correlation matrix must be square and nonempty");
    for (std::size_t i = 0; i < m.rows; ++i) {
        if (std::fabs(m(i, i) - 1.0) > tol) throw InvalidArgument("correlation matrix must have unit diagonal");
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (!std::isfinite(m(i, j)) || std::fabs(m(i, j)) > 1.0)
                throw InvalidArgument("correlation entries must lie in [-1,1]");
            if (std::fabs(m(i, j) - m(j, i)) > tol) {
                std::ostringstream os;
                os << "correlation matrix not symmetric at (" << i + 1 << "," << j + 1 << ")";
                throw InvalidArgument(os.str());
            }
        }
    }
}

double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<RowMat> es(view(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

MultivariateTSpec make_mvt(const Matrix& sigma, int nu) {
    check_correlation(sigma);
    if (nu < 3) throw InvalidArgument("multivariate t: nu must be at least 3");
    MultivariateTSpec s;
    s.sigma = sigma;
    s.nu = nu;
    s.dimension = sigma.rows;
    s.chol = cholesky(sigma);
    if (s.chol.rows == 0) {
        std::ostringstream os;
        os << "multivariate t: correlation matrix is not positive definite (smallest eigenvalue "
           << min_eigenvalue(sigma) << ")";
        throw InvalidArgument(os.str());
    }
    return s;
}

MvtSample sample_mvt(const MultivariateTSpec& spec, std::size_t n, const SeedSpec& seed, bool keep_latents) {
    if (spec.chol.rows != spec.dimension || spec.dimension == 0)
        throw InvalidArgument("sample_mvt: spec not factorised, use make_mvt");
    const std::size_t d = spec.dimension;
    const double half_nu = 0.5 * spec.nu;
    MvtSample out;
    out.n = n;
    out.U.assign(d, std::vector<double>(n));
    out.W.resize(n);
    if (keep_latents) out.latents.assign(d, std::vector<double>(n));
    parallel_chunks(n, [&](std::size_t c, std::size_t b, std::size_t e) {
        UniformStream rng(derive_seed(seed, c));
        std::vector<double> g(d), z(d);
        for (std::size_t i = b; i < e; ++i) {
            double w = half_nu / gamma_q_inv(half_nu, rng.next());
            for (std::size_t k = 0; k < d; ++k) g[k] = normal_quantile(rng.next());
            double sw = std::sqrt(w);
            for (std::size_t k = 0; k < d; ++k) {
                double acc = 0.0;
                const double* row = &spec.chol.data[k * d];
                for (std::size_t l = 0; l <= k; ++l) acc += row[l] * g[l];
                z[k] = acc;
                out.U[k][i] = student_t_cdf(sw * acc, spec.nu);
                if (keep_latents) out.latents[k][i] = acc;
            }
            out.W[i] = w;
        }
    });
    return out;
}

MvtConditionalSampler::MvtConditionalSampler(const MultivariateTSpec& spec, std::size_t j) : spec_(&spec), j_(j) {
    const std::size_t d = spec.dimension;
    if (j >= d) throw InvalidArgument("conditional sampler: coordinate out of range");
    for (std::size_t k = 0; k < d; ++k)
        if (k != j) others_.push_back(k);
    const std::size_t q = others_.size();
    beta_.resize(q);
    Matrix schur(q, q);
    for (std::size_t a = 0; a < q; ++a) {
        beta_[a] = spec.sigma(others_[a], j);
        for (std::size_t b = 0; b < q; ++b)
            schur(a, b) = spec.sigma(others_[a], others_[b]) - spec.sigma(others_[a], j) * spec.sigma(j, others_[b]);
    }
    if (q > 0) {
        chol_ = cholesky(schur);
        if (chol_.rows == 0) throw NumericalError("conditional sampler: Schur complement not positive definite");
    }
}

double MvtConditionalSampler::draw(double uj, UniformStream& rng, std::vector<double>& u) const {
    const int nu = spec_->nu;
    const std::size_t q = others_.size();
    u.resize(spec_->dimension);
    double yj = student_t_quantile(uj, nu);
    double shape = 0.5 * (nu + 1);
    double w = 0.5 * (nu + yj * yj) / gamma_q_inv(shape, rng.next());
    double sw = std::sqrt(w);
    double zj = yj / sw;
    thread_local std::vector<double> g;
    g.resize(q);
    for (std::size_t a = 0; a < q; ++a) g[a] = normal_quantile(rng.next());
    for (std::size_t a = 0; a < q; ++a) {
        double acc = beta_[a] * zj;
        const double* row = &chol_.data[a * q];
        for (std::size_t b = 0; b <= a; ++b) acc += row[b] * g[b];
        u[others_[a]] = student_t_cdf(sw * acc, nu);
    }
    u[j_] = uj;
    return w;
}

MultivariateTSpec build_factor_sigma(const Matrix& R, double lambda, std::size_t m, int nu) {
    check_correlation(R);
    if (!(lambda > 0 && lambda < 1)) throw InvalidArgument("factor sigma: lambda must lie in (0,1)");
    const std::size_t n = R.rows;
    double beta = 0.0;
    std::vector<double> rowsum(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
            rowsum[k] += R(k, l);
            beta += R(k, l);
        }
    Matrix S(m + n, m + n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) S(i, j) = i == j ? 1.0 : lambda;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) S(m + k, m + l) = R(k, l);
    const double scale = std::sqrt(lambda / beta);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) S(i, m + k) = S(m + k, i) = scale * rowsum[k];
    return make_mvt(S, nu);
}

Matrix load_correlation_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open correlation file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        for (char& ch : line)
            if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
        if (tokens.empty()) continue;
        std::vector<double> row;
        bool numeric = true;
        for (const auto& t : tokens) {
            char* end = nullptr;
            double v = std::strtod(t.c_str(), &end);
            if (end == t.c_str() || *end != '\0') {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;  // header row
            }
            throw InvalidArgument("correlation file: non-numeric entry in " + path);
        }
        first = false;
        rows.push_back(std::move(row));
    }
    Matrix m(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size()) throw InvalidArgument("correlation file: matrix is not square: " + path);
        for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
    }
    check_correlation(m);
    return m;
}

}  // namespace qs
