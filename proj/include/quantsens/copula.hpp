#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "quantsens/distributions.hpp"
#include "quantsens/parallel.hpp"

namespace qs {

struct Clayton {
    double theta = 1.0;  // > 0
};
struct Gumbel {
    double theta = 1.0;  // >= 1
};
using GeneratorSpec = std::variant<Clayton, Gumbel>;

double gen_psi(const GeneratorSpec& g, double t);
double gen_psi_inv(const GeneratorSpec& g, double u);
double gen_psi_d1(const GeneratorSpec& g, double t);
double gen_psi_d2(const GeneratorSpec& g, double t);
// Inverse of the first derivative: t with psi'(t) = y, y < 0.
double gen_psi_d1_inv(const GeneratorSpec& g, double y);

struct GaussianCopula {
    double r = 0.0;
};
struct TCopula {
    double r = 0.0;
    int nu = 4;
};
struct Archimedean {
    GeneratorSpec generator;
};
using BivariateCopulaSpec = std::variant<GaussianCopula, TCopula, Archimedean>;

void validate(const BivariateCopulaSpec& c);
bool is_independence(const BivariateCopulaSpec& c);
std::string type_name(const BivariateCopulaSpec& c);

// Copula-scale pieces. All copulas here are exchangeable, so the roles of the
// two coordinates only matter through which one is conditioned on.
double conditional_cdf_u(const BivariateCopulaSpec& c, double uj, double ui);       // C_{j|i}(uj | ui)
double conditional_quantile_u(const BivariateCopulaSpec& c, double v, double ui);   // C_{j|i}^-1(v | ui)
double psi1_u(const BivariateCopulaSpec& c, double ui, double uj);                  // d uj / d ui at fixed v

// Derivative of the inverse Rosenblatt transform of (Xi, Xj) in its first argument.
double psi1(const BivariateCopulaSpec& c, double xi, double xj, const DistributionSpec& fi,
            const DistributionSpec& fj);
double conditional_quantile(const BivariateCopulaSpec& c, double v, double xi, const DistributionSpec& fi,
                            const DistributionSpec& fj);

// Conditional rank of uj given ui on a copula-specific latent scale, and the
// inverse map. regenerate(c, ui, conditional_latent(c, ui, uj)) == uj.
double conditional_latent(const BivariateCopulaSpec& c, double ui, double uj);
double regenerate(const BivariateCopulaSpec& c, double ui_new, double latent);

struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;  // row-major
    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    bool operator==(const Matrix&) const = default;
};

struct MultivariateTSpec {
    Matrix sigma;
    int nu = 4;
    std::size_t dimension = 0;
    Matrix chol;  // lower Cholesky factor, filled by make_mvt
    bool operator==(const MultivariateTSpec& o) const { return nu == o.nu && sigma == o.sigma; }
};

// Validates symmetry, unit diagonal and positive definiteness.
MultivariateTSpec make_mvt(const Matrix& sigma, int nu);
double min_eigenvalue(const Matrix& m);

struct MvtSample {
    std::size_t n = 0;
    std::vector<std::vector<double>> U;        // per coordinate
    std::vector<double> W;                     // mixing variable
    std::vector<std::vector<double>> latents;  // correlated standard normals
};

// U = t_nu(sqrt(W) * Zhat) with Zhat ~ N(0, Sigma), W ~ InvGamma(nu/2, nu/2).
MvtSample sample_mvt(const MultivariateTSpec& spec, std::size_t n, const SeedSpec& seed,
                     bool keep_latents = true);

// Draws the other coordinates of a multivariate t copula given coordinate j.
class MvtConditionalSampler {
public:
    MvtConditionalSampler(const MultivariateTSpec& spec, std::size_t j);
    // Fills u (size dimension) given u_j; consumes dimension uniforms from rng.
    // Returns the mixing variable W drawn from its conditional law.
    double draw(double uj, UniformStream& rng, std::vector<double>& u) const;

private:
    const MultivariateTSpec* spec_;
    std::size_t j_;
    std::vector<std::size_t> others_;
    std::vector<double> beta_;  // regression of the others on coordinate j
    Matrix chol_;               // Cholesky factor of the Schur complement
};

// Correlation of the joint (X, Z) vector for the factor model: X-block with
// off-diagonal lambda, Z-block R, cross entries sqrt(lambda / beta) * rowsum_k(R)
// where beta is the sum of all entries of R.
MultivariateTSpec build_factor_sigma(const Matrix& R, double lambda, std::size_t m, int nu = 4);

Matrix load_correlation_csv(const std::string& path);
void check_correlation(const Matrix& m, double tol = 1e-12);

}  // namespace qs
