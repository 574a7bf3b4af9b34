#pragma once

namespace qs {

double normal_pdf(double x);
double normal_cdf(double x);
double normal_sf(double x);  // 1 - cdf without cancellation
double normal_quantile(double p);

// Student t with nu degrees of freedom (raw, variance nu/(nu-2)).
double student_t_pdf(double x, int nu);
double student_t_cdf(double x, int nu);
double student_t_quantile(double p, int nu);

double gamma_p(double a, double x);      // regularised lower incomplete gamma
double gamma_q(double a, double x);      // regularised upper incomplete gamma
double gamma_p_inv(double a, double p);
double gamma_q_inv(double a, double q);
double gamma_pdf(double shape, double scale, double x);

}  // namespace qs
