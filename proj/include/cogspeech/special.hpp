#pragma once

namespace cogspeech::special {

// ln Γ(x) for x > 0, reentrant.
double log_gamma(double x);

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

// Upper tail of the chi-square distribution.
double chi_square_sf(double x, double dof);

// P(|T| >= |t|) for Student t with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);

double normal_cdf(double z);
// P(|Z| >= |z|).
double normal_two_sided(double z);

}  // namespace cogspeech::special
