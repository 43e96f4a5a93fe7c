#pragma once

namespace srsim {

// Incomplete gamma machinery for integer shape parameters.
//
// Everything is built on the closed form of the regularized upper tail at
// integer shape n >= 1:
//   Q(n, x) = exp(-x) * sum_{l=0}^{n-1} x^l / l!,   P(n, x) = 1 - Q(n, x),
// which is also the CDF complement of an Erlang(n) variable at x.  The
// unnormalized pair gamma(n,x) = (n-1)! P and Gamma(n,x) = (n-1)! Q is
// provided for callers that work with the raw integrals (overflow-prone
// for n > 170; prefer the regularized forms).

double log_factorial(int n);
double factorial(int n);

// sum_{l=0}^{n-1} y^l / l! for y >= 0 (value 0 when n <= 0).
double partial_exp_sum(int n, double y);
double log_partial_exp_sum(int n, double y);

double reg_upper_gamma(int n, double x);      // Q(n, x)
double reg_lower_gamma(int n, double x);      // P(n, x)
double log_reg_upper_gamma(int n, double x);  // log Q, finite for all x >= 0
double log_reg_lower_gamma(int n, double x);  // log P, -inf at x = 0

double upper_gamma_int(int n, double x);  // Gamma(n, x) = (n-1)! Q(n, x)
double lower_gamma_int(int n, double x);  // gamma(n, x) = (n-1)! P(n, x)

// Smallest x with Q(n, x) <= q, for q in (0, 1).  Monotone bisection on
// log Q; relative accuracy ~1e-13.
double upper_gamma_quantile(int n, double q);

}  // namespace srsim
