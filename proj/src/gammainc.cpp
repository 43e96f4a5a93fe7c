#include "srsim/gammainc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace srsim {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_args(int n, double x) {
  if (n < 1) throw std::invalid_argument("integer gamma: shape must be >= 1");
  if (!(x >= 0.0)) throw std::invalid_argument("integer gamma: x must be >= 0");
}

// Cache of log l! values, grown on demand (single-threaded growth is fine;
// solver threads only read after warmup through the public API below).
double log_factorial_impl(int n) {
  static std::vector<double> table = {0.0, 0.0};
  if (n < static_cast<int>(table.size())) return table[n];
  const int old = static_cast<int>(table.size());
  table.resize(n + 1);
  for (int l = old; l <= n; ++l)
    table[l] = table[l - 1] + std::log(static_cast<double>(l));
  return table[n];
}

}  // namespace

double log_factorial(int n) {
  if (n < 0) throw std::invalid_argument("log_factorial: negative argument");
  return log_factorial_impl(n);
}

double factorial(int n) { return std::exp(log_factorial(n)); }

double partial_exp_sum(int n, double y) {
  if (n <= 0) return 0.0;
  if (y == 0.0) return 1.0;
  // Terms grow until l ~ y then decay; summed forward the relative error
  // stays at a few ulps because the largest term dominates the sum.
  double term = 1.0;
  double sum = 1.0;
  for (int l = 1; l < n; ++l) {
    term *= y / static_cast<double>(l);
    sum += term;
  }
  return sum;
}

double log_partial_exp_sum(int n, double y) {
  if (n <= 0) return kNegInf;
  if (y == 0.0) return 0.0;
  // log-sum-exp over t_l = l log y - log l!, peak at l* ~ min(y, n-1).
  const double ly = std::log(y);
  const int lstar = std::min(n - 1, static_cast<int>(y));
  const double tmax = lstar * ly - log_factorial_impl(lstar);
  double acc = 0.0;
  for (int l = 0; l < n; ++l)
    acc += std::exp(l * ly - log_factorial_impl(l) - tmax);
  return tmax + std::log(acc);
}

double log_reg_upper_gamma(int n, double x) {
  check_args(n, x);
  return -x + log_partial_exp_sum(n, x);
}

double reg_upper_gamma(int n, double x) {
  return std::exp(log_reg_upper_gamma(n, x));
}

double log_reg_lower_gamma(int n, double x) {
  check_args(n, x);
  if (x == 0.0) return kNegInf;
  if (x >= static_cast<double>(n)) {
    // Q <= Q(n, n) ~ 1/2 here, so the complement loses no precision.
    return std::log1p(-reg_upper_gamma(n, x));
  }
  // P(n, x) = e^{-x} x^n / n! * sum_{m>=0} x^m / prod_{i=1..m} (n + i),
  // a fast-converging series when x < n.
  double term = 1.0;
  double sum = 1.0;
  for (int m = 1; m < 10000; ++m) {
    term *= x / static_cast<double>(n + m);
    sum += term;
    if (term < sum * 1e-18) break;
  }
  return -x + n * std::log(x) - log_factorial_impl(n) + std::log(sum);
}

double reg_lower_gamma(int n, double x) {
  return std::exp(log_reg_lower_gamma(n, x));
}

double upper_gamma_int(int n, double x) {
  return std::exp(log_factorial(n - 1) + log_reg_upper_gamma(n, x));
}

double lower_gamma_int(int n, double x) {
  const double lp = log_reg_lower_gamma(n, x);
  return lp == kNegInf ? 0.0 : std::exp(log_factorial(n - 1) + lp);
}

double upper_gamma_quantile(int n, double q) {
  if (!(q > 0.0 && q < 1.0))
    throw std::invalid_argument("upper_gamma_quantile: q must be in (0,1)");
  const double target = std::log(q);
  double lo = 0.0;
  double hi = n + 10.0 * std::sqrt(static_cast<double>(n)) + 10.0;
  while (log_reg_upper_gamma(n, hi) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e306) return hi;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (log_reg_upper_gamma(n, mid) > target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace srsim
