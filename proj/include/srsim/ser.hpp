#pragma once

#include <Eigen/Dense>

namespace srsim {

// Frame-energy detection of the reflector activation level.
//
// Under level q the detector sees L iid symbols y_l ~ CN(0, P_q + sigma2),
// so the frame energy W = sum_l |y_l|^2 is Erlang with shape L and rate
// lambda_q = 1 / (P_q + sigma2).  Everything here works on that family.

// Per-adjacent-pair tail terms of the analytical error bound, evaluated
// over levels sorted ascending:
//   miss[i]  = P(L, L * d_i / (P_{i+1} + sigma2))   (upper level undershoots)
//   alarm[i] = Q(L, L * d_i / (P_i     + sigma2))   (lower level overshoots)
// with half-gaps d_i = (P_{i+1} - P_i) / 2.  The bound averages both sums
// over the (Q+1) equiprobable levels.
struct BoundTerms {
  Eigen::VectorXd miss;
  Eigen::VectorXd alarm;
  double total = 0.0;
};

BoundTerms ser_bound_terms(const Eigen::VectorXd& sorted_levels, double sigma2,
                           int frame_len);

// Analytical symbol error upper bound; levels may arrive in any order
// (relabeling symbols does not change the error rate, so they are sorted
// internally).  Equal levels give exactly Q/(Q+1).
double ser_upper_bound(const Eigen::VectorXd& levels, double sigma2,
                       int frame_len);

// Exact maximum-likelihood decision boundaries on the frame energy for
// equiprobable sorted levels.  Returns Q non-decreasing thresholds b_q;
// hypothesis q wins on [b_{q-1}, b_q).  A hypothesis dominated by an
// equal or better neighbor gets an empty interval.
Eigen::VectorXd map_boundaries(const Eigen::VectorXd& sorted_levels,
                               double sigma2, int frame_len);

// Index in [0, Q] of the interval containing `energy`.
int classify_energy(double energy, const Eigen::VectorXd& boundaries);

// Exact error rate of the boundary rule above (the MAP detector), via
// Erlang CDF differences.  Reference oracle for the Monte Carlo path.
double map_ser_exact(const Eigen::VectorXd& levels, double sigma2,
                     int frame_len);

}  // namespace srsim
