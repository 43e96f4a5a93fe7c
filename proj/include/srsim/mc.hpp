#pragma once

#include <vector>

#include <Eigen/Dense>

#include "srsim/rng.hpp"

namespace srsim {

struct SerEstimate {
  double ser = 0.0;
  double std_err = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  long frames = 0;
  long errors = 0;
};

struct KsResult {
  double statistic = 0.0;
  double critical = 0.0;  // asymptotic threshold at the chosen alpha
  double alpha = 0.0;
  bool pass = false;
};

// One frame of the detector-side superposition: L symbols of
//   y_l = sum_j gains[j] x_j(l) + n_l,   x, n iid CN(0, .)
// returning W = sum_l |y_l|^2.  Draw order: per symbol, the beams in
// order then the noise sample.
double simulate_frame_energy(RngStream& rng, const Eigen::VectorXcd& gains,
                             double sigma2, int frame_len);

// n independent frame energies under a fixed activation level.
std::vector<double> simulate_energies(RngStream& rng,
                                      const Eigen::VectorXcd& gains,
                                      double sigma2, int frame_len, long n);

// Monte Carlo symbol error rate of the exact-boundary detector fed by
// honest per-symbol draws.  `gains` has one row per level, one column per
// beam.  Hypotheses cycle deterministically over frames.
SerEstimate estimate_ser(RngStream& rng, const Eigen::MatrixXcd& gains,
                         double sigma2, int frame_len, long n_frames);

// Level-power-only convenience: each level becomes a single equivalent
// beam of gain sqrt(P_q), which leaves the energy distribution unchanged.
Eigen::MatrixXcd gains_from_levels(const Eigen::VectorXd& levels);

// Two-sided 95% Wilson interval bookkeeping for an error count.
SerEstimate wilson_interval(long errors, long frames);

// Kolmogorov-Smirnov distance of `samples` against the Erlang CDF with
// the given shape and rate, tested at significance `alpha` using the
// asymptotic critical value sqrt(-log(alpha/2)/2)/sqrt(n).
KsResult erlang_gof_ks(std::vector<double> samples, int shape, double rate,
                       double alpha = 0.01);

}  // namespace srsim
