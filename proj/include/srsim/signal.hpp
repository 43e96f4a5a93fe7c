#pragma once

#include <vector>

#include <Eigen/Dense>

#include "srsim/channel.hpp"
#include "srsim/config.hpp"

namespace srsim {

// Thermometer activation codebook.  Level q (1-based, q = 1 .. n_ice+1)
// switches on q-1 of the toggled reflectors, filled from the back of the
// toggle list, while every non-toggled reflector stays on.  Adjacent
// levels therefore differ in exactly one element, and the level index is
// recoverable from the received power ordering alone.
class ActivationCodebook {
 public:
  ActivationCodebook(int n_irs, std::vector<int> ice_indices);

  int n_irs() const { return n_irs_; }
  int n_ice() const { return static_cast<int>(ice_indices_.size()); }
  int n_levels() const { return n_ice() + 1; }
  int bits_per_symbol() const;

  // 0/1 mask over reflector indices for a 1-based level.
  const Eigen::ArrayXd& mask(int level) const;
  const std::vector<int>& ice_indices() const { return ice_indices_; }

 private:
  int n_irs_;
  std::vector<int> ice_indices_;
  std::vector<Eigen::ArrayXd> masks_;
};

ActivationCodebook codebook_for(const ScenarioConfig& cfg);

// Per-beam reflector cascade toward the detector:
//   t_k[m] = conj(h_irs_su[m]) * (g_ap_irs * w_k)[m],
// so the received scalar for level q is sum_m mask_q[m] e^{j theta_m} t_k[m].
Eigen::MatrixXcd su_cascade(const ChannelRealization& ch,
                            const Eigen::MatrixXcd& w);

// Same cascade toward served user k and beam j.
Eigen::MatrixXcd pu_cascade(const ChannelRealization& ch,
                            const Eigen::MatrixXcd& w, int k);

// Received detector-side power of every level: levels[q-1] = P_q.
Eigen::VectorXd su_level_powers(const ChannelRealization& ch,
                                const Eigen::MatrixXcd& w,
                                const Eigen::VectorXd& theta,
                                const ActivationCodebook& cb);

// Per-user spectral efficiency under pattern `level`, and its average
// over equiprobable levels.  w columns are per-user beams.
double pu_rate_at_level(const ChannelRealization& ch, const Eigen::MatrixXcd& w,
                        const Eigen::VectorXd& theta,
                        const ActivationCodebook& cb, int level, int k,
                        double noise_w);
double pu_rate_avg(const ChannelRealization& ch, const Eigen::MatrixXcd& w,
                   const Eigen::VectorXd& theta, const ActivationCodebook& cb,
                   int k, double noise_w);
double sum_rate(const ChannelRealization& ch, const Eigen::MatrixXcd& w,
                const Eigen::VectorXd& theta, const ActivationCodebook& cb,
                const std::vector<double>& noise_w);

// Complex gains g_{k,j}(q) = sum_m mask_q[m] e^{j theta_m} conj(h_pu_k[m])
// (g_ap_irs w_j)[m]; returned as (n_levels x n_beams) for user k.
Eigen::MatrixXcd pu_gains(const ChannelRealization& ch,
                          const Eigen::MatrixXcd& w,
                          const Eigen::VectorXd& theta,
                          const ActivationCodebook& cb, int k);

// Detector-side per-beam gains per level: (n_levels x n_beams).
Eigen::MatrixXcd su_gains(const ChannelRealization& ch,
                          const Eigen::MatrixXcd& w,
                          const Eigen::VectorXd& theta,
                          const ActivationCodebook& cb);

}  // namespace srsim
