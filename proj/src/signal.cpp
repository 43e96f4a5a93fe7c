#include "srsim/signal.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace srsim {
namespace {

Eigen::VectorXcd phase_vector(const Eigen::VectorXd& theta) {
  Eigen::VectorXcd v(theta.size());
  for (Eigen::Index m = 0; m < theta.size(); ++m)
    v(m) = std::polar(1.0, theta(m));
  return v;
}

}  // namespace

ActivationCodebook::ActivationCodebook(int n_irs, std::vector<int> ice_indices)
    : n_irs_(n_irs), ice_indices_(std::move(ice_indices)) {
  const int q_max = n_ice();
  masks_.reserve(q_max + 1);
  for (int level = 1; level <= q_max + 1; ++level) {
    Eigen::ArrayXd m = Eigen::ArrayXd::Ones(n_irs_);
    const int on_count = level - 1;
    for (int i = 0; i < q_max; ++i)
      m(ice_indices_[i]) = (i >= q_max - on_count) ? 1.0 : 0.0;
    masks_.push_back(std::move(m));
  }
}

int ActivationCodebook::bits_per_symbol() const {
  int bits = 0;
  for (int v = n_levels(); v > 1; v >>= 1) ++bits;
  return bits;
}

const Eigen::ArrayXd& ActivationCodebook::mask(int level) const {
  if (level < 1 || level > n_levels())
    throw std::out_of_range("codebook level out of range");
  return masks_[level - 1];
}

ActivationCodebook codebook_for(const ScenarioConfig& cfg) {
  return ActivationCodebook(cfg.n_irs, cfg.resolved_ice_indices());
}

Eigen::MatrixXcd su_cascade(const ChannelRealization& ch,
                            const Eigen::MatrixXcd& w) {
  const Eigen::MatrixXcd gw = ch.g_ap_irs * w;  // n_irs x n_beams
  return ch.h_irs_su.conjugate().asDiagonal() * gw;
}

Eigen::MatrixXcd pu_cascade(const ChannelRealization& ch,
                            const Eigen::MatrixXcd& w, int k) {
  const Eigen::MatrixXcd gw = ch.g_ap_irs * w;
  return ch.h_irs_pu.col(k).conjugate().asDiagonal() * gw;
}

Eigen::MatrixXcd su_gains(const ChannelRealization& ch,
                          const Eigen::MatrixXcd& w,
                          const Eigen::VectorXd& theta,
                          const ActivationCodebook& cb) {
  const Eigen::MatrixXcd t = su_cascade(ch, w);
  const Eigen::VectorXcd phi = phase_vector(theta);
  Eigen::MatrixXcd gains(cb.n_levels(), w.cols());
  for (int level = 1; level <= cb.n_levels(); ++level) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      std::complex<double> acc = 0.0;
      for (int m = 0; m < cb.n_irs(); ++m)
        acc += cb.mask(level)(m) * phi(m) * t(m, j);
      gains(level - 1, j) = acc;
    }
  }
  return gains;
}

Eigen::MatrixXcd pu_gains(const ChannelRealization& ch,
                          const Eigen::MatrixXcd& w,
                          const Eigen::VectorXd& theta,
                          const ActivationCodebook& cb, int k) {
  const Eigen::MatrixXcd t = pu_cascade(ch, w, k);
  const Eigen::VectorXcd phi = phase_vector(theta);
  Eigen::MatrixXcd gains(cb.n_levels(), w.cols());
  for (int level = 1; level <= cb.n_levels(); ++level) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      std::complex<double> acc = 0.0;
      for (int m = 0; m < cb.n_irs(); ++m)
        acc += cb.mask(level)(m) * phi(m) * t(m, j);
      gains(level - 1, j) = acc;
    }
  }
  return gains;
}

Eigen::VectorXd su_level_powers(const ChannelRealization& ch,
                                const Eigen::MatrixXcd& w,
                                const Eigen::VectorXd& theta,
                                const ActivationCodebook& cb) {
  const Eigen::MatrixXcd gains = su_gains(ch, w, theta, cb);
  return gains.cwiseAbs2().rowwise().sum();
}

double pu_rate_at_level(const ChannelRealization& ch, const Eigen::MatrixXcd& w,
                        const Eigen::VectorXd& theta,
                        const ActivationCodebook& cb, int level, int k,
                        double noise_w) {
  const Eigen::MatrixXcd gains = pu_gains(ch, w, theta, cb, k);
  const double sig = std::norm(gains(level - 1, k));
  double interf = 0.0;
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    if (j != k) interf += std::norm(gains(level - 1, j));
  return std::log2(1.0 + sig / (interf + noise_w));
}

double pu_rate_avg(const ChannelRealization& ch, const Eigen::MatrixXcd& w,
                   const Eigen::VectorXd& theta, const ActivationCodebook& cb,
                   int k, double noise_w) {
  const Eigen::MatrixXcd gains = pu_gains(ch, w, theta, cb, k);
  double acc = 0.0;
  for (int level = 1; level <= cb.n_levels(); ++level) {
    const double sig = std::norm(gains(level - 1, k));
    double interf = 0.0;
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      if (j != k) interf += std::norm(gains(level - 1, j));
    acc += std::log2(1.0 + sig / (interf + noise_w));
  }
  return acc / cb.n_levels();
}

double sum_rate(const ChannelRealization& ch, const Eigen::MatrixXcd& w,
                const Eigen::VectorXd& theta, const ActivationCodebook& cb,
                const std::vector<double>& noise_w) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.cols(); ++k)
    acc += pu_rate_avg(ch, w, theta, cb, static_cast<int>(k),
                       noise_w[static_cast<std::size_t>(k)]);
  return acc;
}

}  // namespace srsim
