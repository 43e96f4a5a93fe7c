#include "srsim/channel.hpp"

#include <cmath>
#include <complex>

namespace srsim {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double direction_cosine(const std::array<double, 2>& from,
                        const std::array<double, 2>& to) {
  const double d = distance(from, to);
  return d > 0 ? (to[0] - from[0]) / d : 1.0;
}

// Fill order is fixed (rows inner, columns outer) so realizations do not
// depend on Eigen's storage layout.
Eigen::MatrixXcd iid_matrix(RngStream& rng, int rows, int cols) {
  Eigen::MatrixXcd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.cgaussian();
  return m;
}

Eigen::MatrixXcd rician_link(RngStream rng, double gain, double rician_k,
                             const Eigen::MatrixXcd& los) {
  const double los_w = std::sqrt(rician_k / (1.0 + rician_k));
  const double nlos_w = std::sqrt(1.0 / (1.0 + rician_k));
  Eigen::MatrixXcd nlos = iid_matrix(rng, los.rows(), los.cols());
  return std::sqrt(gain) * (los_w * los + nlos_w * nlos);
}

}  // namespace

Eigen::VectorXcd ula_steering(int n, double spacing_wl, double cos_angle) {
  Eigen::VectorXcd a(n);
  for (int m = 0; m < n; ++m) {
    const double phase = kTwoPi * spacing_wl * m * cos_angle;
    a(m) = std::polar(1.0, phase);
  }
  return a;
}

ChannelRealization synthesize_channels(const ScenarioConfig& cfg,
                                       std::uint64_t realization) {
  const RngStream base =
      RngStream(cfg.rng_seed).split("channel").split_index(realization);

  ChannelRealization ch;
  ch.realization = realization;

  {
    const double d = distance(cfg.pos_ap, cfg.pos_irs);
    const double gain = path_gain(d, cfg.alpha_ap_irs, cfg.ref_gain_db);
    const Eigen::VectorXcd rx =
        ula_steering(cfg.n_irs, cfg.spacing_wavelengths,
                     direction_cosine(cfg.pos_irs, cfg.pos_ap));
    const Eigen::VectorXcd tx =
        ula_steering(cfg.n_tx, cfg.spacing_wavelengths,
                     direction_cosine(cfg.pos_ap, cfg.pos_irs));
    ch.g_ap_irs = rician_link(base.split("ap-irs"), gain, cfg.rician_ap_irs,
                              rx * tx.adjoint());
  }

  {
    const double d = distance(cfg.pos_irs, cfg.pos_su);
    const double gain = path_gain(d, cfg.alpha_irs_su, cfg.ref_gain_db);
    const Eigen::VectorXcd los =
        ula_steering(cfg.n_irs, cfg.spacing_wavelengths,
                     direction_cosine(cfg.pos_irs, cfg.pos_su));
    ch.h_irs_su =
        rician_link(base.split("irs-su"), gain, cfg.rician_irs_su, los);
  }

  ch.h_irs_pu.resize(cfg.n_irs, cfg.n_pu);
  for (int k = 0; k < cfg.n_pu; ++k) {
    const double d = distance(cfg.pos_irs, cfg.pos_pu[k]);
    const double gain = path_gain(d, cfg.alpha_irs_pu[k], cfg.ref_gain_db);
    const Eigen::VectorXcd los =
        ula_steering(cfg.n_irs, cfg.spacing_wavelengths,
                     direction_cosine(cfg.pos_irs, cfg.pos_pu[k]));
    ch.h_irs_pu.col(k) = rician_link(base.split("irs-pu").split_index(k), gain,
                                     cfg.rician_irs_pu[k], los);
  }

  return ch;
}

}  // namespace srsim
