#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "srsim/config.hpp"
#include "srsim/rng.hpp"

namespace srsim {

// One random draw of all propagation links.  Direct AP-user paths are
// blocked in this deployment, so everything flows through the reflector:
//   g_ap_irs   : n_irs x n_tx   AP to reflector
//   h_irs_pu   : n_irs x n_pu   reflector to served user k (column k)
//   h_irs_su   : n_irs          reflector to the detector
struct ChannelRealization {
  Eigen::MatrixXcd g_ap_irs;
  Eigen::MatrixXcd h_irs_pu;
  Eigen::VectorXcd h_irs_su;
  std::uint64_t realization = 0;
};

// Half-wavelength-style line array response; spacing in wavelengths,
// cos_angle the direction cosine along the array axis.
Eigen::VectorXcd ula_steering(int n, double spacing_wl, double cos_angle);

// Rician link draw: sqrt(gain) * (sqrt(b/(1+b)) LoS + sqrt(1/(1+b)) iid).
// Deterministic given (cfg.rng_seed, realization); all arrays lie along
// the x axis so direction cosines come straight from the geometry.
ChannelRealization synthesize_channels(const ScenarioConfig& cfg,
                                       std::uint64_t realization);

}  // namespace srsim
