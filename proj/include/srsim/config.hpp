#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace srsim {

// Scenario description: geometry, fading statistics, power budget and
// run bookkeeping.  Internal units are SI (watts, meters, Hz); the JSON
// loader additionally accepts dBm fields for the power entries.
struct ScenarioConfig {
  int n_pu = 2;       // served single-antenna users
  int n_ice = 3;      // toggled reflector count (levels = n_ice + 1)
  int n_tx = 4;       // transmit antennas
  int n_irs = 30;     // reflecting elements
  int frame_len = 30; // symbols per detection frame

  std::array<double, 2> pos_ap{0.0, 0.0};
  std::array<double, 2> pos_irs{15.0, 10.0};
  std::array<double, 2> pos_su{20.0, 2.0};
  std::vector<std::array<double, 2>> pos_pu{{65.0, 2.0}, {65.0, -2.0}};

  double carrier_hz = 2.4e9;
  double ref_gain_db = -30.0;       // path gain at 1 m
  double spacing_wavelengths = 0.5; // array element pitch

  double alpha_ap_irs = 2.2;
  double alpha_irs_su = 2.2;
  std::vector<double> alpha_irs_pu{2.2, 2.2};

  double rician_ap_irs = 3.0;
  double rician_irs_su = 3.0;
  std::vector<double> rician_irs_pu{3.0, 3.0};

  double p_max_w = 1.0;      // transmit power budget
  double noise_pu_w = 1e-13; // per-user receiver noise
  double noise_su_w = 1e-13; // detector receiver noise
  double p_e_max = 0.01;     // symbol error rate target

  std::uint64_t rng_seed = 1;
  long mc_frames = 100000;

  // Which reflector indices toggle; empty means 0 .. n_ice-1.
  std::vector<int> ice_indices{};

  std::vector<int> resolved_ice_indices() const;
  int n_levels() const { return n_ice + 1; }
};

ScenarioConfig default_config();

// Throws std::invalid_argument with a field-specific message.
void validate(const ScenarioConfig& cfg);

ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_config_file(const std::string& path);

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);
double db_to_linear(double db);

double distance(const std::array<double, 2>& a, const std::array<double, 2>& b);

// C0 * d^-alpha with C0 = 10^(ref_gain_db/10); d is clamped to >= 1 m.
double path_gain(double distance_m, double alpha, double ref_gain_db);

}  // namespace srsim
