#include "srsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace srsim {
namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

// Accepts either "<base>_w" or "<base>_dbm" (not both).
void read_power(const nlohmann::json& j, const std::string& base, double& out) {
  const std::string w_key = base + "_w";
  const std::string dbm_key = base + "_dbm";
  const bool has_w = j.contains(w_key);
  const bool has_dbm = j.contains(dbm_key);
  if (has_w && has_dbm) fail("give only one of " + w_key + ", " + dbm_key);
  if (has_w) out = j.at(w_key).get<double>();
  if (has_dbm) out = dbm_to_watt(j.at(dbm_key).get<double>());
}

std::array<double, 2> read_pos(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) fail("positions must be [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

// Scalar broadcasts over users; array must match n_pu.
std::vector<double> read_per_pu(const nlohmann::json& j, int n_pu,
                                const std::string& key) {
  if (j.is_number()) return std::vector<double>(n_pu, j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != n_pu)
    fail(key + " must be a scalar or an array of length n_pu");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(v.get<double>());
  return out;
}

}  // namespace

std::vector<int> ScenarioConfig::resolved_ice_indices() const {
  if (!ice_indices.empty()) return ice_indices;
  std::vector<int> idx(n_ice);
  for (int i = 0; i < n_ice; ++i) idx[i] = i;
  return idx;
}

ScenarioConfig default_config() { return ScenarioConfig{}; }

void validate(const ScenarioConfig& cfg) {
  if (cfg.n_pu < 1) fail("n_pu must be >= 1");
  if (cfg.n_tx < 1) fail("n_tx must be >= 1");
  if (cfg.n_irs < 1) fail("n_irs must be >= 1");
  if (cfg.frame_len < 1) fail("frame_len must be >= 1");
  if (cfg.n_ice < 1) fail("n_ice must be >= 1");
  const int levels = cfg.n_ice + 1;
  if ((levels & (levels - 1)) != 0)
    fail("n_ice + 1 must be a power of two so symbols carry whole bits");
  if (cfg.n_ice > cfg.n_irs) fail("n_ice cannot exceed n_irs");
  if (static_cast<int>(cfg.pos_pu.size()) != cfg.n_pu)
    fail("pos_pu must list one position per user");
  if (static_cast<int>(cfg.alpha_irs_pu.size()) != cfg.n_pu)
    fail("alpha_irs_pu must have n_pu entries");
  if (static_cast<int>(cfg.rician_irs_pu.size()) != cfg.n_pu)
    fail("rician_irs_pu must have n_pu entries");
  if (!(cfg.carrier_hz > 0)) fail("carrier_hz must be positive");
  if (!(cfg.spacing_wavelengths > 0)) fail("spacing_wavelengths must be positive");
  if (!(cfg.alpha_ap_irs > 0) || !(cfg.alpha_irs_su > 0))
    fail("path loss exponents must be positive");
  for (double a : cfg.alpha_irs_pu)
    if (!(a > 0)) fail("path loss exponents must be positive");
  if (cfg.rician_ap_irs < 0 || cfg.rician_irs_su < 0)
    fail("Rician factors must be >= 0");
  for (double b : cfg.rician_irs_pu)
    if (b < 0) fail("Rician factors must be >= 0");
  if (!(cfg.p_max_w > 0)) fail("p_max_w must be positive");
  if (!(cfg.noise_pu_w > 0) || !(cfg.noise_su_w > 0))
    fail("noise powers must be positive");
  if (!(cfg.p_e_max > 0 && cfg.p_e_max < 1)) fail("p_e_max must be in (0, 1)");
  if (cfg.mc_frames < 1) fail("mc_frames must be >= 1");
  if (!cfg.ice_indices.empty()) {
    if (static_cast<int>(cfg.ice_indices.size()) != cfg.n_ice)
      fail("ice_indices must have n_ice entries");
    std::set<int> seen;
    for (int idx : cfg.ice_indices) {
      if (idx < 0 || idx >= cfg.n_irs) fail("ice_indices out of range");
      if (!seen.insert(idx).second) fail("ice_indices must be unique");
    }
  }
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
  ScenarioConfig cfg;
  if (j.contains("n_pu")) cfg.n_pu = j.at("n_pu").get<int>();
  if (j.contains("n_ice")) cfg.n_ice = j.at("n_ice").get<int>();
  if (j.contains("n_tx")) cfg.n_tx = j.at("n_tx").get<int>();
  if (j.contains("n_irs")) cfg.n_irs = j.at("n_irs").get<int>();
  if (j.contains("frame_len")) cfg.frame_len = j.at("frame_len").get<int>();
  if (j.contains("pos_ap")) cfg.pos_ap = read_pos(j.at("pos_ap"));
  if (j.contains("pos_irs")) cfg.pos_irs = read_pos(j.at("pos_irs"));
  if (j.contains("pos_su")) cfg.pos_su = read_pos(j.at("pos_su"));
  if (j.contains("pos_pu")) {
    cfg.pos_pu.clear();
    for (const auto& p : j.at("pos_pu")) cfg.pos_pu.push_back(read_pos(p));
  } else if (j.contains("n_pu")) {
    // Default geometry only fits the default user count.
    if (cfg.n_pu != 2) fail("pos_pu required when n_pu != 2");
  }
  if (j.contains("carrier_hz")) cfg.carrier_hz = j.at("carrier_hz").get<double>();
  if (j.contains("ref_gain_db")) cfg.ref_gain_db = j.at("ref_gain_db").get<double>();
  if (j.contains("spacing_wavelengths"))
    cfg.spacing_wavelengths = j.at("spacing_wavelengths").get<double>();
  if (j.contains("pathloss_exp")) {
    const auto& pl = j.at("pathloss_exp");
    if (pl.is_number()) {
      cfg.alpha_ap_irs = cfg.alpha_irs_su = pl.get<double>();
      cfg.alpha_irs_pu.assign(cfg.n_pu, pl.get<double>());
    } else {
      if (pl.contains("ap_irs")) cfg.alpha_ap_irs = pl.at("ap_irs").get<double>();
      if (pl.contains("irs_su")) cfg.alpha_irs_su = pl.at("irs_su").get<double>();
      if (pl.contains("irs_pu"))
        cfg.alpha_irs_pu = read_per_pu(pl.at("irs_pu"), cfg.n_pu, "irs_pu");
      else
        cfg.alpha_irs_pu.assign(cfg.n_pu, cfg.alpha_irs_pu.empty()
                                              ? 2.2
                                              : cfg.alpha_irs_pu.front());
    }
  }
  if (static_cast<int>(cfg.alpha_irs_pu.size()) != cfg.n_pu)
    cfg.alpha_irs_pu.assign(cfg.n_pu, cfg.alpha_irs_pu.empty()
                                          ? 2.2
                                          : cfg.alpha_irs_pu.front());
  if (j.contains("rician_k")) {
    const auto& rk = j.at("rician_k");
    if (rk.is_number()) {
      cfg.rician_ap_irs = cfg.rician_irs_su = rk.get<double>();
      cfg.rician_irs_pu.assign(cfg.n_pu, rk.get<double>());
    } else {
      if (rk.contains("ap_irs")) cfg.rician_ap_irs = rk.at("ap_irs").get<double>();
      if (rk.contains("irs_su")) cfg.rician_irs_su = rk.at("irs_su").get<double>();
      if (rk.contains("irs_pu"))
        cfg.rician_irs_pu = read_per_pu(rk.at("irs_pu"), cfg.n_pu, "irs_pu");
      else
        cfg.rician_irs_pu.assign(cfg.n_pu, cfg.rician_irs_pu.empty()
                                               ? 3.0
                                               : cfg.rician_irs_pu.front());
    }
  }
  if (static_cast<int>(cfg.rician_irs_pu.size()) != cfg.n_pu)
    cfg.rician_irs_pu.assign(cfg.n_pu, cfg.rician_irs_pu.empty()
                                           ? 3.0
                                           : cfg.rician_irs_pu.front());
  read_power(j, "p_max", cfg.p_max_w);
  read_power(j, "noise_pu", cfg.noise_pu_w);
  read_power(j, "noise_su", cfg.noise_su_w);
  if (j.contains("p_e_max")) cfg.p_e_max = j.at("p_e_max").get<double>();
  if (j.contains("rng_seed")) cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  if (j.contains("mc_frames")) cfg.mc_frames = j.at("mc_frames").get<long>();
  if (j.contains("ice_indices"))
    cfg.ice_indices = j.at("ice_indices").get<std::vector<int>>();
  validate(cfg);
  return cfg;
}

nlohmann::json config_to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["n_pu"] = cfg.n_pu;
  j["n_ice"] = cfg.n_ice;
  j["n_tx"] = cfg.n_tx;
  j["n_irs"] = cfg.n_irs;
  j["frame_len"] = cfg.frame_len;
  j["pos_ap"] = cfg.pos_ap;
  j["pos_irs"] = cfg.pos_irs;
  j["pos_su"] = cfg.pos_su;
  j["pos_pu"] = cfg.pos_pu;
  j["carrier_hz"] = cfg.carrier_hz;
  j["ref_gain_db"] = cfg.ref_gain_db;
  j["spacing_wavelengths"] = cfg.spacing_wavelengths;
  j["pathloss_exp"] = {{"ap_irs", cfg.alpha_ap_irs},
                       {"irs_su", cfg.alpha_irs_su},
                       {"irs_pu", cfg.alpha_irs_pu}};
  j["rician_k"] = {{"ap_irs", cfg.rician_ap_irs},
                   {"irs_su", cfg.rician_irs_su},
                   {"irs_pu", cfg.rician_irs_pu}};
  j["p_max_w"] = cfg.p_max_w;
  j["noise_pu_w"] = cfg.noise_pu_w;
  j["noise_su_w"] = cfg.noise_su_w;
  j["p_e_max"] = cfg.p_e_max;
  j["rng_seed"] = cfg.rng_seed;
  j["mc_frames"] = cfg.mc_frames;
  j["ice_indices"] = cfg.resolved_ice_indices();
  return j;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(path + ": " + e.what());
  }
  return config_from_json(j);
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

double path_gain(double distance_m, double alpha, double ref_gain_db) {
  const double d = std::max(distance_m, 1.0);
  return db_to_linear(ref_gain_db) * std::pow(d, -alpha);
}

}  // namespace srsim
