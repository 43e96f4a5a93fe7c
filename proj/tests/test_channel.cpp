#include <cmath>
#include <complex>

#include <doctest.h>

#include "srsim/channel.hpp"

using namespace srsim;

TEST_CASE("steering vector has unit-modulus entries and correct phases") {
  const Eigen::VectorXcd a = ula_steering(8, 0.5, 0.6);
  REQUIRE(a.size() == 8);
  for (int m = 0; m < 8; ++m) {
    CHECK(std::abs(a(m)) == doctest::Approx(1.0).epsilon(1e-14));
    const double expected = 2.0 * M_PI * 0.5 * m * 0.6;
    CHECK(std::abs(a(m) - std::polar(1.0, expected)) < 1e-12);
  }
}

TEST_CASE("channel shapes and determinism") {
  const ScenarioConfig cfg = default_config();
  const ChannelRealization c1 = synthesize_channels(cfg, 3);
  const ChannelRealization c2 = synthesize_channels(cfg, 3);
  const ChannelRealization c3 = synthesize_channels(cfg, 4);
  CHECK(c1.g_ap_irs.rows() == cfg.n_irs);
  CHECK(c1.g_ap_irs.cols() == cfg.n_tx);
  CHECK(c1.h_irs_pu.rows() == cfg.n_irs);
  CHECK(c1.h_irs_pu.cols() == cfg.n_pu);
  CHECK(c1.h_irs_su.size() == cfg.n_irs);
  CHECK((c1.g_ap_irs - c2.g_ap_irs).norm() == 0.0);
  CHECK((c1.h_irs_su - c2.h_irs_su).norm() == 0.0);
  CHECK((c1.g_ap_irs - c3.g_ap_irs).norm() > 0.0);
}

TEST_CASE("average link energy matches the path gain") {
  ScenarioConfig cfg = default_config();
  cfg.n_irs = 16;
  cfg.n_tx = 4;
  const double d = distance(cfg.pos_ap, cfg.pos_irs);
  const double gain = path_gain(d, cfg.alpha_ap_irs, cfg.ref_gain_db);
  double acc = 0.0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    const ChannelRealization ch = synthesize_channels(cfg, r);
    acc += ch.g_ap_irs.squaredNorm() / (cfg.n_irs * cfg.n_tx);
  }
  // LoS part contributes exactly `gain`; scattering averages to it too.
  CHECK(acc / reps == doctest::Approx(gain).epsilon(0.05));
}

TEST_CASE("strong Rician factor collapses to the line-of-sight dyad") {
  ScenarioConfig cfg = default_config();
  cfg.rician_ap_irs = 1e12;
  const ChannelRealization ch = synthesize_channels(cfg, 0);
  // Rank-one structure: second singular value vanishes.
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(ch.g_ap_irs);
  CHECK(svd.singularValues()(1) / svd.singularValues()(0) < 1e-5);
}

TEST_CASE("per-user links use per-user parameters") {
  ScenarioConfig cfg = default_config();
  cfg.alpha_irs_pu = {2.2, 4.0};  // second user much weaker
  double e0 = 0.0, e1 = 0.0;
  for (int r = 0; r < 200; ++r) {
    const ChannelRealization ch = synthesize_channels(cfg, r);
    e0 += ch.h_irs_pu.col(0).squaredNorm();
    e1 += ch.h_irs_pu.col(1).squaredNorm();
  }
  CHECK(e1 < 0.1 * e0);
}
