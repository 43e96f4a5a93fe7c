#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srsim/channel.hpp"
#include "srsim/config.hpp"
#include "srsim/conic/solver.hpp"
#include "srsim/signal.hpp"

namespace srsim {

// Alternating linearize-and-solve driver for the joint beamformer and
// reflection design: maximize the average sum rate subject to the transmit
// power budget, per-element reflection modulus, ascending detector levels,
// and the aggregate detector-error bound.
struct ScaOptions {
  double p_e_max = 0.01;    // detector error-bound target
  int tau_max = 50;         // outer iteration cap
  double rel_tol = 1e-4;    // penalized-surrogate convergence tolerance
  double chi = 100.0;       // working trust-slack price
  // The slack price ramps chi_init * chi_growth^iter up to chi, so early
  // iterations may move far while late ones pin the lifts rank-one.
  double chi_init = 1.0;
  double chi_growth = 1.8;
  int chi_escalations = 2;  // extra x10 price bumps when lifts stay loose
  double lift_tol = 1e-4;   // accepted relative rank-one gap
  int restarts = 20;        // initialization attempts
  double init_margin = 0.95;  // accept starts with bound <= margin * target
  int restore_tau = 10;     // iterations for the tightened feasibility rerun
  std::uint64_t seed = 1;
  bool with_qos = true;     // keep the detector-error constraint
  bool fixed_phases = false;  // optimize beams only, phases drawn once
  conic::SolveOptions solver{};
};

enum class ScaStatus { ok, infeasible_at_init, solver_failure };
const char* to_string(ScaStatus s);

struct ScaIteration {
  int iter = 0;
  double surrogate = 0.0;  // tangent objective, bits per level use
  double penalized = 0.0;  // surrogate minus the trust-slack penalty
  double rate = 0.0;       // true sum rate at the rounded phases
  double bound = 1.0;      // detector error bound at the rounded phases
  double residual = 0.0;   // worst original-constraint violation of the lift
  double lift_gap = 0.0;   // relative rank-one defect
  double chi = 0.0;
  double seconds = 0.0;
  std::string note;
};

struct ScaTrace {
  std::vector<ScaIteration> iterations;
  void write_csv(std::ostream& os) const;
};

struct ScaResult {
  ScaStatus status = ScaStatus::solver_failure;
  Eigen::MatrixXcd w;     // n_tx x n_beams
  Eigen::VectorXd theta;  // deployed unit-modulus phases
  double sum_rate = 0.0;  // bits, evaluated at (w, theta)
  double ser_bound = 1.0;
  int iterations = 0;
  std::string message;
  ScaTrace trace;
};

ScaResult run_sca(const ScenarioConfig& cfg, const ChannelRealization& ch,
                  const ActivationCodebook& cb, const ScaOptions& opts);

// Reference designs evaluated through the same driver.
//   no_qos:       rate-only design, error bound reported but unconstrained
//   random_phase: phases drawn once and frozen, beams optimized under QoS
//   all_on_upper: every reflector on, no side data, rate-only upper curve
enum class BaselineKind { no_qos, random_phase, all_on_upper };

ScaResult run_baseline(BaselineKind kind, const ScenarioConfig& cfg,
                       const ChannelRealization& ch,
                       const ActivationCodebook& cb, const ScaOptions& opts);

}  // namespace srsim
