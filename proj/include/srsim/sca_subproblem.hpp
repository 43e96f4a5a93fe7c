#pragma once

#include <vector>

#include <Eigen/Dense>

#include "srsim/channel.hpp"
#include "srsim/config.hpp"
#include "srsim/conic/program.hpp"
#include "srsim/signal.hpp"

namespace srsim {

// One adjacent activation-level pair of the non-coherent detector, anchored
// at the current iterate.  Powers are in detector-noise units.  eps_miss and
// eps_alarm are the exact threshold-to-power ratios at the anchor, so every
// tangent row built from this struct is tight there.
struct PairAnchor {
  double y_lo = 0.0;          // lower level power + 1
  double y_hi = 0.0;          // upper level power + 1
  double eps_miss = 0.0;      // half gap / y_hi
  double eps_alarm = 0.0;     // half gap / y_lo
  double pes_miss = 0.0;      // PES(L, L eps_miss)
  double log_pes_alarm = 0.0; // ln PES(L, L eps_alarm)
  double miss = 0.0;          // P(L, L eps_miss)
  double alarm = 0.0;         // Q(L, L eps_alarm)
};

// Anchor of one convex subproblem: the iterate itself, cascaded channels in
// per-user units (kappa normalizes the rank-one lifts to O(1) diagonals),
// received powers in noise units, and the detector-pair anchors.
//
// Anchor powers are evaluated on the lifts inflated by lift_delta * I (the
// same inflation the interior start applies), so the start coincides with the
// anchor exactly and relative cushions stay strict; every tangent is globally
// valid regardless of where it is anchored.  `p_su_phys`, `ascending`, and
// `bound` describe the uninflated iterate.
struct LinearizationPoint {
  Eigen::MatrixXcd w;  // n_tx x n_beams
  Eigen::VectorXcd v;  // n_irs reflection coefficients, |v_m| <= 1

  int n_irs = 0, n_tx = 0, n_beams = 0, n_lev = 0;
  int frame_len = 0;
  double p_max = 0.0, noise_pu = 0.0, noise_su = 0.0;
  std::vector<Eigen::ArrayXd> masks;  // per level, 0/1 over reflectors

  std::vector<double> kappa_pu;  // per served user
  double kappa_su = 1.0;
  std::vector<double> alpha_pu;  // kappa_k^2 / noise_pu
  double alpha_su = 1.0;

  std::vector<Eigen::MatrixXcd> bhat_pu;  // diag(conj(h_k)) G / kappa_k
  Eigen::MatrixXcd bhat_su;               // diag(conj(h_su)) G / kappa_su
  std::vector<Eigen::MatrixXcd> rhat_pu;  // bhat_pu[k] * w, n_irs x n_beams
  Eigen::MatrixXcd rhat_su;
  std::vector<Eigen::MatrixXcd> fhat_pu;  // diag(v) * rhat
  Eigen::MatrixXcd fhat_su;

  double lift_delta = 1e-6;  // identity inflation folded into the anchors

  Eigen::MatrixXd p_pu;       // row q*n_beams+k, col j: beam-j power at user k, noise units
  Eigen::VectorXd p_su;       // detector power per level, noise units (inflated)
  Eigen::VectorXd p_su_phys;  // detector power of the bare iterate

  std::vector<PairAnchor> pairs;  // n_lev - 1 adjacent pairs, inflated powers
  bool ascending = false;  // bare iterate strictly ascending
  double bound = 1.0;      // (sum miss + sum alarm) / n_lev of the bare iterate
  double rate = 0.0;       // average sum rate at the inflated anchor, bits
};

LinearizationPoint make_linearization(const ScenarioConfig& cfg,
                                      const ChannelRealization& ch,
                                      const ActivationCodebook& cb,
                                      const Eigen::MatrixXcd& w,
                                      const Eigen::VectorXcd& v,
                                      double lift_delta = 1e-6);

// Index map of one assembled subproblem.  Variables are stored scaled:
// natural value = scale * x[idx]; blocks without a scale array use scale 1.
struct LiftBlock {
  int u0 = -1;     // n_irs diagonal reals, then (re, im) pairs for m < m'
  int f0 = -1;     // n_irs (re, im) pairs
  int c = -1;      // corner scalar ||r||^2 lift
  int rho_u = -1;  // slack of the trace trust row (shared block)
  int rho_d = -1;  // slack of the corner trust row (shared block)
};

struct SubproblemMap {
  int n_irs = 0, n_beams = 0, n_tx = 0, n_lev = 0, n_pairs = 0;
  int n_vars = 0;
  bool fixed_phases = false, with_qos = true;

  int w0 = -1;  // (re, im) at w0 + 2 * (j * n_tx + t)
  int v0 = -1;  // (re, im) per reflector; -1 when phases are fixed
  int a0 = -1;  // gram diagonal per reflector; -1 when phases are fixed
  int rho_a = -1;

  int t0 = -1;  // rate hypograph value per (q, k): t0 + q * n_beams + k
  int p_pu0 = -1;              // (q, k, j), scale s_pu[q * n_beams + k]
  std::vector<double> s_pu;    // 1 + sum_j anchor power, per (q, k)
  int p_su0 = -1;              // per level, scale z_su[q]
  std::vector<double> z_su;

  // Detector chain, 8 variables per adjacent pair.
  enum ChainSlot {
    kGamma = 0,  // miss bound term
    kXi,         // miss partial-exp-sum, scaled by its anchor
    kEpsM1,      // miss exponent ratio (lower side)
    kEpsM2,      // miss partial-sum ratio (upper side)
    kAlarm,      // false-alarm bound term
    kZeta,       // log alarm partial-exp-sum
    kEpsA1,      // alarm exponent ratio (upper side)
    kEpsA2,      // alarm partial-sum ratio (lower side)
    kChainStride
  };
  int chain0 = -1;
  std::vector<double> chain_scale;  // per chain variable

  std::vector<LiftBlock> pu;  // k * n_beams + j
  std::vector<LiftBlock> su;  // per served-user beam

  int w_re(int j, int t) const { return w0 + 2 * (j * n_tx + t); }
  int w_im(int j, int t) const { return w_re(j, t) + 1; }
  int v_re(int m) const { return v0 + 2 * m; }
  int v_im(int m) const { return v0 + 2 * m + 1; }
  int t_qk(int q, int k) const { return t0 + q * n_beams + k; }
  int p_pu_idx(int q, int k, int j) const {
    return p_pu0 + (q * n_beams + k) * n_beams + j;
  }
  double p_pu_scale(int q, int k) const { return s_pu[q * n_beams + k]; }
  int chain(int pair, ChainSlot s) const {
    return chain0 + kChainStride * pair + s;
  }
  double chain_sc(int pair, ChainSlot s) const {
    return chain_scale[kChainStride * pair + s];
  }
  int u_diag(const LiftBlock& b, int m) const { return b.u0 + m; }
  // m < mp; returns the re index, im follows it.
  int u_off(const LiftBlock& b, int m, int mp) const {
    const int p = m * n_irs - m * (m + 1) / 2 + (mp - m - 1);
    return b.u0 + n_irs + 2 * p;
  }
  int f_re(const LiftBlock& b, int m) const { return b.f0 + 2 * m; }
  int f_im(const LiftBlock& b, int m) const { return b.f0 + 2 * m + 1; }
};

struct SubproblemKnobs {
  double chi = 100.0;   // trust-slack penalty weight, scaled objective units
  double p_e_max = 0.01;
  bool with_qos = true;
  bool fixed_phases = false;
};

struct Subproblem {
  conic::Program prog;
  SubproblemMap map;
};

Subproblem build_subproblem(const LinearizationPoint& lp,
                            const SubproblemKnobs& kn);

// Strictly interior start at the anchor: exact lifts inflated by small
// cushions, powers recomputed from the inflated lifts so equality rows hold,
// detector chain placed inside its corridor.  If a cushion fails strictness
// the solver's slack phase repairs it.
Eigen::VectorXd interior_start(const LinearizationPoint& lp,
                               const Subproblem& sp,
                               const SubproblemKnobs& kn);

struct SolvedPoint {
  Eigen::MatrixXcd w;
  Eigen::VectorXcd v;
  double surrogate = 0.0;    // anchor-consistent average sum rate, bits
  double penalty = 0.0;      // chi * total trust slack
  double slack_total = 0.0;
  double lift_gap = 0.0;     // worst relative lift inconsistency
};

SolvedPoint extract_point(const LinearizationPoint& lp, const Subproblem& sp,
                          const Eigen::VectorXd& x, double chi);

// Largest positive residual of the original (non-convexified) rows evaluated
// at a subproblem solution: rate hypographs against exact logs, lifted powers
// against the lift quadratic forms, and the detector chain against the exact
// miss/alarm terms of the solved levels.  Near zero iff every convex row
// dominated its original at x.
double chain_residual(const LinearizationPoint& lp, const Subproblem& sp,
                      const Eigen::VectorXd& x, double p_e_max);

}  // namespace srsim
