#include "srsim/sca.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srsim/rng.hpp"
#include "srsim/sca_subproblem.hpp"
#include "srsim/ser.hpp"

namespace srsim {

namespace {

using std::complex;

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Candidate {
  Eigen::MatrixXcd w;
  Eigen::VectorXcd v;
};

Eigen::VectorXd phases_of(const Eigen::VectorXcd& v) {
  Eigen::VectorXd th(v.size());
  for (int m = 0; m < v.size(); ++m) th[m] = std::arg(v[m]);
  return th;
}

// True metrics at hard unit-modulus phases.
struct Rounded {
  Eigen::VectorXd theta;
  double rate = 0.0;
  double bound = 0.0;
};

Rounded evaluate_rounded(const ScenarioConfig& cfg,
                         const ChannelRealization& ch,
                         const ActivationCodebook& cb,
                         const Eigen::MatrixXcd& w, const Eigen::VectorXcd& v) {
  Rounded r;
  r.theta = phases_of(v);
  const int K = static_cast<int>(ch.h_irs_pu.cols());
  const std::vector<double> noise(K, cfg.noise_pu_w);
  r.rate = sum_rate(ch, w, r.theta, cb, noise);
  if (cb.n_levels() >= 2) {
    const Eigen::VectorXd lev = su_level_powers(ch, w, r.theta, cb);
    r.bound = ser_upper_bound(lev, cfg.noise_su_w, cfg.frame_len);
  }
  return r;
}

Eigen::MatrixXcd detector_cascade(const ChannelRealization& ch) {
  Eigen::MatrixXcd b = ch.g_ap_irs;
  b.array().colwise() *= ch.h_irs_su.array().conjugate();
  return b;
}

Eigen::MatrixXcd user_cascade(const ChannelRealization& ch, int k) {
  Eigen::MatrixXcd b = ch.g_ap_irs;
  b.array().colwise() *= ch.h_irs_pu.col(k).array().conjugate();
  return b;
}

// Unit beam maximizing |v^T b w|.
Eigen::VectorXcd mrt_beam(const Eigen::MatrixXcd& b,
                          const Eigen::VectorXcd& v) {
  const Eigen::RowVectorXcd c = v.transpose() * b;
  if (c.norm() < 1e-300) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(b.cols());
    e[0] = 1.0;
    return e;
  }
  return c.adjoint() / c.norm();
}

// Rotate always-on contributions until their sum nearly cancels, so the
// bottom level starts from near-zero received power.
void close_polygon(Eigen::VectorXcd& v, const Eigen::VectorXcd& t,
                   const std::vector<char>& toggled) {
  const int M = static_cast<int>(v.size());
  complex<double> s = 0.0;
  double total = 0.0;
  for (int m = 0; m < M; ++m)
    if (!toggled[m]) {
      s += v[m] * t[m];
      total += std::abs(t[m]);
    }
  for (int sweep = 0; sweep < 60 && std::abs(s) > 1e-9 * total; ++sweep)
    for (int m = 0; m < M; ++m) {
      if (toggled[m] || std::abs(t[m]) == 0.0) continue;
      const complex<double> rest = s - v[m] * t[m];
      const double rn = std::abs(rest);
      const complex<double> dir =
          rn > 1e-300 ? -rest / rn : complex<double>(1.0, 0.0);
      v[m] = dir * std::conj(t[m]) / std::abs(t[m]);
      s = rest + v[m] * t[m];
    }
}

// Phase the toggled contributions so the level amplitudes climb a ladder:
// either greedily aligned or targeting a fixed amplitude ratio per step.
Eigen::VectorXcd shape_toggles(const Eigen::VectorXcd& v0,
                               const Eigen::VectorXcd& t,
                               const std::vector<int>& add_order,
                               bool ratio_ladder) {
  Eigen::VectorXcd v = v0;
  const int M = static_cast<int>(v.size());
  std::vector<char> toggled(M, 0);
  for (const int m : add_order) toggled[m] = 1;
  complex<double> s = 0.0;
  for (int m = 0; m < M; ++m)
    if (!toggled[m]) s += v[m] * t[m];

  for (const int m : add_order) {
    const double zm = std::abs(t[m]);
    if (zm == 0.0) continue;
    const double amp = std::abs(s);
    const double base = amp > 1e-300 ? std::arg(s) : 0.0;
    double beta = 0.0;
    if (ratio_ladder && amp > 1e-300) {
      const double target =
          std::min(amp + 0.98 * zm, std::max(1.618 * amp, 0.5 * zm));
      const double c =
          (target * target - amp * amp - zm * zm) / (2.0 * amp * zm);
      beta = std::acos(std::clamp(c, -1.0, 1.0));
    }
    const complex<double> z = std::polar(zm, base + beta);
    v[m] = z / t[m];
    s += z;
  }
  return v;
}

// Detector-aimed start: beams focused on the detector, always-on phases
// closed to empty the bottom level, toggled phases laddered upward.
std::vector<Candidate> constructive_starts(const ScenarioConfig& cfg,
                                           const ChannelRealization& ch,
                                           const ActivationCodebook& cb) {
  const int M = cfg.n_irs, NT = cfg.n_tx;
  const int K = static_cast<int>(ch.h_irs_pu.cols());
  const Eigen::MatrixXcd b = detector_cascade(ch);

  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(M);
  Eigen::VectorXcd wd;
  for (int round = 0; round < 3; ++round) {
    wd = mrt_beam(b, v);
    const Eigen::VectorXcd t = b * wd;
    for (int m = 0; m < M; ++m)
      if (std::abs(t[m]) > 0.0) v[m] = std::conj(t[m]) / std::abs(t[m]);
  }
  const Eigen::VectorXcd t = b * wd;

  std::vector<char> toggled(M, 0);
  for (const int m : cb.ice_indices()) toggled[m] = 1;
  close_polygon(v, t, toggled);

  // Levels switch toggles on from the back of the list.
  std::vector<int> add_order(cb.ice_indices().rbegin(),
                             cb.ice_indices().rend());

  Eigen::MatrixXcd w(NT, K);
  const double amp = std::sqrt(0.95 * cfg.p_max_w / std::max(1, K));
  for (int k = 0; k < K; ++k) w.col(k) = amp * wd;

  std::vector<Candidate> out;
  for (const bool ladder : {true, false}) {
    Candidate c;
    c.w = w;
    c.v = (1.0 - 1e-3) * shape_toggles(v, t, add_order, ladder);
    out.push_back(std::move(c));
  }
  return out;
}

Candidate random_start(const ScenarioConfig& cfg, const ChannelRealization& ch,
                       RngStream rs) {
  const int M = cfg.n_irs, NT = cfg.n_tx;
  const int K = static_cast<int>(ch.h_irs_pu.cols());
  Candidate c;
  c.v.resize(M);
  for (int m = 0; m < M; ++m)
    c.v[m] = (1.0 - 1e-3) * std::polar(1.0, rs.uniform(0.0, kTwoPi));
  const Eigen::VectorXcd wd = mrt_beam(detector_cascade(ch), c.v);
  c.w.resize(NT, K);
  const double amp = std::sqrt(0.95 * cfg.p_max_w / std::max(1, K));
  for (int k = 0; k < K; ++k) c.w.col(k) = amp * wd;
  return c;
}

// Rate-aimed start for the unconstrained reference: per-user beams with a
// few reflection alternations, the best of one deterministic and a few
// random candidates.
Candidate rate_start(const ScenarioConfig& cfg, const ChannelRealization& ch,
                     const ActivationCodebook& cb, RngStream root) {
  const int M = cfg.n_irs, NT = cfg.n_tx;
  const int K = static_cast<int>(ch.h_irs_pu.cols());
  std::vector<Eigen::MatrixXcd> b;
  for (int k = 0; k < K; ++k) b.push_back(user_cascade(ch, k));
  const double amp = std::sqrt(0.95 * cfg.p_max_w / std::max(1, K));

  const auto mrt_all = [&](const Eigen::VectorXcd& v) {
    Eigen::MatrixXcd w(NT, K);
    for (int k = 0; k < K; ++k) w.col(k) = amp * mrt_beam(b[k], v);
    return w;
  };

  std::vector<Candidate> cands;
  {
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(M);
    Eigen::MatrixXcd w = mrt_all(v);
    for (int round = 0; round < 2; ++round) {
      std::vector<Eigen::VectorXcd> t;
      for (int k = 0; k < K; ++k) t.push_back(b[k] * w.col(k));
      std::vector<complex<double>> s(K, 0.0);
      for (int k = 0; k < K; ++k) s[k] = (v.transpose() * t[k]).value();
      for (int m = 0; m < M; ++m) {
        complex<double> grad = 0.0;
        for (int k = 0; k < K; ++k)
          grad += t[k][m] * std::conj(s[k] - v[m] * t[k][m]);
        if (std::abs(grad) > 1e-300) {
          for (int k = 0; k < K; ++k) s[k] -= v[m] * t[k][m];
          v[m] = std::conj(grad) / std::abs(grad);
          for (int k = 0; k < K; ++k) s[k] += v[m] * t[k][m];
        }
      }
      w = mrt_all(v);
    }
    cands.push_back({w, (1.0 - 1e-3) * v});
  }
  for (int r = 0; r < 3; ++r) {
    RngStream rs = root.split("rate-init").split_index(r);
    Eigen::VectorXcd v(M);
    for (int m = 0; m < M; ++m)
      v[m] = (1.0 - 1e-3) * std::polar(1.0, rs.uniform(0.0, kTwoPi));
    cands.push_back({mrt_all(v), v});
  }

  Candidate best = cands.front();
  double best_rate = -std::numeric_limits<double>::infinity();
  for (auto& c : cands) {
    const double r = make_linearization(cfg, ch, cb, c.w, c.v).rate;
    if (r > best_rate) {
      best_rate = r;
      best = c;
    }
  }
  return best;
}

struct BestPoint {
  bool valid = false;
  Eigen::MatrixXcd w;
  Eigen::VectorXd theta;
  double rate = -std::numeric_limits<double>::infinity();
  double bound = 1.0;
};

// Linearize-solve loop from (w, v).  Appends trace rows, tracks the best
// feasible rounded iterate, and leaves (w, v) at the last anchor.  Returns
// an empty string on clean exit, else the failure description.
std::string outer_loop(const ScenarioConfig& cfg, const ChannelRealization& ch,
                       const ActivationCodebook& cb, const ScaOptions& opts,
                       double pe_eff, int tau, bool ramp, Eigen::MatrixXcd& w,
                       Eigen::VectorXcd& v, ScaTrace& trace, BestPoint& best,
                       const char* tag) {
  double chi_cap = opts.chi;
  int esc = 0;
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < tau; ++it) {
    const double chi =
        ramp ? std::min(chi_cap,
                        opts.chi_init * std::pow(opts.chi_growth, it))
             : chi_cap;
    const auto tic = std::chrono::steady_clock::now();
    const LinearizationPoint lp = make_linearization(cfg, ch, cb, w, v);
    SubproblemKnobs kn;
    kn.chi = chi;
    kn.p_e_max = pe_eff;
    kn.with_qos = opts.with_qos;
    kn.fixed_phases = opts.fixed_phases;
    const Subproblem sp = build_subproblem(lp, kn);
    Eigen::VectorXd x0 = interior_start(lp, sp, kn);
    const conic::Solver solver(sp.prog);
    conic::Solution sol = solver.solve(opts.solver, &x0);
    if (sol.status != conic::SolveStatus::optimal) {
      conic::SolveOptions relaxed = opts.solver;
      relaxed.gap_tol *= 100.0;
      relaxed.max_newton *= 2;
      sol = solver.solve(relaxed, &x0);
    }
    const bool capped = sol.status == conic::SolveStatus::max_iterations;
    if (sol.status != conic::SolveStatus::optimal && !capped)
      return std::string("subproblem ") + conic::to_string(sol.status) +
             " at iteration " + std::to_string(it);

    const SolvedPoint pt = extract_point(lp, sp, sol.x, chi);
    const Rounded rd = evaluate_rounded(cfg, ch, cb, pt.w, pt.v);
    ScaIteration row;
    row.iter = static_cast<int>(trace.iterations.size());
    row.surrogate = pt.surrogate;
    row.penalized = pt.surrogate - pt.penalty;
    row.rate = rd.rate;
    row.bound = rd.bound;
    row.residual = chain_residual(lp, sp, sol.x, pe_eff);
    row.lift_gap = pt.lift_gap;
    row.chi = chi;
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
            .count();
    row.note = tag;
    if (capped) row.note += row.note.empty() ? "newton-cap" : " newton-cap";
    trace.iterations.push_back(row);

    const bool feas = !opts.with_qos || rd.bound <= opts.p_e_max + 1e-6;
    if (feas && (!best.valid || rd.rate > best.rate)) {
      best.valid = true;
      best.w = pt.w;
      best.theta = rd.theta;
      best.rate = rd.rate;
      best.bound = rd.bound;
    }
    w = pt.w;
    v = pt.v;

    // convergence is only judged once the price ramp has topped out;
    // across a price change the penalized values are not comparable
    if (chi != chi_cap) continue;
    const double pen = pt.surrogate - pt.penalty;
    if (std::abs(pen - prev) <= opts.rel_tol * std::max(1.0, std::abs(pen))) {
      if (pt.lift_gap <= opts.lift_tol || esc >= opts.chi_escalations)
        return "";
      chi_cap *= 10.0;
      ++esc;
      prev = -std::numeric_limits<double>::infinity();
      continue;
    }
    prev = pen;
  }
  return "";
}

}  // namespace

const char* to_string(ScaStatus s) {
  switch (s) {
    case ScaStatus::ok:
      return "ok";
    case ScaStatus::infeasible_at_init:
      return "infeasible_at_init";
    case ScaStatus::solver_failure:
      return "solver_failure";
  }
  return "unknown";
}

void ScaTrace::write_csv(std::ostream& os) const {
  os << "iter,surrogate,penalized,rate,bound,residual,lift_gap,chi,seconds,"
        "note\n";
  const auto prec = os.precision(12);
  for (const auto& it : iterations)
    os << it.iter << ',' << it.surrogate << ',' << it.penalized << ','
       << it.rate << ',' << it.bound << ',' << it.residual << ','
       << it.lift_gap << ',' << it.chi << ',' << it.seconds << ',' << it.note
       << '\n';
  os.precision(prec);
}

ScaResult run_sca(const ScenarioConfig& cfg, const ChannelRealization& ch,
                  const ActivationCodebook& cb, const ScaOptions& opts) {
  if (opts.with_qos && cb.n_levels() < 2)
    throw std::invalid_argument("run_sca: error constraint needs >= 2 levels");
  if (ch.h_irs_pu.cols() < 1)
    throw std::invalid_argument("run_sca: no served users");

  ScaResult res;
  const RngStream root(opts.seed);

  Candidate start;
  bool have = false;
  double best_gate_bound = std::numeric_limits<double>::infinity();
  const double gate = opts.init_margin * opts.p_e_max;

  if (opts.fixed_phases) {
    // Phases drawn once; only the beams are searched for a feasible start.
    RngStream ts = root.split("fixed-theta");
    Eigen::VectorXcd v(cfg.n_irs);
    for (int m = 0; m < cfg.n_irs; ++m)
      v[m] = std::polar(1.0, ts.uniform(0.0, kTwoPi));
    const int NT = cfg.n_tx, K = static_cast<int>(ch.h_irs_pu.cols());
    const double amp = std::sqrt(0.95 * cfg.p_max_w / std::max(1, K));
    double best_rate = -std::numeric_limits<double>::infinity();
    RngStream ws = root.split("fixed-w");
    const int tries = std::max(1, opts.restarts) * 25;
    for (int r = 0; r <= tries; ++r) {
      Candidate c;
      c.v = v;
      c.w.resize(NT, K);
      if (r == 0) {
        const Eigen::VectorXcd wd = mrt_beam(detector_cascade(ch), v);
        for (int k = 0; k < K; ++k) c.w.col(k) = amp * wd;
      } else {
        RngStream rs = ws.split_index(r);
        for (int k = 0; k < K; ++k)
          for (int t = 0; t < NT; ++t) c.w(t, k) = rs.cgaussian();
        c.w *= std::sqrt(0.95 * cfg.p_max_w) / c.w.norm();
      }
      const LinearizationPoint lp = make_linearization(cfg, ch, cb, c.w, c.v);
      best_gate_bound = std::min(best_gate_bound, lp.bound);
      const bool ok = !opts.with_qos || (lp.ascending && lp.bound <= gate);
      if (ok && lp.rate > best_rate) {
        best_rate = lp.rate;
        start = c;
        have = true;
      }
    }
  } else if (opts.with_qos) {
    std::vector<Candidate> cands = constructive_starts(cfg, ch, cb);
    for (int r = 1; r < std::max(1, opts.restarts); ++r)
      cands.push_back(random_start(cfg, ch, root.split("init").split_index(r)));
    for (auto& c : cands) {
      const LinearizationPoint lp = make_linearization(cfg, ch, cb, c.w, c.v);
      best_gate_bound = std::min(best_gate_bound, lp.bound);
      if (lp.ascending && lp.bound <= gate) {
        start = c;
        have = true;
        break;
      }
    }
  } else {
    start = rate_start(cfg, ch, cb, root);
    have = true;
  }

  if (!have) {
    res.status = ScaStatus::infeasible_at_init;
    res.message = "no start reached the error-bound gate; best bound " +
                  std::to_string(best_gate_bound);
    return res;
  }

  BestPoint best;
  Eigen::MatrixXcd w = start.w;
  Eigen::VectorXcd v = start.v;
  std::string fail = outer_loop(cfg, ch, cb, opts, opts.p_e_max, opts.tau_max,
                                true, w, v, res.trace, best, "");

  // The relaxed iterate can sit a hair over the bound once phases are
  // rounded to unit modulus; retarget slightly tighter and rerun briefly.
  if (opts.with_qos && !best.valid && fail.empty() && opts.restore_tau > 0) {
    Eigen::VectorXcd vr(v.size());
    for (int m = 0; m < v.size(); ++m)
      vr[m] = (1.0 - 1e-6) * std::polar(1.0, std::arg(v[m]));
    if (opts.fixed_phases) vr = v;
    // no ramp: the point is already converged, this pass only restores
    // feasibility at a slightly tighter target
    fail = outer_loop(cfg, ch, cb, opts, 0.95 * opts.p_e_max, opts.restore_tau,
                      false, w, vr, res.trace, best, "restore");
    v = vr;
  }

  res.iterations = static_cast<int>(res.trace.iterations.size());
  if (best.valid) {
    res.status = ScaStatus::ok;
    res.w = best.w;
    res.theta = best.theta;
    res.sum_rate = best.rate;
    res.ser_bound = best.bound;
    res.message = fail;
  } else {
    const Rounded rd = evaluate_rounded(cfg, ch, cb, w, v);
    res.w = w;
    res.theta = rd.theta;
    res.sum_rate = rd.rate;
    res.ser_bound = rd.bound;
    const bool feas = !opts.with_qos || rd.bound <= opts.p_e_max + 1e-6;
    res.status = feas ? ScaStatus::ok : ScaStatus::solver_failure;
    res.message = !fail.empty()
                      ? fail
                      : (feas ? std::string{}
                              : "error bound " + std::to_string(rd.bound) +
                                    " exceeds target " +
                                    std::to_string(opts.p_e_max));
  }
  return res;
}

ScaResult run_baseline(BaselineKind kind, const ScenarioConfig& cfg,
                       const ChannelRealization& ch,
                       const ActivationCodebook& cb, const ScaOptions& opts) {
  ScaOptions o = opts;
  switch (kind) {
    case BaselineKind::no_qos: {
      o.with_qos = false;
      return run_sca(cfg, ch, cb, o);
    }
    case BaselineKind::random_phase: {
      o.fixed_phases = true;
      return run_sca(cfg, ch, cb, o);
    }
    case BaselineKind::all_on_upper: {
      o.with_qos = false;
      const ActivationCodebook all_on(cfg.n_irs, {});
      ScaResult res = run_sca(cfg, ch, all_on, o);
      res.ser_bound = 0.0;  // no side data is carried, nothing to misdetect
      return res;
    }
  }
  throw std::invalid_argument("run_baseline: unknown kind");
}

}  // namespace srsim
