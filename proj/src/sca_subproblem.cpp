#include "srsim/sca_subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "srsim/gammainc.hpp"
#include "srsim/ser.hpp"

namespace srsim {

namespace {

using conic::AffineExpr;
using std::complex;

constexpr complex<double> kI{0.0, 1.0};
constexpr double kLn2 = 0.6931471805599453;

// d/deps PES(L, L eps) and d/deps ln PES(L, L eps).
double pes_slope(int L, double eps) {
  return L * partial_exp_sum(L - 1, L * eps);
}
double log_pes_slope(int L, double eps) {
  return L * std::exp(log_partial_exp_sum(L - 1, L * eps) -
                      log_partial_exp_sum(L, L * eps));
}

// Divides a row by its largest coefficient magnitude; keeps feasibility.
AffineExpr normalized(AffineExpr e) {
  double s = 0.0;
  for (const auto& [v, c] : e.terms) s = std::max(s, std::abs(c));
  if (s <= 0.0) s = std::max(1.0, std::abs(e.constant));
  for (auto& [v, c] : e.terms) c /= s;
  e.constant /= s;
  return e;
}

// mask^T U mask as an affine expression over one lift block's entries.
AffineExpr mask_quadform(const SubproblemMap& mp, const LiftBlock& b,
                         const Eigen::ArrayXd& mask, double coeff) {
  AffineExpr e;
  const int M = mp.n_irs;
  for (int m = 0; m < M; ++m) {
    if (mask[m] == 0.0) continue;
    e.add(mp.u_diag(b, m), coeff);
    for (int m2 = m + 1; m2 < M; ++m2)
      if (mask[m2] != 0.0) e.add(mp.u_off(b, m, m2), 2.0 * coeff);
  }
  return e;
}

double mask_quadform_value(const SubproblemMap& mp, const LiftBlock& b,
                           const Eigen::ArrayXd& mask,
                           const Eigen::VectorXd& x) {
  double acc = 0.0;
  const int M = mp.n_irs;
  for (int m = 0; m < M; ++m) {
    if (mask[m] == 0.0) continue;
    acc += x[mp.u_diag(b, m)];
    for (int m2 = m + 1; m2 < M; ++m2)
      if (mask[m2] != 0.0) acc += 2.0 * x[mp.u_off(b, m, m2)];
  }
  return acc;
}

}  // namespace

LinearizationPoint make_linearization(const ScenarioConfig& cfg,
                                      const ChannelRealization& ch,
                                      const ActivationCodebook& cb,
                                      const Eigen::MatrixXcd& w,
                                      const Eigen::VectorXcd& v,
                                      double lift_delta) {
  LinearizationPoint lp;
  lp.w = w;
  lp.v = v;
  lp.lift_delta = lift_delta;
  lp.n_irs = cfg.n_irs;
  lp.n_tx = cfg.n_tx;
  lp.n_beams = static_cast<int>(w.cols());
  lp.n_lev = cb.n_levels();
  lp.frame_len = cfg.frame_len;
  lp.p_max = cfg.p_max_w;
  lp.noise_pu = cfg.noise_pu_w;
  lp.noise_su = cfg.noise_su_w;
  if (w.rows() != cfg.n_tx || v.size() != cfg.n_irs)
    throw std::invalid_argument("make_linearization: dimension mismatch");

  const int M = lp.n_irs, K = lp.n_beams, NL = lp.n_lev;
  const int L = lp.frame_len;
  for (int q = 1; q <= NL; ++q) lp.masks.push_back(cb.mask(q));

  const auto cascade_setup = [&](const Eigen::VectorXcd& h, double noise,
                                 double& kappa, double& alpha,
                                 Eigen::MatrixXcd& bhat, Eigen::MatrixXcd& rhat,
                                 Eigen::MatrixXcd& fhat) {
    Eigen::MatrixXcd b = ch.g_ap_irs;
    b.array().colwise() *= h.array().conjugate();
    const double k2 = b.squaredNorm() / M * (lp.p_max / std::max(1, K));
    kappa = std::sqrt(std::max(k2, 1e-300));
    alpha = k2 / noise;
    bhat = b / kappa;
    rhat = bhat * w;
    fhat = rhat;
    fhat.array().colwise() *= v.array();
  };

  lp.kappa_pu.resize(K);
  lp.alpha_pu.resize(K);
  lp.bhat_pu.resize(K);
  lp.rhat_pu.resize(K);
  lp.fhat_pu.resize(K);
  for (int k = 0; k < K; ++k)
    cascade_setup(ch.h_irs_pu.col(k), lp.noise_pu, lp.kappa_pu[k],
                  lp.alpha_pu[k], lp.bhat_pu[k], lp.rhat_pu[k], lp.fhat_pu[k]);
  cascade_setup(ch.h_irs_su, lp.noise_su, lp.kappa_su, lp.alpha_su, lp.bhat_su,
                lp.rhat_su, lp.fhat_su);

  const auto masked_gain = [&](const Eigen::MatrixXcd& f, int q,
                               int j) -> complex<double> {
    complex<double> acc = 0.0;
    for (int m = 0; m < M; ++m)
      if (lp.masks[q][m] != 0.0) acc += f(m, j);
    return acc;
  };

  // Anchor powers carry the lift inflation: the interior start sets each
  // lift to f f^H + delta I, whose masked quadratic form gains delta * n_q.
  Eigen::VectorXd n_act(NL);
  for (int q = 0; q < NL; ++q) n_act[q] = lp.masks[q].sum();

  lp.p_pu.resize(NL * K, K);
  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < K; ++j)
        lp.p_pu(q * K + k, j) =
            lp.alpha_pu[k] * (std::norm(masked_gain(lp.fhat_pu[k], q, j)) +
                              lift_delta * n_act[q]);
  lp.p_su.resize(NL);
  lp.p_su_phys.resize(NL);
  for (int q = 0; q < NL; ++q) {
    double acc = 0.0;
    for (int k = 0; k < K; ++k)
      acc += std::norm(masked_gain(lp.fhat_su, q, k));
    lp.p_su_phys[q] = lp.alpha_su * acc;
    lp.p_su[q] = lp.alpha_su * (acc + K * lift_delta * n_act[q]);
  }

  lp.ascending = true;
  for (int q = 0; q + 1 < NL; ++q)
    if (!(lp.p_su_phys[q + 1] > lp.p_su_phys[q])) lp.ascending = false;

  if (NL >= 2) {
    for (int u = 0; u + 1 < NL; ++u) {
      PairAnchor a;
      a.y_lo = lp.p_su[u] + 1.0;
      a.y_hi = lp.p_su[u + 1] + 1.0;
      const double half_gap = std::max(0.0, (lp.p_su[u + 1] - lp.p_su[u]) / 2);
      a.eps_miss = half_gap / a.y_hi;
      a.eps_alarm = half_gap / a.y_lo;
      a.pes_miss = partial_exp_sum(L, L * a.eps_miss);
      a.log_pes_alarm = log_partial_exp_sum(L, L * a.eps_alarm);
      a.miss = -std::expm1(log_partial_exp_sum(L, L * a.eps_miss) -
                           L * a.eps_miss);
      a.alarm = std::exp(a.log_pes_alarm - L * a.eps_alarm);
      lp.pairs.push_back(a);
    }
    lp.bound = ser_upper_bound(lp.p_su_phys * lp.noise_su, lp.noise_su, L);
  } else {
    lp.bound = 0.0;
  }

  lp.rate = 0.0;
  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k) {
      const double s = lp.p_pu.row(q * K + k).sum();
      double intf = 0.0;
      for (int j = 0; j < K; ++j)
        if (j != k) intf += lp.p_pu(q * K + k, j);
      lp.rate += (std::log1p(s) - std::log1p(intf)) / (NL * kLn2);
    }
  return lp;
}

Subproblem build_subproblem(const LinearizationPoint& lp,
                            const SubproblemKnobs& kn) {
  const int M = lp.n_irs, K = lp.n_beams, NT = lp.n_tx, NL = lp.n_lev;
  const int NP = kn.with_qos ? NL - 1 : 0;
  const int L = lp.frame_len;
  if (kn.with_qos && NL < 2)
    throw std::invalid_argument("detector constraints need >= 2 levels");

  Subproblem sp;
  auto& P = sp.prog;
  auto& mp = sp.map;
  mp.n_irs = M;
  mp.n_beams = K;
  mp.n_tx = NT;
  mp.n_lev = NL;
  mp.n_pairs = NP;
  mp.fixed_phases = kn.fixed_phases;
  mp.with_qos = kn.with_qos;

  mp.w0 = P.add_vars("w", 2 * K * NT);
  if (!kn.fixed_phases) {
    mp.v0 = P.add_vars("v", 2 * M);
    mp.a0 = P.add_vars("a", M);
  }
  mp.t0 = P.add_vars("t", NL * K);
  mp.p_pu0 = P.add_vars("p_pu", NL * K * K);
  mp.s_pu.resize(NL * K);
  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k)
      mp.s_pu[q * K + k] = 1.0 + lp.p_pu.row(q * K + k).sum();
  if (kn.with_qos) {
    mp.p_su0 = P.add_vars("p_su", NL);
    mp.z_su.resize(NL);
    for (int q = 0; q < NL; ++q) mp.z_su[q] = 1.0 + lp.p_su[q];
    mp.chain0 = P.add_vars("chain", SubproblemMap::kChainStride * NP);
    mp.chain_scale.assign(SubproblemMap::kChainStride * NP, 1.0);
    for (int u = 0; u < NP; ++u) {
      const PairAnchor& a = lp.pairs[u];
      auto sc = [&](SubproblemMap::ChainSlot s, double val) {
        mp.chain_scale[SubproblemMap::kChainStride * u + s] = val;
      };
      sc(SubproblemMap::kXi, a.pes_miss);
      sc(SubproblemMap::kEpsM1, std::max(a.eps_miss, 1e-9));
      sc(SubproblemMap::kEpsM2, std::max(a.eps_miss, 1e-9));
      sc(SubproblemMap::kZeta, std::max(1.0, a.log_pes_alarm));
      sc(SubproblemMap::kEpsA1, std::max(a.eps_alarm, 1e-9));
      sc(SubproblemMap::kEpsA2, std::max(a.eps_alarm, 1e-9));
    }
  }
  if (!kn.fixed_phases) mp.rho_a = P.add_vars("rho_a", 1);
  const int n_pu_lifts = K * K;
  const int n_su_lifts = kn.with_qos ? K : 0;
  const int rho0 = P.add_vars("rho", 2 * (n_pu_lifts + n_su_lifts));

  const int lift_sz = M * M + 2 * M + 1;
  const auto alloc_lift = [&](const std::string& name, int slack_slot) {
    LiftBlock b;
    b.u0 = P.add_vars(name, lift_sz);
    P.mark_local_group(b.u0, lift_sz);
    b.f0 = b.u0 + M * M;
    b.c = b.u0 + M * M + 2 * M;
    b.rho_u = rho0 + 2 * slack_slot;
    b.rho_d = rho0 + 2 * slack_slot + 1;
    return b;
  };
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j)
      mp.pu.push_back(alloc_lift("lift_pu", k * K + j));
  for (int k = 0; k < n_su_lifts; ++k)
    mp.su.push_back(alloc_lift("lift_su", n_pu_lifts + k));
  mp.n_vars = P.n_vars();

  // Objective: maximize the tangent surrogate of the average rate, minus the
  // trust-slack penalty.  Constant anchor terms are added back on extraction.
  Eigen::VectorXd c = Eigen::VectorXd::Zero(mp.n_vars);
  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k) {
      c[mp.t_qk(q, k)] = -1.0 / (NL * kLn2);
      double d_tau = 1.0;
      for (int j = 0; j < K; ++j)
        if (j != k) d_tau += lp.p_pu(q * K + k, j);
      for (int j = 0; j < K; ++j)
        if (j != k)
          c[mp.p_pu_idx(q, k, j)] = mp.p_pu_scale(q, k) / (NL * kLn2 * d_tau);
    }
  if (mp.rho_a >= 0) c[mp.rho_a] = kn.chi;
  for (const auto& b : mp.pu) {
    c[b.rho_u] = kn.chi;
    c[b.rho_d] = kn.chi;
  }
  for (const auto& b : mp.su) {
    c[b.rho_u] = kn.chi;
    c[b.rho_d] = kn.chi;
  }
  P.set_objective(std::move(c));

  // Total transmit power.
  {
    std::vector<AffineExpr> u;
    for (int i = 0; i < 2 * K * NT; ++i) u.push_back(AffineExpr::var(mp.w0 + i));
    P.add_soc(std::move(u), AffineExpr(std::sqrt(lp.p_max)));
  }

  // Reflection-coefficient relaxation: |v_m| <= 1 <= a_m, plus the single
  // gram trust row sum a_m <= tangent of ||v||^2 + rho_a.
  if (!kn.fixed_phases) {
    for (int m = 0; m < M; ++m) {
      P.add_soc({AffineExpr::var(mp.v_re(m)), AffineExpr::var(mp.v_im(m))},
                AffineExpr(1.0));
      P.add_linear(AffineExpr(1.0).add(mp.a0 + m, -1.0));
    }
    AffineExpr tr;
    for (int m = 0; m < M; ++m) {
      tr.add(mp.a0 + m, 1.0);
      tr.add(mp.v_re(m), -2.0 * lp.v[m].real());
      tr.add(mp.v_im(m), -2.0 * lp.v[m].imag());
    }
    tr.constant = lp.v.squaredNorm();
    tr.add(mp.rho_a, -1.0);
    P.add_linear(normalized(std::move(tr)));
  }

  // One rank-one lift: PSD block tying U to f, the mixed block tying
  // (A, f, c) to (Phi, r(w)), and the two slacked trust tangents.
  const auto emit_lift = [&](const LiftBlock& b, const Eigen::MatrixXcd& bhat,
                             int jw, const Eigen::VectorXcd& fbar,
                             const Eigen::VectorXcd& rbar) {
    const int l1 = P.add_lmi(M + 1);
    for (int m = 0; m < M; ++m) {
      P.lmi_add_term(l1, m, m, mp.u_diag(b, m), 1.0);
      for (int m2 = m + 1; m2 < M; ++m2) {
        const int re = mp.u_off(b, m, m2);
        P.lmi_add_term(l1, m, m2, re, 1.0);
        P.lmi_add_term(l1, m, m2, re + 1, kI);
      }
      P.lmi_add_term(l1, m, M, mp.f_re(b, m), 1.0);
      P.lmi_add_term(l1, m, M, mp.f_im(b, m), kI);
    }
    P.lmi_add_const(l1, M, M, 1.0);

    const int l2 = P.add_lmi(2 * M + 1);
    for (int m = 0; m < M; ++m) {
      if (kn.fixed_phases)
        P.lmi_add_const(l2, m, m, 1.0 + 1e-6);
      else
        P.lmi_add_term(l2, m, m, mp.a0 + m, 1.0);
      P.lmi_add_term(l2, m, M, mp.f_re(b, m), 1.0);
      P.lmi_add_term(l2, m, M, mp.f_im(b, m), kI);
      if (kn.fixed_phases) {
        P.lmi_add_const(l2, m, M + 1 + m, lp.v[m]);
      } else {
        P.lmi_add_term(l2, m, M + 1 + m, mp.v_re(m), 1.0);
        P.lmi_add_term(l2, m, M + 1 + m, mp.v_im(m), kI);
      }
      for (int t = 0; t < NT; ++t) {
        const complex<double> z = std::conj(bhat(m, t));
        P.lmi_add_term(l2, M, M + 1 + m, mp.w_re(jw, t), z);
        P.lmi_add_term(l2, M, M + 1 + m, mp.w_im(jw, t), -kI * z);
      }
      P.lmi_add_const(l2, M + 1 + m, M + 1 + m, 1.0);
    }
    P.lmi_add_term(l2, M, M, b.c, 1.0);

    AffineExpr tru;
    for (int m = 0; m < M; ++m) {
      tru.add(mp.u_diag(b, m), 1.0);
      tru.add(mp.f_re(b, m), -2.0 * fbar[m].real());
      tru.add(mp.f_im(b, m), -2.0 * fbar[m].imag());
    }
    tru.constant = fbar.squaredNorm();
    tru.add(b.rho_u, -1.0);
    P.add_linear(normalized(std::move(tru)));

    AffineExpr cr;
    cr.add(b.c, 1.0);
    const Eigen::RowVectorXcd y = rbar.adjoint() * bhat;
    for (int t = 0; t < NT; ++t) {
      cr.add(mp.w_re(jw, t), -2.0 * y[t].real());
      cr.add(mp.w_im(jw, t), 2.0 * y[t].imag());
    }
    cr.constant = rbar.squaredNorm();
    cr.add(b.rho_d, -1.0);
    P.add_linear(normalized(std::move(cr)));
  };
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j)
      emit_lift(mp.pu[k * K + j], lp.bhat_pu[k], j, lp.fhat_pu[k].col(j),
                lp.rhat_pu[k].col(j));
  for (int k = 0; k < n_su_lifts; ++k)
    emit_lift(mp.su[k], lp.bhat_su, k, lp.fhat_su.col(k), lp.rhat_su.col(k));

  // Slacks stay nonnegative.
  if (mp.rho_a >= 0) P.add_linear(AffineExpr::var(mp.rho_a, -1.0));
  for (const auto& b : mp.pu) {
    P.add_linear(AffineExpr::var(b.rho_u, -1.0));
    P.add_linear(AffineExpr::var(b.rho_d, -1.0));
  }
  for (const auto& b : mp.su) {
    P.add_linear(AffineExpr::var(b.rho_u, -1.0));
    P.add_linear(AffineExpr::var(b.rho_d, -1.0));
  }

  // Received powers = masked quadratic forms of the lifts (noise units).
  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < K; ++j) {
        AffineExpr e = mask_quadform(mp, mp.pu[k * K + j], lp.masks[q],
                                     lp.alpha_pu[k]);
        e.add(mp.p_pu_idx(q, k, j), -mp.p_pu_scale(q, k));
        P.add_equality(normalized(std::move(e)));
      }
  if (kn.with_qos)
    for (int q = 0; q < NL; ++q) {
      AffineExpr e;
      for (int k = 0; k < K; ++k) {
        AffineExpr part = mask_quadform(mp, mp.su[k], lp.masks[q], lp.alpha_su);
        for (auto& t : part.terms) e.terms.push_back(t);
      }
      e.add(mp.p_su0 + q, -mp.z_su[q]);
      P.add_equality(normalized(std::move(e)));
    }

  // Rate hypographs: t_qk <= ln(1 + sum_j P_qkj).
  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k) {
      AffineExpr u(1.0);
      for (int j = 0; j < K; ++j)
        u.add(mp.p_pu_idx(q, k, j), mp.p_pu_scale(q, k));
      P.add_log_hypograph(AffineExpr::var(mp.t_qk(q, k)), std::move(u));
    }

  if (kn.with_qos) {
    // Ascending level order.
    for (int u = 0; u + 1 < NL; ++u) {
      AffineExpr e;
      e.add(mp.p_su0 + u, mp.z_su[u]);
      e.add(mp.p_su0 + u + 1, -mp.z_su[u + 1]);
      P.add_linear(normalized(std::move(e)));
    }
    // Aggregate error budget.
    {
      AffineExpr e(-static_cast<double>(NL) * kn.p_e_max);
      for (int u = 0; u < NP; ++u) {
        e.add(mp.chain(u, SubproblemMap::kGamma), 1.0);
        e.add(mp.chain(u, SubproblemMap::kAlarm), 1.0);
      }
      P.add_linear(std::move(e));
    }
    for (int u = 0; u < NP; ++u) {
      const PairAnchor& a = lp.pairs[u];
      const int gma = mp.chain(u, SubproblemMap::kGamma);
      const int xi = mp.chain(u, SubproblemMap::kXi);
      const int em1 = mp.chain(u, SubproblemMap::kEpsM1);
      const int em2 = mp.chain(u, SubproblemMap::kEpsM2);
      const int alm = mp.chain(u, SubproblemMap::kAlarm);
      const int zet = mp.chain(u, SubproblemMap::kZeta);
      const int ea1 = mp.chain(u, SubproblemMap::kEpsA1);
      const int ea2 = mp.chain(u, SubproblemMap::kEpsA2);
      const double scm1 = mp.chain_sc(u, SubproblemMap::kEpsM1);
      const double scm2 = mp.chain_sc(u, SubproblemMap::kEpsM2);
      const double sca1 = mp.chain_sc(u, SubproblemMap::kEpsA1);
      const double sca2 = mp.chain_sc(u, SubproblemMap::kEpsA2);
      const double scz = mp.chain_sc(u, SubproblemMap::kZeta);
      const int p_lo = mp.p_su0 + u, p_hi = mp.p_su0 + u + 1;
      const double z_lo = mp.z_su[u], z_hi = mp.z_su[u + 1];

      // Miss side: 1 - gamma <= xi exp(-L eps1), xi <= PES(L eps2),
      // eps1 >= gap/(2 y_hi) >= eps2, all linearized from above.
      {
        AffineExpr t(std::log1p(-a.miss) + a.miss / (1.0 - a.miss));
        t.add(gma, 1.0 / (a.miss - 1.0));
        t.add(em1, static_cast<double>(L) * scm1);
        P.add_log_hypograph(std::move(t), AffineExpr::var(xi, a.pes_miss));
      }
      {
        const double gp = pes_slope(L, a.eps_miss);
        AffineExpr e(-a.pes_miss + gp * a.eps_miss);
        e.add(xi, a.pes_miss);
        e.add(em2, -gp * scm2);
        P.add_linear(normalized(std::move(e)));
      }
      {
        const double s0 = a.y_hi;
        AffineExpr sq(-1.0 / s0);
        sq.add(em1, scm1 / s0);
        sq.add(p_hi, -z_hi / s0);
        AffineExpr lin((a.eps_miss * a.eps_miss + a.y_hi * a.y_hi -
                        2.0 * a.y_hi) /
                       (s0 * s0));
        lin.add(p_hi, (z_hi - 2.0 * a.y_hi * z_hi) / (s0 * s0));
        lin.add(p_lo, -z_lo / (s0 * s0));
        lin.add(em1, -2.0 * a.eps_miss * scm1 / (s0 * s0));
        P.add_quadratic({std::move(sq)}, std::move(lin));
      }
      {
        const double s0 = a.y_hi;
        AffineExpr sq(1.0 / s0);
        sq.add(em2, scm2 / s0);
        sq.add(p_hi, z_hi / s0);
        AffineExpr lin((a.eps_miss * a.eps_miss + a.y_hi * a.y_hi -
                        2.0 * a.y_hi) /
                       (s0 * s0));
        lin.add(p_hi, (-z_hi - 2.0 * a.y_hi * z_hi) / (s0 * s0));
        lin.add(p_lo, z_lo / (s0 * s0));
        lin.add(em2, -2.0 * a.eps_miss * scm2 / (s0 * s0));
        P.add_quadratic({std::move(sq)}, std::move(lin));
      }
      P.add_linear(AffineExpr::var(em2, -1.0));

      // Alarm side in log form: ln Gamma >= zeta - L eps1 (exact hypograph),
      // zeta >= ln PES(L eps2) via the concave tangent, eps1 <= gap/(2 y_lo)
      // <= eps2.
      {
        AffineExpr t;
        t.add(zet, scz);
        t.add(ea1, -static_cast<double>(L) * sca1);
        P.add_log_hypograph(std::move(t), AffineExpr::var(alm));
      }
      {
        const double sp = log_pes_slope(L, a.eps_alarm);
        AffineExpr e(a.log_pes_alarm - sp * a.eps_alarm);
        e.add(ea2, sp * sca2);
        e.add(zet, -scz);
        P.add_linear(normalized(std::move(e)));
      }
      {
        const double s0 = a.y_lo * std::max(1.0, a.eps_alarm);
        AffineExpr sq(1.0 / s0);
        sq.add(ea1, sca1 / s0);
        sq.add(p_lo, z_lo / s0);
        AffineExpr lin((a.eps_alarm * a.eps_alarm + a.y_lo * a.y_lo -
                        2.0 * a.y_lo) /
                       (s0 * s0));
        lin.add(p_hi, -z_hi / (s0 * s0));
        lin.add(p_lo, (z_lo - 2.0 * a.y_lo * z_lo) / (s0 * s0));
        lin.add(ea1, -2.0 * a.eps_alarm * sca1 / (s0 * s0));
        P.add_quadratic({std::move(sq)}, std::move(lin));
      }
      {
        const double s0 = a.y_lo * std::max(1.0, a.eps_alarm);
        AffineExpr sq(-1.0 / s0);
        sq.add(ea2, sca2 / s0);
        sq.add(p_lo, -z_lo / s0);
        AffineExpr lin((a.eps_alarm * a.eps_alarm + a.y_lo * a.y_lo -
                        2.0 * a.y_lo) /
                       (s0 * s0));
        lin.add(p_hi, z_hi / (s0 * s0));
        lin.add(p_lo, (-z_lo - 2.0 * a.y_lo * z_lo) / (s0 * s0));
        lin.add(ea2, -2.0 * a.eps_alarm * sca2 / (s0 * s0));
        P.add_quadratic({std::move(sq)}, std::move(lin));
      }
      P.add_linear(AffineExpr::var(ea1, -1.0));

      // Miss terms stay a valid probability bound.
      P.add_linear(AffineExpr(-(1.0 - 1e-6)).add(gma, 1.0));
    }
  }

  P.check();
  return sp;
}

Eigen::VectorXd interior_start(const LinearizationPoint& lp,
                               const Subproblem& sp,
                               const SubproblemKnobs& kn) {
  const auto& mp = sp.map;
  const int M = mp.n_irs, K = mp.n_beams, NT = mp.n_tx, NL = mp.n_lev;
  const int L = lp.frame_len;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(mp.n_vars);

  for (int j = 0; j < K; ++j)
    for (int t = 0; t < NT; ++t) {
      x[mp.w_re(j, t)] = lp.w(t, j).real();
      x[mp.w_im(j, t)] = lp.w(t, j).imag();
    }
  if (!mp.fixed_phases)
    for (int m = 0; m < M; ++m) {
      x[mp.v_re(m)] = lp.v[m].real();
      x[mp.v_im(m)] = lp.v[m].imag();
      x[mp.a0 + m] = std::max(std::norm(lp.v[m]), 1.0) + 1e-6;
    }

  const double du = lp.lift_delta;
  const auto fill_lift = [&](const LiftBlock& b, const Eigen::VectorXcd& fbar,
                             const Eigen::VectorXcd& rbar) {
    for (int m = 0; m < M; ++m) {
      x[mp.u_diag(b, m)] = std::norm(fbar[m]) + du;
      for (int m2 = m + 1; m2 < M; ++m2) {
        const complex<double> uq = fbar[m] * std::conj(fbar[m2]);
        x[mp.u_off(b, m, m2)] = uq.real();
        x[mp.u_off(b, m, m2) + 1] = uq.imag();
      }
      x[mp.f_re(b, m)] = fbar[m].real();
      x[mp.f_im(b, m)] = fbar[m].imag();
    }
    const double dc = 1e-6 * (1.0 + rbar.squaredNorm());
    x[b.c] = rbar.squaredNorm() + dc;
    x[b.rho_u] = M * du + 1e-7 * (1.0 + M * du);
    x[b.rho_d] = dc + 1e-7 * (1.0 + dc);
  };
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j)
      fill_lift(mp.pu[k * K + j], lp.fhat_pu[k].col(j), lp.rhat_pu[k].col(j));
  for (int k = 0; k < static_cast<int>(mp.su.size()); ++k)
    fill_lift(mp.su[k], lp.fhat_su.col(k), lp.rhat_su.col(k));
  if (mp.rho_a >= 0) {
    double gap = 0.0;
    for (int m = 0; m < M; ++m) gap += x[mp.a0 + m] - std::norm(lp.v[m]);
    x[mp.rho_a] = gap + 1e-7 * (1.0 + gap);
  }

  // Powers recomputed from the inflated lifts keep the equality rows exact.
  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < K; ++j)
        x[mp.p_pu_idx(q, k, j)] =
            lp.alpha_pu[k] *
            mask_quadform_value(mp, mp.pu[k * K + j], lp.masks[q], x) /
            mp.p_pu_scale(q, k);
  Eigen::VectorXd p_su0 = Eigen::VectorXd::Zero(NL);
  if (mp.with_qos)
    for (int q = 0; q < NL; ++q) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k)
        acc += mask_quadform_value(mp, mp.su[k], lp.masks[q], x);
      p_su0[q] = lp.alpha_su * acc;
      x[mp.p_su0 + q] = p_su0[q] / mp.z_su[q];
    }

  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k) {
      double s = 1.0;
      for (int j = 0; j < K; ++j)
        s += mp.p_pu_scale(q, k) * x[mp.p_pu_idx(q, k, j)];
      const double lu = std::log(s);
      x[mp.t_qk(q, k)] = lu - 1e-6 * std::max(1.0, std::abs(lu));
    }

  if (mp.with_qos) {
    const double dm = 1e-6;
    // Cushions spend at most a quarter of the error-budget headroom so the
    // start stays inside the total-error row whenever the anchor does.
    double used = 0.0;
    for (const auto& a : lp.pairs) used += a.miss + a.alarm;
    const double avail = NL * kn.p_e_max - used;
    const double budget =
        std::max(0.0, 0.25 * avail) / std::max(1, 2 * mp.n_pairs);

    for (int u = 0; u < mp.n_pairs; ++u) {
      const PairAnchor& a = lp.pairs[u];
      const double half_gap = std::max(0.0, (p_su0[u + 1] - p_su0[u]) / 2);
      const double em = half_gap / (p_su0[u + 1] + 1.0);
      const double ea = half_gap / (p_su0[u] + 1.0);

      // Alarm-side ratios can be huge; cap the relative perturbation so the
      // induced exp(L eps) factor and the budget spend both stay small.
      const double mea = std::max(ea, 1e-12);
      const double alarm0 = std::exp(log_partial_exp_sum(L, L * ea) - L * ea);
      double da = std::min(dm, 0.05 / (L * mea));
      da = std::min(da, std::log1p(budget / std::max(alarm0, 1e-300)) /
                            (L * mea));
      da = std::max(da, 1e-10);

      const double em1 = em * (1.0 + dm), em2 = em * (1.0 - dm);
      const double ea1 = ea * (1.0 - da), ea2 = ea * (1.0 + da);
      x[mp.chain(u, SubproblemMap::kEpsM1)] =
          em1 / mp.chain_sc(u, SubproblemMap::kEpsM1);
      x[mp.chain(u, SubproblemMap::kEpsM2)] =
          em2 / mp.chain_sc(u, SubproblemMap::kEpsM2);
      x[mp.chain(u, SubproblemMap::kEpsA1)] =
          ea1 / mp.chain_sc(u, SubproblemMap::kEpsA1);
      x[mp.chain(u, SubproblemMap::kEpsA2)] =
          ea2 / mp.chain_sc(u, SubproblemMap::kEpsA2);

      // Miss corridor: the hypograph needs xi above (1-gamma) e^{L eps1},
      // the tangent row needs xi below the PES chord; the gamma cushion must
      // out-spend both eps perturbations for the corridor to open.
      const double miss0 =
          -std::expm1(log_partial_exp_sum(L, L * em) - L * em);
      const double gp = pes_slope(L, a.eps_miss);
      const double dgrel =
          std::max(std::min(1e-4, budget / std::max(1.0 - miss0, 1e-300)),
                   2.0 * L * em * dm + 2e-5);
      double g0 = std::max(a.miss, miss0) + dgrel * (1.0 - miss0);
      const double hi_xi =
          (a.pes_miss + gp * (em2 - a.eps_miss)) / a.pes_miss;
      double lo_xi = 0.0;
      for (int it = 0; it < 40; ++it) {
        const double t = std::log1p(-a.miss) +
                         (g0 - a.miss) / (a.miss - 1.0) + L * em1;
        lo_xi = std::exp(t) / a.pes_miss;
        if (lo_xi * (1.0 + 1e-9) < hi_xi) break;
        g0 += std::max(1e-12, 2.0 * (1.0 - g0) * (lo_xi / hi_xi - 1.0));
        if (g0 > 1.0 - 2e-6) {
          g0 = 1.0 - 2e-6;
          break;
        }
      }
      x[mp.chain(u, SubproblemMap::kGamma)] = g0;
      x[mp.chain(u, SubproblemMap::kXi)] =
          std::sqrt(std::max(lo_xi, 1e-12) * hi_xi);

      const double sp_ = log_pes_slope(L, a.eps_alarm);
      const double rhs_c2 =
          a.log_pes_alarm + sp_ * (ea2 - a.eps_alarm);
      const double zeta0 = std::max(rhs_c2, log_partial_exp_sum(L, L * ea2)) +
                           1e-6 * (1.0 + std::abs(rhs_c2));
      x[mp.chain(u, SubproblemMap::kZeta)] =
          zeta0 / mp.chain_sc(u, SubproblemMap::kZeta);
      // No upper clamp: when the alarm term sits near one, zeta - L eps1 can
      // be a hair above zero and the hypograph needs Gamma to follow it.
      // Floor far-below-threshold pairs: the hypograph row is slack upward,
      // the budget cost is 1e-8, and without the floor exp() underflows to a
      // subnormal whose barrier gradient 1/Gamma overflows.
      x[mp.chain(u, SubproblemMap::kAlarm)] =
          std::max(std::exp(zeta0 - L * ea1), 1e-8) * (1.0 + 1e-6);
    }
  }
  return x;
}

SolvedPoint extract_point(const LinearizationPoint& lp, const Subproblem& sp,
                          const Eigen::VectorXd& x, double chi) {
  const auto& mp = sp.map;
  const int M = mp.n_irs, K = mp.n_beams, NT = mp.n_tx, NL = mp.n_lev;
  SolvedPoint pt;
  pt.w.resize(NT, K);
  for (int j = 0; j < K; ++j)
    for (int t = 0; t < NT; ++t)
      pt.w(t, j) = {x[mp.w_re(j, t)], x[mp.w_im(j, t)]};
  pt.v.resize(M);
  if (mp.fixed_phases)
    pt.v = lp.v;
  else
    for (int m = 0; m < M; ++m) pt.v[m] = {x[mp.v_re(m)], x[mp.v_im(m)]};

  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k) {
      double d_tau = 1.0, intf = 0.0;
      for (int j = 0; j < K; ++j)
        if (j != k) {
          d_tau += lp.p_pu(q * K + k, j);
          intf += mp.p_pu_scale(q, k) * x[mp.p_pu_idx(q, k, j)];
        }
      pt.surrogate += (x[mp.t_qk(q, k)] - std::log(d_tau) -
                       (intf - (d_tau - 1.0)) / d_tau) /
                      (NL * kLn2);
    }

  double slack = mp.rho_a >= 0 ? x[mp.rho_a] : 0.0;
  const auto lift_gap = [&](const LiftBlock& b, const Eigen::MatrixXcd& bhat,
                            int jw) {
    Eigen::VectorXcd f(M), r;
    for (int m = 0; m < M; ++m) f[m] = {x[mp.f_re(b, m)], x[mp.f_im(b, m)]};
    r = bhat * pt.w.col(jw);
    double un = 0.0, gap = 0.0;
    for (int m = 0; m < M; ++m) {
      un += std::norm(x[mp.u_diag(b, m)]);
      gap += std::norm(x[mp.u_diag(b, m)] - std::norm(f[m]));
      for (int m2 = m + 1; m2 < M; ++m2) {
        const complex<double> u{x[mp.u_off(b, m, m2)],
                                x[mp.u_off(b, m, m2) + 1]};
        un += 2.0 * std::norm(u);
        gap += 2.0 * std::norm(u - f[m] * std::conj(f[m2]));
      }
    }
    // hat units put a fully loaded lift at O(1); flooring the normalizers
    // there keeps near-zero beams from reporting an O(1) "relative" defect
    double g = std::sqrt(gap) / std::max(std::sqrt(un), 1.0);
    Eigen::VectorXcd fr = r;
    fr.array() *= pt.v.array();
    g = std::max(g, (f - fr).norm() / std::max(f.norm(), 1.0));
    g = std::max(g, std::abs(x[b.c] - r.squaredNorm()) /
                        std::max(r.squaredNorm(), 1.0));
    return g;
  };
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j) {
      const auto& b = mp.pu[k * K + j];
      slack += x[b.rho_u] + x[b.rho_d];
      pt.lift_gap = std::max(pt.lift_gap, lift_gap(b, lp.bhat_pu[k], j));
    }
  for (int k = 0; k < static_cast<int>(mp.su.size()); ++k) {
    const auto& b = mp.su[k];
    slack += x[b.rho_u] + x[b.rho_d];
    pt.lift_gap = std::max(pt.lift_gap, lift_gap(b, lp.bhat_su, k));
  }
  if (!mp.fixed_phases)
    for (int m = 0; m < M; ++m)
      pt.lift_gap = std::max(
          pt.lift_gap, std::abs(x[mp.a0 + m] - std::norm(pt.v[m])));
  pt.slack_total = slack;
  pt.penalty = chi * slack;
  return pt;
}

double chain_residual(const LinearizationPoint& lp, const Subproblem& sp,
                      const Eigen::VectorXd& x, double p_e_max) {
  const auto& mp = sp.map;
  const int K = mp.n_beams, NL = mp.n_lev;
  const int L = lp.frame_len;
  double worst = 0.0;
  const auto bump = [&](double r) { worst = std::max(worst, r); };

  for (int q = 0; q < NL; ++q)
    for (int k = 0; k < K; ++k) {
      double s = 1.0;
      for (int j = 0; j < K; ++j) {
        const double p = mp.p_pu_scale(q, k) * x[mp.p_pu_idx(q, k, j)];
        s += p;
        // lifted power vs the quadratic form of the lift itself
        const double quad =
            lp.alpha_pu[k] *
            mask_quadform_value(mp, mp.pu[k * K + j], lp.masks[q], x);
        bump(std::abs(quad - p) / (1.0 + std::abs(p)));
      }
      bump(x[mp.t_qk(q, k)] - std::log(s));
    }
  if (!mp.with_qos) return worst;

  Eigen::VectorXd lev(NL);
  for (int q = 0; q < NL; ++q) {
    lev[q] = mp.z_su[q] * x[mp.p_su0 + q];
    double quad = 0.0;
    for (int k = 0; k < K; ++k)
      quad += lp.alpha_su * mask_quadform_value(mp, mp.su[k], lp.masks[q], x);
    bump(std::abs(quad - lev[q]) / (1.0 + lev[q]));
  }
  for (int u = 0; u + 1 < NL; ++u)
    bump((lev[u] - lev[u + 1]) / (1.0 + lev[u + 1]));

  double chain_sum = 0.0, exact_sum = 0.0;
  for (int u = 0; u < mp.n_pairs; ++u) {
    const double y_lo = lev[u] + 1.0, y_hi = lev[u + 1] + 1.0;
    const double d = std::max(0.0, (lev[u + 1] - lev[u]) / 2);
    const double g = x[mp.chain(u, SubproblemMap::kGamma)];
    const double xi = mp.chain_sc(u, SubproblemMap::kXi) *
                      x[mp.chain(u, SubproblemMap::kXi)];
    const double em1 = mp.chain_sc(u, SubproblemMap::kEpsM1) *
                       x[mp.chain(u, SubproblemMap::kEpsM1)];
    const double em2 = mp.chain_sc(u, SubproblemMap::kEpsM2) *
                       x[mp.chain(u, SubproblemMap::kEpsM2)];
    const double gm = x[mp.chain(u, SubproblemMap::kAlarm)];
    const double zeta = mp.chain_sc(u, SubproblemMap::kZeta) *
                        x[mp.chain(u, SubproblemMap::kZeta)];
    const double ea1 = mp.chain_sc(u, SubproblemMap::kEpsA1) *
                       x[mp.chain(u, SubproblemMap::kEpsA1)];
    const double ea2 = mp.chain_sc(u, SubproblemMap::kEpsA2) *
                       x[mp.chain(u, SubproblemMap::kEpsA2)];

    bump(std::log1p(-std::min(g, 1.0 - 1e-12)) + L * em1 - std::log(xi));
    bump((xi - partial_exp_sum(L, L * em2)) / std::max(1.0, xi));
    bump((d - em1 * y_hi) / (y_hi * y_hi));
    bump((em2 * y_hi - d) / (y_hi * y_hi));
    const double e_m = d / y_hi;
    const double miss =
        -std::expm1(log_partial_exp_sum(L, L * e_m) - L * e_m);
    bump(miss - g);

    bump(zeta - L * ea1 - std::log(std::max(gm, 1e-300)));
    bump((log_partial_exp_sum(L, L * ea2) - zeta) /
         std::max(1.0, std::abs(zeta)));
    const double s0c = y_lo * std::max(1.0, d / y_lo);
    bump((ea1 * y_lo - d) / (s0c * s0c));
    bump((d - ea2 * y_lo) / (s0c * s0c));
    const double e_a = d / y_lo;
    const double alarm =
        std::exp(log_partial_exp_sum(L, L * e_a) - L * e_a);
    bump(alarm - gm);

    chain_sum += g + gm;
    exact_sum += miss + alarm;
  }
  bump(chain_sum - NL * p_e_max);
  bump(exact_sum - NL * p_e_max);
  return worst;
}

}  // namespace srsim
