#include "srsim/conic/solver.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srsim/gammainc.hpp"

namespace srsim::conic {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Sparse accumulator over a shared dense scratch; a touched list keeps
// clearing O(footprint).  Only one live instance per scratch at a time.
class SparseVec {
 public:
  SparseVec(VectorXd& scratch, std::vector<int>& touched)
      : scratch_(scratch), touched_(touched) {}
  ~SparseVec() { clear(); }

  void add(int var, double v) {
    if (v == 0.0) return;
    if (scratch_(var) == 0.0) touched_.push_back(var);
    scratch_(var) += v;
  }
  void add_expr(const AffineExpr& e, double w) {
    if (w == 0.0) return;
    for (const auto& [v, c] : e.terms) add(v, w * c);
  }
  const std::vector<int>& vars() const { return touched_; }
  double coeff(int var) const { return scratch_(var); }
  void clear() {
    for (int v : touched_) scratch_(v) = 0.0;
    touched_.clear();
  }

 private:
  VectorXd& scratch_;
  std::vector<int>& touched_;
};

// One scalar coefficient of an lmi in expanded Hermitian form: the
// matrix gains a at (p, q); conjugate mirrors are separate atoms.
struct Atom {
  int p = 0, q = 0;
  std::complex<double> a;
};

struct LmiCompiled {
  int dim = 0;
  MatrixXcd s0;
  std::vector<int> vars;                 // ascending
  std::vector<std::vector<Atom>> atoms;  // parallel to vars
};

LmiCompiled compile_lmi(const LmiConstraint& con) {
  LmiCompiled out;
  out.dim = con.dim;
  out.s0 = MatrixXcd::Zero(con.dim, con.dim);
  std::vector<std::pair<int, Atom>> flat;
  for (const auto& t : con.terms) {
    if (t.var < 0) {
      if (t.i == t.j) {
        out.s0(t.i, t.i) += t.coeff.real();
      } else {
        out.s0(t.i, t.j) += t.coeff;
        out.s0(t.j, t.i) += std::conj(t.coeff);
      }
      continue;
    }
    if (t.i == t.j) {
      flat.push_back({t.var, {t.i, t.i, t.coeff.real()}});
    } else {
      flat.push_back({t.var, {t.i, t.j, t.coeff}});
      flat.push_back({t.var, {t.j, t.i, std::conj(t.coeff)}});
    }
  }
  std::stable_sort(flat.begin(), flat.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [v, atom] : flat) {
    if (out.vars.empty() || out.vars.back() != v) {
      out.vars.push_back(v);
      out.atoms.emplace_back();
    }
    out.atoms.back().push_back(atom);
  }
  return out;
}

// Appends var with coefficient matrix I (used by the feasibility phase;
// var ids added here exceed all existing ones so ordering is kept).
void lmi_append_identity_var(LmiCompiled& lm, int var) {
  lm.vars.push_back(var);
  lm.atoms.emplace_back();
  for (int i = 0; i < lm.dim; ++i) lm.atoms.back().push_back({i, i, 1.0});
}

void build_lmi(const LmiCompiled& c, const VectorXd& x, MatrixXcd& s) {
  s = c.s0;
  for (std::size_t k = 0; k < c.vars.size(); ++k) {
    const double xv = x(c.vars[k]);
    if (xv == 0.0) continue;
    for (const Atom& a : c.atoms[k]) s(a.p, a.q) += xv * a.a;
  }
}

// p(y) = sum_{l<n} y^l / l! with y = scale * eps, plus d/deps derivatives.
struct PesEval {
  double p = 0.0, dp = 0.0, d2p = 0.0;
};
PesEval eval_pes(int n, double scale, double eps) {
  const double y = scale * eps;
  PesEval e;
  e.p = srsim::partial_exp_sum(n, y);
  if (n >= 2) e.dp = scale * srsim::partial_exp_sum(n - 1, y);
  if (n >= 3) e.d2p = scale * scale * srsim::partial_exp_sum(n - 2, y);
  return e;
}

// A full working copy of one solve: constraints, group tags and barrier
// parameter.  The feasibility phase extends this with slack variables.
struct Compiled {
  int n = 0;
  int n_groups = 0;
  std::vector<int> group_of;
  int sigma_max = -1;               // feasibility objective var, or -1
  std::vector<int> sigma_of_group;  // group -> slack var, or -1

  std::vector<EqualityConstraint> eqs;
  std::vector<LinearConstraint> lins;
  std::vector<QuadConstraint> quads;
  std::vector<SocConstraint> socs;
  std::vector<LmiCompiled> lmis;
  std::vector<LogHypConstraint> loghyps;
  std::vector<PesConstraint> pes;
  // single local group of each barrier constraint (0 = shared only)
  std::vector<int> lin_g, quad_g, soc_g, lmi_g, loghyp_g, pes_g;

  double nu = 0.0;  // total barrier parameter
  int n_barrier = 0;
};

int footprint_group(const std::vector<int>& groups,
                    std::initializer_list<const AffineExpr*> exprs) {
  int g = 0;
  for (const AffineExpr* e : exprs)
    for (const auto& [v, c] : e->terms) {
      (void)c;
      const int gv = groups[v];
      if (gv == 0) continue;
      if (g == 0)
        g = gv;
      else if (g != gv)
        throw std::logic_error("constraint couples two local groups");
    }
  return g;
}

Compiled compile_base(const Program& p) {
  Compiled c;
  c.n = p.n_vars();
  c.n_groups = p.n_local_groups();
  c.group_of = p.var_groups();
  c.eqs = p.equalities();
  c.lins = p.linears();
  c.quads = p.quadratics();
  c.socs = p.socs();
  c.loghyps = p.log_hypographs();
  c.pes = p.partial_exp_sums();
  for (const auto& lc : p.lmis()) c.lmis.push_back(compile_lmi(lc));

  const auto& g = c.group_of;
  for (const auto& con : c.lins)
    c.lin_g.push_back(footprint_group(g, {&con.e}));
  for (const auto& con : c.quads) {
    int tag = footprint_group(g, {&con.lin});
    for (const auto& s : con.sq) {
      const int t2 = footprint_group(g, {&s});
      if (t2 != 0) tag = t2;
    }
    c.quad_g.push_back(tag);
  }
  for (const auto& con : c.socs) {
    int tag = footprint_group(g, {&con.t});
    for (const auto& s : con.u) {
      const int t2 = footprint_group(g, {&s});
      if (t2 != 0) tag = t2;
    }
    c.soc_g.push_back(tag);
  }
  for (const auto& lm : c.lmis) {
    int tag = 0;
    for (int v : lm.vars) {
      const int gv = g[v];
      if (gv == 0) continue;
      if (tag == 0)
        tag = gv;
      else if (tag != gv)
        throw std::logic_error("constraint couples two local groups");
    }
    c.lmi_g.push_back(tag);
  }
  for (const auto& con : c.loghyps)
    c.loghyp_g.push_back(footprint_group(g, {&con.t, &con.u}));
  for (const auto& con : c.pes)
    c.pes_g.push_back(footprint_group(g, {&con.eps, &con.xi}));

  c.nu = static_cast<double>(c.lins.size()) +
         static_cast<double>(c.quads.size()) +
         2.0 * static_cast<double>(c.socs.size()) +
         2.0 * static_cast<double>(c.loghyps.size()) +
         2.0 * static_cast<double>(c.pes.size());
  for (const auto& lm : c.lmis) c.nu += lm.dim;
  c.n_barrier =
      static_cast<int>(c.lins.size() + c.quads.size() + c.socs.size() +
                       c.lmis.size() + c.loghyps.size() + c.pes.size());
  return c;
}

// Feasibility-phase program: every barrier constraint of group g is
// relaxed by a slack sigma_g local to that group, all slacks are tied
// below a shared sigma_max, and sigma_max is minimized.  A strict
// interior exists iff min sigma_max < 0.  Group-local slacks keep the
// elimination structure intact (lmis stay single-group).
constexpr double kSigmaFloor = 10.0;

Compiled compile_phase1(const Compiled& base, const VectorXd& x0) {
  Compiled c = base;
  std::vector<char> has(c.n_groups + 1, 0);
  for (std::size_t i = 0; i < c.lins.size(); ++i) has[c.lin_g[i]] = 1;
  for (std::size_t i = 0; i < c.quads.size(); ++i) has[c.quad_g[i]] = 1;
  for (std::size_t i = 0; i < c.socs.size(); ++i) has[c.soc_g[i]] = 1;
  for (std::size_t i = 0; i < c.lmis.size(); ++i) has[c.lmi_g[i]] = 1;
  for (std::size_t i = 0; i < c.loghyps.size(); ++i) has[c.loghyp_g[i]] = 1;
  for (std::size_t i = 0; i < c.pes.size(); ++i) has[c.pes_g[i]] = 1;

  c.sigma_of_group.assign(c.n_groups + 1, -1);
  for (int g = 0; g <= c.n_groups; ++g)
    if (has[g]) {
      c.sigma_of_group[g] = c.n++;
      c.group_of.push_back(g);
    }
  c.sigma_max = c.n++;
  c.group_of.push_back(0);

  const auto sig = [&](int g) { return c.sigma_of_group[g]; };
  for (std::size_t i = 0; i < c.lins.size(); ++i)
    c.lins[i].e.add(sig(c.lin_g[i]), -1.0);
  for (std::size_t i = 0; i < c.quads.size(); ++i)
    c.quads[i].lin.add(sig(c.quad_g[i]), -1.0);
  for (std::size_t i = 0; i < c.socs.size(); ++i)
    c.socs[i].t.add(sig(c.soc_g[i]), 1.0);
  for (std::size_t i = 0; i < c.lmis.size(); ++i)
    lmi_append_identity_var(c.lmis[i], sig(c.lmi_g[i]));
  for (std::size_t i = 0; i < c.loghyps.size(); ++i)
    c.loghyps[i].u.add(sig(c.loghyp_g[i]), 1.0);
  for (std::size_t i = 0; i < c.pes.size(); ++i)
    c.pes[i].xi.add(sig(c.pes_g[i]), 1.0);

  for (int g = 0; g <= c.n_groups; ++g) {
    if (sig(g) < 0) continue;
    AffineExpr tie;  // sigma_g <= sigma_max
    tie.add(sig(g), 1.0).add(c.sigma_max, -1.0);
    c.lins.push_back({std::move(tie)});
    c.lin_g.push_back(g);
    AffineExpr floor;  // sigma_g >= -kSigmaFloor, bounds the barrier below
    floor.add(sig(g), -1.0);
    floor.constant = -kSigmaFloor;
    c.lins.push_back({std::move(floor)});
    c.lin_g.push_back(g);
    c.nu += 2.0;
    c.n_barrier += 2;
  }
  // Box the original variables around the start.  Phase one puts no
  // objective on them, so a variable entering a one sided barrier term
  // (a free log hypograph argument, say) would otherwise ride it to
  // infinity with a Newton decrement that never decays.
  for (int i = 0; i < base.n; ++i) {
    const double r = 1e4 * (1.0 + std::abs(x0(i)));
    AffineExpr hi;  // x_i <= x0_i + r
    hi.add(i, 1.0);
    hi.constant = -(x0(i) + r);
    c.lins.push_back({std::move(hi)});
    c.lin_g.push_back(c.group_of[i]);
    AffineExpr lo;  // x_i >= x0_i - r
    lo.add(i, -1.0);
    lo.constant = x0(i) - r;
    c.lins.push_back({std::move(lo)});
    c.lin_g.push_back(c.group_of[i]);
    c.nu += 2.0;
    c.n_barrier += 2;
  }
  return c;
}

// Worst violation per group at x; false with a message when no finite
// slack can restore interiority.
bool group_needs(const Compiled& base, const VectorXd& x,
                 std::vector<double>& need, std::string* blocker) {
  need.assign(base.n_groups + 1, 0.0);
  const auto bump = [&](int g, double v) { need[g] = std::max(need[g], v); };
  for (std::size_t i = 0; i < base.lins.size(); ++i)
    bump(base.lin_g[i], base.lins[i].e.eval(x));
  for (std::size_t i = 0; i < base.quads.size(); ++i) {
    double f = base.quads[i].lin.eval(x);
    for (const auto& s : base.quads[i].sq) {
      const double u = s.eval(x);
      f += u * u;
    }
    bump(base.quad_g[i], f);
  }
  for (std::size_t i = 0; i < base.socs.size(); ++i) {
    double un = 0.0;
    for (const auto& u : base.socs[i].u) {
      const double uv = u.eval(x);
      un += uv * uv;
    }
    bump(base.soc_g[i], std::sqrt(un) - base.socs[i].t.eval(x));
  }
  MatrixXcd s;
  for (std::size_t i = 0; i < base.lmis.size(); ++i) {
    build_lmi(base.lmis[i], x, s);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(s, Eigen::EigenvaluesOnly);
    bump(base.lmi_g[i], -es.eigenvalues().minCoeff());
  }
  for (std::size_t i = 0; i < base.loghyps.size(); ++i) {
    const double t = base.loghyps[i].t.eval(x);
    const double u = base.loghyps[i].u.eval(x);
    if (t > 690.0) {
      if (blocker)
        *blocker =
            "log hypograph start is beyond exp overflow; provide a warm start";
      return false;
    }
    bump(base.loghyp_g[i], std::exp(t) - u);
  }
  for (std::size_t i = 0; i < base.pes.size(); ++i) {
    const double eps = base.pes[i].eps.eval(x);
    if (!(eps > 0.0)) {
      if (blocker)
        *blocker = "partial exp sum constraint needs a start with eps > 0";
      return false;
    }
    const PesEval pe = eval_pes(base.pes[i].n_terms, base.pes[i].scale, eps);
    if (!std::isfinite(pe.p)) {
      if (blocker) *blocker = "partial exp sum overflows at the start point";
      return false;
    }
    bump(base.pes_g[i], pe.p - base.pes[i].xi.eval(x));
  }
  for (double v : need)
    if (!std::isfinite(v)) {
      if (blocker) *blocker = "start point yields non-finite constraint values";
      return false;
    }
  return true;
}

// Barrier value at x; +inf outside the domain.
double barrier_value(const Compiled& c, const VectorXd& x, MatrixXcd& smat) {
  double phi = 0.0;
  for (const auto& con : c.lins) {
    const double s = -con.e.eval(x);
    if (!(s > 0.0)) return kInf;
    phi -= std::log(s);
  }
  for (const auto& con : c.quads) {
    double f = con.lin.eval(x);
    for (const auto& sq : con.sq) {
      const double u = sq.eval(x);
      f += u * u;
    }
    if (!(f < 0.0)) return kInf;
    phi -= std::log(-f);
  }
  for (const auto& con : c.socs) {
    const double t = con.t.eval(x);
    if (!(t > 0.0)) return kInf;
    double un = 0.0;
    for (const auto& u : con.u) {
      const double uv = u.eval(x);
      un += uv * uv;
    }
    const double s = t * t - un;
    if (!(s > 0.0)) return kInf;
    phi -= std::log(s);
  }
  for (const auto& lm : c.lmis) {
    build_lmi(lm, x, smat);
    Eigen::LLT<MatrixXcd> llt(smat);
    if (llt.info() != Eigen::Success) return kInf;
    for (int i = 0; i < lm.dim; ++i) {
      const double d = llt.matrixLLT()(i, i).real();
      if (!(d > 0.0)) return kInf;
      phi -= 2.0 * std::log(d);
    }
  }
  for (const auto& con : c.loghyps) {
    const double u = con.u.eval(x);
    if (!(u > 0.0)) return kInf;
    const double s = std::log(u) - con.t.eval(x);
    if (!(s > 0.0)) return kInf;
    phi -= std::log(s) + std::log(u);
  }
  for (const auto& con : c.pes) {
    const double eps = con.eps.eval(x);
    if (!(eps > 0.0)) return kInf;
    const PesEval pe = eval_pes(con.n_terms, con.scale, eps);
    const double s = con.xi.eval(x) - pe.p;
    if (!(s > 0.0) || !std::isfinite(s)) return kInf;
    phi -= std::log(s) + std::log(eps);
  }
  if (!std::isfinite(phi)) return kInf;
  return phi;
}

// Newton engine with per-group block elimination.  Cross coupling
// between a local group and the shared block arises from rank-one
// barrier terms and from the rows of mixed lmi Hessians, so it is kept
// in factored form instead of a dense off-diagonal block.
class Engine {
 public:
  explicit Engine(const Compiled& c) : c_(c) {
    const int n = c.n;
    block_vars_.assign(c.n_groups + 1, {});
    for (int v = 0; v < n; ++v) block_vars_[c.group_of[v]].push_back(v);
    within_.assign(n, 0);
    for (auto& bv : block_vars_)
      for (std::size_t i = 0; i < bv.size(); ++i)
        within_[bv[i]] = static_cast<int>(i);
    ns_ = static_cast<int>(block_vars_[0].size());
    nb_ = c.n_groups;
    hss_.setZero(ns_, ns_);
    hbb_.resize(nb_);
    cross_.resize(nb_);
    for (int b = 0; b < nb_; ++b) {
      const int nbv = static_cast<int>(block_vars_[b + 1].size());
      hbb_[b].setZero(nbv, nbv);
    }
    neq_ = static_cast<int>(c.eqs.size());
    jac_.setZero(neq_, n);
    jrhs_.setZero(neq_);
    for (int r = 0; r < neq_; ++r) {
      for (const auto& [v, cf] : c.eqs[r].e.terms) jac_(r, v) += cf;
      jrhs_(r) = -c.eqs[r].e.constant;
    }
    js_.setZero(neq_, ns_);
    for (int i = 0; i < ns_; ++i) js_.col(i) = jac_.col(block_vars_[0][i]);
    jb_.resize(nb_);
    jb_nonzero_.assign(nb_, false);
    for (int b = 0; b < nb_; ++b) {
      const auto& bv = block_vars_[b + 1];
      jb_[b].setZero(neq_, static_cast<int>(bv.size()));
      for (std::size_t i = 0; i < bv.size(); ++i)
        jb_[b].col(static_cast<int>(i)) = jac_.col(bv[i]);
      jb_nonzero_[b] = jb_[b].cwiseAbs().sum() > 0.0;
    }
    scratch_.setZero(n);
    grad_.setZero(n);
    dx_.setZero(n);
    if (neq_ > 0) jcod_.compute(jac_);
  }

  double barrier(const VectorXd& x) { return barrier_value(c_, x, smat_); }

  double merit(double t, const VectorXd& obj, const VectorXd& x) {
    const double phi = barrier(x);
    if (!std::isfinite(phi)) return kInf;
    return t * obj.dot(x) + phi;
  }

  // Moves x onto the equality manifold; false when rows are inconsistent.
  bool project_equalities(VectorXd& x, double tol) {
    if (neq_ == 0) return true;
    const double btol =
        std::max(tol, 1e-9 * (1.0 + jrhs_.cwiseAbs().maxCoeff()));
    VectorXd r = jrhs_ - jac_ * x;
    x += jcod_.solve(r);
    r = jrhs_ - jac_ * x;
    return r.cwiseAbs().maxCoeff() <= btol;
  }

  bool has_equalities() const { return neq_ > 0; }

  // Pins x back onto Jx = b after a step.  Residual left to the kkt rhs
  // gets amplified by the multipliers at large barrier weight, so the
  // iterate is kept on the manifold to machine precision instead.
  void reproject(VectorXd& x, VectorXd& scratch) {
    if (neq_ == 0) return;
    scratch = x + jcod_.solve(VectorXd(jrhs_ - jac_ * x));
    if (std::isfinite(barrier(scratch))) x.swap(scratch);
  }

  // Computes the Newton direction at x for weight t.  Returns the squared
  // decrement, or a negative value when every factorization attempt fails.
  double newton_step(double t, const VectorXd& obj, const VectorXd& x) {
    derivs(x);
    gwork_ = grad_ + t * obj;
    if (neq_ > 0) rp_ = jrhs_ - jac_ * x;
    double eta = 1e-12;
    for (int attempt = 0; attempt < 8; ++attempt) {
      if (solve_kkt(gwork_, eta)) {
        // dx' H dx from the block storage: the algebraic identity
        // -g'dx - rp'mu is swamped by roundoff once the multipliers
        // grow with t, while the quadratic form stays nonnegative.
        const double lam2 = quad_form(dx_);
        const double slop = 1e-9 * (1.0 + std::abs(lam2));
        if (lam2 >= -slop) return std::max(lam2, 0.0);
      }
      eta *= 100.0;
    }
    return -1.0;
  }

  const VectorXd& direction() const { return dx_; }

  // dx'H dx from the block storage (lower triangles plus the factored
  // cross terms).  Unlike -g'dx this stays clean when the gradient on
  // equality-pinned variables is large and dx carries solve noise.
  double quad_form(const VectorXd& dx) const {
    double q = 0.0;
    VectorXd dxs;
    gather(dx, block_vars_[0], dxs);
    if (ns_ > 0)
      q += dxs.dot(hss_.selfadjointView<Eigen::Lower>() * dxs);
    VectorXd dxb;
    for (int b = 0; b < nb_; ++b) {
      if (block_vars_[b + 1].empty()) continue;
      gather(dx, block_vars_[b + 1], dxb);
      q += dxb.dot(hbb_[b].selfadjointView<Eigen::Lower>() * dxb);
      for (const Cross& cr : cross_[b])
        q += 2.0 * cr.w * cr.u.dot(dxb) * cr.v.dot(dxs);
    }
    return q;
  }

 private:
  struct Cross {
    VectorXd u;  // local side
    VectorXd v;  // shared side
    double w = 0.0;
  };

  void gather(const VectorXd& full, const std::vector<int>& idx,
              VectorXd& out) const {
    out.resize(static_cast<int>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
      out(static_cast<int>(i)) = full(idx[i]);
  }

  // One rank-one barrier term w * g g^T routed into the block storage.
  // Only the lower triangles of hss_/hbb_ are maintained.
  void rank1(const SparseVec& g, double w) {
    if (w == 0.0 || g.vars().empty()) return;
    int lg = 0;
    for (int v : g.vars()) {
      const int gv = c_.group_of[v];
      if (gv != 0) {
        lg = gv;
        break;
      }
    }
    bool mixed = false;
    if (lg != 0)
      for (int v : g.vars())
        if (c_.group_of[v] == 0) {
          mixed = true;
          break;
        }
    if (!mixed) {
      buf_.clear();
      for (int v : g.vars()) buf_.push_back({within_[v], g.coeff(v)});
      scatter_rank1(lg == 0 ? hss_ : hbb_[lg - 1], buf_, w);
      return;
    }
    Cross cr;
    cr.w = w;
    cr.u.setZero(static_cast<int>(block_vars_[lg].size()));
    cr.v.setZero(ns_);
    buf_.clear();
    buf2_.clear();
    for (int v : g.vars()) {
      const std::pair<int, double> item{within_[v], g.coeff(v)};
      if (c_.group_of[v] == 0) {
        cr.v(item.first) = item.second;
        buf2_.push_back(item);
      } else {
        cr.u(item.first) = item.second;
        buf_.push_back(item);
      }
    }
    scatter_rank1(hbb_[lg - 1], buf_, w);
    scatter_rank1(hss_, buf2_, w);
    cross_[lg - 1].push_back(std::move(cr));
  }

  void scatter_rank1(MatrixXd& m,
                     const std::vector<std::pair<int, double>>& items,
                     double w) {
    if (items.empty()) return;
    // Dense rank update beats scattered writes once the footprint covers
    // a sizable fraction of the block.
    if (static_cast<Eigen::Index>(2 * items.size()) >= m.rows()) {
      dense_tmp_.setZero(m.rows());
      for (const auto& [i, ci] : items) dense_tmp_(i) = ci;
      m.selfadjointView<Eigen::Lower>().rankUpdate(dense_tmp_, w);
      return;
    }
    for (std::size_t a = 0; a < items.size(); ++a) {
      const auto [ia, ca] = items[a];
      m(ia, ia) += w * ca * ca;
      for (std::size_t b = a + 1; b < items.size(); ++b) {
        const auto [ib, cb] = items[b];
        if (ia >= ib)
          m(ia, ib) += w * ca * cb;
        else
          m(ib, ia) += w * ca * cb;
      }
    }
  }

  // Direct write for lmi entries; both vars share one group by contract.
  void addH(int i, int j, double v) {
    if (v == 0.0) return;
    const int g = c_.group_of[i];
    MatrixXd& m = (g == 0) ? hss_ : hbb_[g - 1];
    int li = within_[i], lj = within_[j];
    if (li < lj) std::swap(li, lj);
    m(li, lj) += v;
  }

  void derivs(const VectorXd& x) {
    grad_.setZero();
    hss_.setZero();
    for (auto& m : hbb_) m.setZero();
    for (auto& cl : cross_) cl.clear();
    SparseVec g(scratch_, touched_);

    for (const auto& con : c_.lins) {
      const double s = -con.e.eval(x);
      g.add_expr(con.e, 1.0);
      for (int v : g.vars()) grad_(v) += g.coeff(v) / s;
      rank1(g, 1.0 / (s * s));
      g.clear();
    }

    for (const auto& con : c_.quads) {
      double f = con.lin.eval(x);
      for (const auto& sq : con.sq) {
        const double u = sq.eval(x);
        f += u * u;
      }
      const double s = -f;
      g.add_expr(con.lin, 1.0);
      for (const auto& sq : con.sq) g.add_expr(sq, 2.0 * sq.eval(x));
      for (int v : g.vars()) grad_(v) += g.coeff(v) / s;
      rank1(g, 1.0 / (s * s));
      g.clear();
      for (const auto& sq : con.sq) {
        g.add_expr(sq, 1.0);
        rank1(g, 2.0 / s);
        g.clear();
      }
    }

    for (const auto& con : c_.socs) {
      const double t = con.t.eval(x);
      double un = 0.0;
      for (const auto& u : con.u) {
        const double uv = u.eval(x);
        un += uv * uv;
      }
      const double s = t * t - un;
      g.add_expr(con.t, 2.0 * t);
      for (const auto& u : con.u) g.add_expr(u, -2.0 * u.eval(x));
      for (int v : g.vars()) grad_(v) -= g.coeff(v) / s;
      rank1(g, 1.0 / (s * s));
      g.clear();
      g.add_expr(con.t, 1.0);
      rank1(g, -2.0 / s);
      g.clear();
      for (const auto& u : con.u) {
        g.add_expr(u, 1.0);
        rank1(g, 2.0 / s);
        g.clear();
      }
    }

    for (std::size_t li = 0; li < c_.lmis.size(); ++li) {
      const auto& lm = c_.lmis[li];
      build_lmi(lm, x, smat_);
      Eigen::LLT<MatrixXcd> llt(smat_);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("lmi left the cone during derivative eval");
      const MatrixXcd w = llt.solve(MatrixXcd::Identity(lm.dim, lm.dim));
      const int nv = static_cast<int>(lm.vars.size());
      for (int a = 0; a < nv; ++a) {
        std::complex<double> acc = 0.0;
        for (const Atom& at : lm.atoms[a]) acc += at.a * w(at.q, at.p);
        grad_(lm.vars[a]) -= acc.real();
      }
      const int tag = c_.lmi_g[li];
      bool mixed = false;
      if (tag != 0)
        for (int v : lm.vars)
          if (c_.group_of[v] == 0) {
            mixed = true;
            break;
          }
      const int nloc =
          mixed ? static_cast<int>(block_vars_[tag].size()) : 0;
      if (mixed) {
        if (cbuf_.rows() < nloc || cbuf_.cols() < ns_)
          cbuf_.resize(std::max<Eigen::Index>(nloc, cbuf_.rows()), ns_);
        crow_used_.assign(nloc, 0);
      }
      // d2/dxa dxb of -logdet S is Tr(W Fa W Fb); per atom pair the trace
      // collapses to W(qb, pa) * W(qa, pb).
      for (int a = 0; a < nv; ++a)
        for (int b = a; b < nv; ++b) {
          std::complex<double> acc = 0.0;
          for (const Atom& aa : lm.atoms[a])
            for (const Atom& ab : lm.atoms[b])
              acc += aa.a * ab.a * w(ab.q, aa.p) * w(aa.q, ab.p);
          const double h = acc.real();
          if (h == 0.0) continue;
          const int va = lm.vars[a], vb = lm.vars[b];
          const int ga = c_.group_of[va], gb = c_.group_of[vb];
          if (ga == gb) {
            addH(va, vb, h);
          } else {
            // one side shared, one local: gather the entries of this
            // constraint's cross block and emit them as rank-one terms
            // below, one per touched local row
            const int lv = (ga != 0) ? va : vb;
            const int sv = (ga != 0) ? vb : va;
            const int row = within_[lv];
            if (!crow_used_[row]) {
              crow_used_[row] = 1;
              cbuf_.row(row).head(ns_).setZero();
            }
            cbuf_(row, within_[sv]) += h;
          }
        }
      if (mixed)
        for (int row = 0; row < nloc; ++row) {
          if (!crow_used_[row]) continue;
          Cross cr;
          cr.w = 1.0;
          cr.u = VectorXd::Unit(nloc, row);
          cr.v = cbuf_.row(row).head(ns_).transpose();
          cross_[tag - 1].push_back(std::move(cr));
        }
    }

    for (const auto& con : c_.loghyps) {
      const double u = con.u.eval(x);
      const double s = std::log(u) - con.t.eval(x);
      g.add_expr(con.u, 1.0 / u);
      g.add_expr(con.t, -1.0);
      for (int v : g.vars()) grad_(v) -= g.coeff(v) / s;
      rank1(g, 1.0 / (s * s));
      g.clear();
      g.add_expr(con.u, 1.0);
      for (int v : g.vars()) grad_(v) -= g.coeff(v) / u;
      rank1(g, 1.0 / (s * u * u) + 1.0 / (u * u));
      g.clear();
    }

    for (const auto& con : c_.pes) {
      const double eps = con.eps.eval(x);
      const PesEval pe = eval_pes(con.n_terms, con.scale, eps);
      const double s = con.xi.eval(x) - pe.p;
      g.add_expr(con.xi, 1.0);
      g.add_expr(con.eps, -pe.dp);
      for (int v : g.vars()) grad_(v) -= g.coeff(v) / s;
      rank1(g, 1.0 / (s * s));
      g.clear();
      g.add_expr(con.eps, 1.0);
      for (int v : g.vars()) grad_(v) -= g.coeff(v) / eps;
      rank1(g, pe.d2p / s + 1.0 / (eps * eps));
      g.clear();
    }
  }

  // Solves [[H, J^T], [J, 0]] [dx; mu] = [-g; rp] by condensing each
  // local block onto the shared variables and the multipliers.
  bool solve_kkt(const VectorXd& g, double eta) {
    hswork_ = hss_;
    if (ns_ > 0)
      hswork_.diagonal().array() +=
          eta * (1.0 + hswork_.diagonal().cwiseAbs().maxCoeff());
    VectorXd gs;
    gather(g, block_vars_[0], gs);
    MatrixXd jtil = js_;
    MatrixXd mmat = MatrixXd::Zero(neq_, neq_);
    VectorXd rd = VectorXd::Zero(neq_);

    struct BlockWork {
      Eigen::LLT<MatrixXd> llt;
      VectorXd wb;
      MatrixXd x;  // H_bb^-1 U
      MatrixXd v;  // shared-side factors (ns x r)
      VectorXd d;  // cross weights
      MatrixXd z;  // H_bb^-1 J_b^T
      bool has_j = false;
      int r = 0;
    };
    std::vector<BlockWork> bw(nb_);

    for (int b = 0; b < nb_; ++b) {
      auto& lw = bw[b];
      const auto& bv = block_vars_[b + 1];
      const int nbv = static_cast<int>(bv.size());
      MatrixXd hb = hbb_[b];
      if (nbv > 0)
        hb.diagonal().array() +=
            eta * (1.0 + hb.diagonal().cwiseAbs().maxCoeff());
      lw.llt.compute(hb);
      if (lw.llt.info() != Eigen::Success) return false;
      VectorXd gb;
      gather(g, bv, gb);
      lw.wb = lw.llt.solve(gb);

      lw.r = static_cast<int>(cross_[b].size());
      if (lw.r > 0) {
        MatrixXd u(nbv, lw.r);
        lw.v.resize(ns_, lw.r);
        lw.d.resize(lw.r);
        for (int k = 0; k < lw.r; ++k) {
          u.col(k) = cross_[b][k].u;
          lw.v.col(k) = cross_[b][k].v;
          lw.d(k) = cross_[b][k].w;
        }
        lw.x = lw.llt.solve(u);
        const MatrixXd cmat = u.transpose() * lw.x;    // r x r
        const MatrixXd p = lw.v * lw.d.asDiagonal();   // ns x r
        const MatrixXd corr = p * cmat * p.transpose();
        hswork_.triangularView<Eigen::Lower>() -= corr;
        gs.noalias() -= p * (u.transpose() * lw.wb);
        if (neq_ > 0)
          jtil.noalias() -=
              (jb_[b] * lw.x) * lw.d.asDiagonal() * lw.v.transpose();
      }
      lw.has_j = neq_ > 0 && jb_nonzero_[b];
      if (lw.has_j) {
        lw.z = lw.llt.solve(jb_[b].transpose());
        mmat.noalias() += jb_[b] * lw.z;
        rd.noalias() += jb_[b] * lw.wb;
      }
    }

    Eigen::LLT<MatrixXd> hsl(hswork_);
    if (ns_ > 0 && hsl.info() != Eigen::Success) return false;

    const VectorXd b1 = -gs;
    VectorXd dxs = (ns_ > 0) ? VectorXd(hsl.solve(b1)) : VectorXd(0);
    VectorXd& mu = mu_;
    mu.resize(0);
    if (neq_ > 0) {
      MatrixXd sd = mmat;
      VectorXd rhs = -rp_ - rd;
      MatrixXd tmat;
      if (ns_ > 0) {
        tmat = hsl.solve(jtil.transpose());  // ns x neq
        sd.noalias() += jtil * tmat;
        rhs.noalias() += jtil * dxs;
      }
      // The multiplier system must be solved without regularization:
      // any perturbation here shows up as J dx - rp = perturbation * mu,
      // and the line search merit cannot see equality drift.  A rank
      // revealing solve also tolerates redundant equality rows.
      Eigen::CompleteOrthogonalDecomposition<MatrixXd> sdl(sd);
      mu = sdl.solve(rhs);
      if (!mu.allFinite()) return false;
      if (ns_ > 0) dxs.noalias() -= tmat * mu;
    }

    dx_.setZero(c_.n);
    for (int i = 0; i < ns_; ++i) dx_(block_vars_[0][i]) = dxs(i);
    for (int b = 0; b < nb_; ++b) {
      auto& lw = bw[b];
      const auto& bv = block_vars_[b + 1];
      VectorXd dxb = -lw.wb;
      if (lw.r > 0)
        dxb.noalias() -=
            lw.x * (lw.d.asDiagonal() * (lw.v.transpose() * dxs));
      if (lw.has_j) dxb.noalias() -= lw.z * mu;
      for (std::size_t i = 0; i < bv.size(); ++i)
        dx_(bv[i]) = dxb(static_cast<int>(i));
    }
    return true;
  }

  const Compiled& c_;
  std::vector<std::vector<int>> block_vars_;
  std::vector<int> within_;
  int ns_ = 0, nb_ = 0, neq_ = 0;
  MatrixXd jac_, js_;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> jcod_;
  std::vector<MatrixXd> jb_;
  std::vector<bool> jb_nonzero_;
  VectorXd jrhs_;

  VectorXd scratch_;
  std::vector<int> touched_;
  std::vector<std::pair<int, double>> buf_, buf2_;
  VectorXd dense_tmp_;
  MatrixXd cbuf_;  // scratch cross block of one mixed lmi
  std::vector<char> crow_used_;
  MatrixXcd smat_;
  VectorXd grad_, gwork_, rp_, dx_, mu_;
  MatrixXd hswork_;
  MatrixXd hss_;
  std::vector<MatrixXd> hbb_;
  std::vector<std::vector<Cross>> cross_;
};

struct PathResult {
  SolveStatus status = SolveStatus::numerical_failure;
  double t = 1.0;
  bool early = false;
  std::string message;
};

PathResult path_follow(Engine& eng, const Compiled& c, const VectorXd& obj,
                       VectorXd& x, const SolveOptions& opts,
                       const std::function<bool(const VectorXd&)>& early_exit,
                       int& steps) {
  PathResult res;
  double t = opts.t0;
  VectorXd cand;
  for (int outer = 0; outer < 300; ++outer) {
    for (;;) {
      if (steps >= opts.max_newton) {
        res.status = SolveStatus::max_iterations;
        res.t = t;
        res.message = "newton budget exhausted";
        return res;
      }
      const double lam2 = eng.newton_step(t, obj, x);
      ++steps;
      if (lam2 < 0.0) {
        res.status = SolveStatus::numerical_failure;
        res.t = t;
        res.message = "kkt factorization failed";
        return res;
      }
      // Approximate centering is enough: the gap bound below carries a
      // sqrt(nu) cushion for it, and chasing tiny decrements runs into
      // the kkt solve noise floor at large t.
      if (0.5 * lam2 <= std::max(opts.newton_tol, 2.5e-3)) break;
      const double m0 = eng.merit(t, obj, x);
      const VectorXd& dx = eng.direction();
      double alpha = 1.0;
      bool moved = false;
      for (int h = 0; h < 70; ++h) {
        cand = x + alpha * dx;
        const double mc = eng.merit(t, obj, cand);
        if (std::isfinite(mc) && mc <= m0 - 0.25 * alpha * lam2) {
          x.swap(cand);
          if (eng.has_equalities()) eng.reproject(x, cand);
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (moved && alpha * dx.cwiseAbs().maxCoeff() <=
                       1e-14 * (1.0 + x.cwiseAbs().maxCoeff()))
        break;  // progress below representable resolution, centered enough
      if (!moved) {
        if (lam2 <= 0.25) break;  // stalled at noise while nearly central
        res.status = SolveStatus::numerical_failure;
        res.t = t;
        res.message = "line search stalled";
        return res;
      }
      if (opts.verbosity >= 2)
        std::fprintf(stderr, "    newton t=%.3e lam2=%.3e alpha=%.3e\n", t,
                     lam2, alpha);
      if (early_exit && early_exit(x)) {
        res.status = SolveStatus::optimal;
        res.t = t;
        res.early = true;
        return res;
      }
    }
    const double gap = (c.nu + std::sqrt(c.nu)) / t;
    if (opts.verbosity >= 1)
      std::fprintf(stderr, "  outer t=%.3e gap=%.3e obj=%.6e\n", t, gap,
                   obj.dot(x));
    if (gap <= opts.gap_tol * std::max(1.0, std::abs(obj.dot(x)))) {
      res.status = SolveStatus::optimal;
      res.t = t;
      return res;
    }
    if (t > 1e250) {
      res.status = SolveStatus::max_iterations;
      res.t = t;
      res.message = "barrier weight exhausted without closing the gap";
      return res;
    }
    t *= opts.mu;
  }
  res.status = SolveStatus::max_iterations;
  res.t = t;
  res.message = "outer iteration cap reached";
  return res;
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::max_iterations: return "max-iterations";
    case SolveStatus::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

Solver::Solver(const Program& p) : p_(p) { p.check(); }

bool Solver::in_domain(const Eigen::VectorXd& x) const {
  if (x.size() != p_.n_vars()) return false;
  const Compiled base = compile_base(p_);
  MatrixXcd smat;
  return std::isfinite(barrier_value(base, x, smat));
}

Solution Solver::solve(const SolveOptions& opts,
                       const Eigen::VectorXd* warm_start) const {
  Solution sol;
  const Compiled base = compile_base(p_);
  if (base.n_barrier == 0)
    throw std::invalid_argument(
        "program has no inequality constraints; nothing to path-follow");
  const int n = base.n;
  VectorXd obj = VectorXd::Zero(n);
  if (p_.objective().size() == n) obj = p_.objective();

  VectorXd x = (warm_start && warm_start->size() == n) ? *warm_start
                                                       : VectorXd::Zero(n);
  Engine eng(base);
  if (!eng.project_equalities(x, opts.feas_tol)) {
    sol.status = SolveStatus::infeasible;
    sol.message = "equality rows are inconsistent";
    sol.x = x;
    return sol;
  }

  int steps = 0;
  if (!std::isfinite(eng.barrier(x))) {
    if (!opts.allow_phase1) {
      sol.status = SolveStatus::numerical_failure;
      sol.message = "start point is exterior and the slack phase is disabled";
      sol.x = x;
      return sol;
    }
    std::vector<double> need;
    std::string blocker;
    if (!group_needs(base, x, need, &blocker)) {
      // A start the slack phase cannot repair says nothing about the
      // program itself, so this is not an infeasibility verdict.
      sol.status = SolveStatus::numerical_failure;
      sol.message = blocker;
      sol.x = x;
      return sol;
    }
    const Compiled ph = compile_phase1(base, x);
    VectorXd x1 = VectorXd::Zero(ph.n);
    x1.head(n) = x;
    double smax = 0.0;
    for (int g = 0; g <= ph.n_groups; ++g) {
      const int sv = ph.sigma_of_group[g];
      if (sv < 0) continue;
      x1(sv) = need[g] + 1.0;
      smax = std::max(smax, x1(sv));
    }
    x1(ph.sigma_max) = smax + 1.0;
    VectorXd obj1 = VectorXd::Zero(ph.n);
    obj1(ph.sigma_max) = 1.0;
    Engine eng1(ph);
    const double margin = 1e-3;
    const auto early = [&](const VectorXd& xc) {
      return xc(ph.sigma_max) <= -margin;
    };
    const PathResult pr = path_follow(eng1, ph, obj1, x1, opts, early, steps);
    if (pr.status == SolveStatus::numerical_failure ||
        pr.status == SolveStatus::max_iterations) {
      sol.status = pr.status;
      sol.message = "slack phase: " + pr.message;
      sol.x = x;
      sol.newton_steps = steps;
      return sol;
    }
    if (!pr.early && !(x1(ph.sigma_max) < 0.0)) {
      sol.status = SolveStatus::infeasible;
      sol.message = "no strict interior found; residual slack " +
                    std::to_string(x1(ph.sigma_max));
      sol.x = x1.head(n);
      sol.newton_steps = steps;
      return sol;
    }
    x = x1.head(n);
    if (!std::isfinite(eng.barrier(x))) {
      sol.status = SolveStatus::numerical_failure;
      sol.message = "slack phase returned a boundary point";
      sol.x = x;
      sol.newton_steps = steps;
      return sol;
    }
  }

  const PathResult pr = path_follow(eng, base, obj, x, opts, nullptr, steps);
  sol.status = pr.status;
  sol.x = x;
  sol.objective = obj.dot(x);
  sol.gap_bound = (base.nu + std::sqrt(base.nu)) / pr.t;
  sol.newton_steps = steps;
  sol.message = pr.message;
  return sol;
}

std::vector<ConstraintViolation> Solver::violations(const Eigen::VectorXd& x,
                                                    double tol) const {
  std::vector<ConstraintViolation> out;
  const auto push = [&](const char* kind, int idx, double amount) {
    if (amount > tol) out.push_back({kind, idx, amount});
  };
  const auto& eqs = p_.equalities();
  for (std::size_t i = 0; i < eqs.size(); ++i)
    push("equality", static_cast<int>(i), std::abs(eqs[i].e.eval(x)));
  const auto& lins = p_.linears();
  for (std::size_t i = 0; i < lins.size(); ++i)
    push("linear", static_cast<int>(i), lins[i].e.eval(x));
  const auto& quads = p_.quadratics();
  for (std::size_t i = 0; i < quads.size(); ++i) {
    double f = quads[i].lin.eval(x);
    for (const auto& s : quads[i].sq) {
      const double u = s.eval(x);
      f += u * u;
    }
    push("quadratic", static_cast<int>(i), f);
  }
  const auto& socs = p_.socs();
  for (std::size_t i = 0; i < socs.size(); ++i) {
    double un = 0.0;
    for (const auto& u : socs[i].u) {
      const double uv = u.eval(x);
      un += uv * uv;
    }
    push("soc", static_cast<int>(i), std::sqrt(un) - socs[i].t.eval(x));
  }
  for (std::size_t i = 0; i < p_.lmis().size(); ++i) {
    const MatrixXcd s = p_.lmi_matrix(static_cast<int>(i), x);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(s, Eigen::EigenvaluesOnly);
    push("lmi", static_cast<int>(i), -es.eigenvalues().minCoeff());
  }
  const auto& lhs = p_.log_hypographs();
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    const double u = lhs[i].u.eval(x);
    const double t = lhs[i].t.eval(x);
    push("log-hypograph", static_cast<int>(i),
         (u > 0.0) ? t - std::log(u) : kInf);
  }
  const auto& pes = p_.partial_exp_sums();
  for (std::size_t i = 0; i < pes.size(); ++i) {
    const double eps = pes[i].eps.eval(x);
    if (!(eps > 0.0)) {
      push("partial-exp-sum", static_cast<int>(i), kInf);
      continue;
    }
    const PesEval pe = eval_pes(pes[i].n_terms, pes[i].scale, eps);
    push("partial-exp-sum", static_cast<int>(i), pe.p - pes[i].xi.eval(x));
  }
  return out;
}

}  // namespace srsim::conic
