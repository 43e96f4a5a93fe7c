#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "srsim/conic/program.hpp"
#include "srsim/conic/solver.hpp"
#include "srsim/gammainc.hpp"

using namespace srsim::conic;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Solution solve_ok(const Program& p, const VectorXd* warm = nullptr,
                  SolveOptions opts = {}) {
  Solver solver(p);
  const Solution sol = solver.solve(opts, warm);
  CAPTURE(sol.message);
  REQUIRE(sol.status == SolveStatus::optimal);
  CHECK(solver.violations(sol.x, 1e-6).empty());
  return sol;
}

}  // namespace

TEST_CASE("one sided lp reaches its bound") {
  Program p;
  const int x = p.add_vars("x", 1);
  p.set_objective(VectorXd::Ones(1));
  AffineExpr e;  // 1 - x <= 0
  e.add(x, -1.0);
  e.constant = 1.0;
  p.add_linear(e);
  // zero start is exterior, so this also exercises the slack phase
  const Solution sol = solve_ok(p);
  CHECK(sol.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("linear objective over the unit ball") {
  Program p;
  const int x0 = p.add_vars("x", 3);
  VectorXd c(3);
  c << 1.5, -2.0, 0.5;
  p.set_objective(c);
  std::vector<AffineExpr> sq;
  for (int i = 0; i < 3; ++i) sq.push_back(AffineExpr::var(x0 + i));
  p.add_quadratic(std::move(sq), AffineExpr(-1.0));
  const Solution sol = solve_ok(p);
  CHECK(sol.objective == doctest::Approx(-c.norm()).epsilon(1e-6));
  const VectorXd expect = -c / c.norm();
  for (int i = 0; i < 3; ++i)
    CHECK(sol.x(i) == doctest::Approx(expect(i)).epsilon(1e-5));
}

TEST_CASE("two by two lmi pins the diagonal at one") {
  Program p;
  const int t = p.add_vars("t", 1);
  p.set_objective(VectorXd::Ones(1));
  const int l = p.add_lmi(2);
  p.lmi_add_term(l, 0, 0, t, 1.0);
  p.lmi_add_term(l, 1, 1, t, 1.0);
  p.lmi_add_const(l, 0, 1, 1.0);
  VectorXd warm(1);
  warm << 3.0;
  const Solution sol = solve_ok(p, &warm);
  CHECK(sol.x(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("log hypograph caps at log of the box bound") {
  Program p;
  const int t = p.add_vars("t", 1);
  const int x = p.add_vars("x", 1);
  VectorXd c = VectorXd::Zero(2);
  c(0) = -1.0;  // maximize t
  p.set_objective(c);
  p.add_log_hypograph(AffineExpr::var(t), AffineExpr::var(x));
  AffineExpr bound;  // x <= 5
  bound.add(x, 1.0);
  bound.constant = -5.0;
  p.add_linear(bound);
  // default zero start is exterior (x = 0) and must be recovered
  const Solution sol = solve_ok(p);
  CHECK(sol.x(0) == doctest::Approx(std::log(5.0)).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(-std::log(5.0)).epsilon(1e-6));
}

TEST_CASE("partial exp sum floor with eps pinned by an equality") {
  Program p;
  const int eps = p.add_vars("eps", 1);
  const int xi = p.add_vars("xi", 1);
  VectorXd c = VectorXd::Zero(2);
  c(1) = 1.0;  // minimize xi
  p.set_objective(c);
  p.add_partial_exp_sum(4, 2.0, AffineExpr::var(eps), AffineExpr::var(xi));
  AffineExpr pin;  // eps == 1
  pin.add(eps, 1.0);
  pin.constant = -1.0;
  p.add_equality(pin);
  VectorXd warm(2);
  warm << 1.0, 50.0;
  const Solution sol = solve_ok(p, &warm);
  const double expect = srsim::partial_exp_sum(4, 2.0);  // 1 + 2 + 2 + 4/3
  CHECK(expect == doctest::Approx(19.0 / 3.0));
  CHECK(sol.objective == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("soc distance to an anchored point") {
  Program p;
  const int x0 = p.add_vars("x", 2);
  const int t = p.add_vars("t", 1);
  VectorXd c = VectorXd::Zero(3);
  c(2) = 1.0;
  p.set_objective(c);
  const Eigen::Vector2d a(3.0, -4.0);
  std::vector<AffineExpr> u;
  for (int i = 0; i < 2; ++i) {
    AffineExpr e;
    e.add(x0 + i, 1.0);
    e.constant = -a(i);
    u.push_back(e);
  }
  p.add_soc(std::move(u), AffineExpr::var(t));
  for (int i = 0; i < 2; ++i) {
    AffineExpr pin;
    pin.add(x0 + i, 1.0);
    p.add_equality(pin);
  }
  VectorXd warm(3);
  warm << 0.0, 0.0, 10.0;
  const Solution sol = solve_ok(p, &warm);
  CHECK(sol.objective == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("complex lmi agrees with its real embedding") {
  // Hermitian data
  MatrixXcd s0 = MatrixXcd::Identity(3, 3);
  MatrixXcd f1 = MatrixXcd::Zero(3, 3);
  f1(0, 0) = 1.0;
  f1(1, 1) = 0.5;
  f1(2, 2) = -1.0;
  f1(0, 1) = std::complex<double>(0.0, 1.0);
  f1(1, 0) = std::conj(f1(0, 1));
  MatrixXcd f2 = MatrixXcd::Zero(3, 3);
  f2(1, 1) = -1.0;
  f2(2, 2) = 0.25;
  f2(0, 2) = std::complex<double>(1.0, 0.5);
  f2(2, 0) = std::conj(f2(0, 2));
  VectorXd c(2);
  c << 1.0, -0.7;

  const auto add_box = [](Program& p, int v) {
    AffineExpr hi;
    hi.add(v, 1.0);
    hi.constant = -10.0;
    p.add_linear(hi);
    AffineExpr lo;
    lo.add(v, -1.0);
    lo.constant = -10.0;
    p.add_linear(lo);
  };

  Program pc;
  const int xc = pc.add_vars("x", 2);
  pc.set_objective(c);
  add_box(pc, xc);
  add_box(pc, xc + 1);
  const int lc = pc.add_lmi(3);
  const auto add_cplx = [&](const MatrixXcd& f, int var) {
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        if (std::abs(f(i, j)) == 0.0) continue;
        if (var < 0)
          pc.lmi_add_const(lc, i, j, f(i, j));
        else
          pc.lmi_add_term(lc, i, j, var, f(i, j));
      }
  };
  add_cplx(s0, -1);
  add_cplx(f1, xc);
  add_cplx(f2, xc + 1);
  const Solution solc = solve_ok(pc);

  // real symmetric embedding [[re, -im], [im, re]]
  Program pr;
  const int xr = pr.add_vars("x", 2);
  pr.set_objective(c);
  add_box(pr, xr);
  add_box(pr, xr + 1);
  const int lr = pr.add_lmi(6);
  const auto add_embed = [&](const MatrixXcd& f, int var) {
    MatrixXd e(6, 6);
    e << f.real(), -f.imag(), f.imag(), f.real();
    for (int i = 0; i < 6; ++i)
      for (int j = i; j < 6; ++j) {
        if (e(i, j) == 0.0) continue;
        if (var < 0)
          pr.lmi_add_const(lr, i, j, e(i, j));
        else
          pr.lmi_add_term(lr, i, j, var, e(i, j));
      }
  };
  add_embed(s0, -1);
  add_embed(f1, xr);
  add_embed(f2, xr + 1);
  const Solution solr = solve_ok(pr);

  CHECK(solc.objective == doctest::Approx(solr.objective).epsilon(1e-5));
  CHECK(solc.x(0) == doctest::Approx(solr.x(0)).epsilon(1e-4));
  CHECK(solc.x(1) == doctest::Approx(solr.x(1)).epsilon(1e-4));
}

TEST_CASE("local groups give the same answer as a flat program") {
  const auto build = [](bool grouped) {
    Program p;
    const int z = p.add_vars("z", 4);
    const int w = p.add_vars("w", 1);
    if (grouped) {
      p.mark_local_group(z, 2);
      p.mark_local_group(z + 2, 2);
    }
    VectorXd c = VectorXd::Zero(5);
    c << 1.0, -0.5, -1.25, 0.75, 0.0;
    p.set_objective(c);
    // ||(z0, z1)||^2 <= w, ||(z2, z3)||^2 <= w, w <= 1
    std::vector<AffineExpr> sq1{AffineExpr::var(z), AffineExpr::var(z + 1)};
    p.add_quadratic(std::move(sq1), AffineExpr::var(w, -1.0));
    std::vector<AffineExpr> sq2{AffineExpr::var(z + 2), AffineExpr::var(z + 3)};
    p.add_quadratic(std::move(sq2), AffineExpr::var(w, -1.0));
    AffineExpr cap;
    cap.add(w, 1.0);
    cap.constant = -1.0;
    p.add_linear(cap);
    AffineExpr tie;  // z1 == z3, an equality row across both groups
    tie.add(z + 1, 1.0).add(z + 3, -1.0);
    p.add_equality(tie);
    return p;
  };
  const Program flat = build(false);
  const Program split = build(true);
  VectorXd warm = VectorXd::Zero(5);
  warm(4) = 0.5;
  const Solution a = solve_ok(flat, &warm);
  const Solution b = solve_ok(split, &warm);
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-7));
  for (int i = 0; i < 5; ++i)
    CHECK(a.x(i) == doctest::Approx(b.x(i)).epsilon(1e-4));
}

TEST_CASE("contradictory linear bounds come back infeasible") {
  Program p;
  const int x = p.add_vars("x", 1);
  p.set_objective(VectorXd::Ones(1));
  AffineExpr hi;  // x <= -1
  hi.add(x, 1.0);
  hi.constant = 1.0;
  p.add_linear(hi);
  AffineExpr lo;  // x >= 1
  lo.add(x, -1.0);
  lo.constant = 1.0;
  p.add_linear(lo);
  Solver solver(p);
  const Solution sol = solver.solve();
  CHECK(sol.status == SolveStatus::infeasible);
}

TEST_CASE("inconsistent equalities come back infeasible") {
  Program p;
  const int x = p.add_vars("x", 1);
  p.set_objective(VectorXd::Ones(1));
  AffineExpr a;  // x == 0
  a.add(x, 1.0);
  p.add_equality(a);
  AffineExpr b;  // x == 1
  b.add(x, 1.0);
  b.constant = -1.0;
  p.add_equality(b);
  AffineExpr lin;  // x <= 10
  lin.add(x, 1.0);
  lin.constant = -10.0;
  p.add_linear(lin);
  Solver solver(p);
  const Solution sol = solver.solve();
  CHECK(sol.status == SolveStatus::infeasible);
  CHECK(sol.message.find("equality") != std::string::npos);
}

TEST_CASE("warm started resolve converges and matches") {
  Program p;
  const int x0 = p.add_vars("x", 3);
  VectorXd c(3);
  c << 0.3, 0.2, -0.9;
  p.set_objective(c);
  std::vector<AffineExpr> sq;
  for (int i = 0; i < 3; ++i) sq.push_back(AffineExpr::var(x0 + i));
  p.add_quadratic(std::move(sq), AffineExpr(-1.0));
  Solver solver(p);
  const Solution first = solver.solve();
  REQUIRE(first.status == SolveStatus::optimal);
  SolveOptions opts;
  opts.t0 = 1e6;  // the warm start is already nearly central for large t
  const Solution second = solver.solve(opts, &first.x);
  REQUIRE(second.status == SolveStatus::optimal);
  CHECK(second.objective == doctest::Approx(first.objective).epsilon(1e-7));
  CHECK(second.newton_steps < first.newton_steps);
}

TEST_CASE("newton budget exhaustion reports max iterations") {
  Program p;
  const int x0 = p.add_vars("x", 4);
  VectorXd c = VectorXd::Ones(4);
  p.set_objective(c);
  std::vector<AffineExpr> sq;
  for (int i = 0; i < 4; ++i) sq.push_back(AffineExpr::var(x0 + i));
  p.add_quadratic(std::move(sq), AffineExpr(-1.0));
  Solver solver(p);
  SolveOptions opts;
  opts.max_newton = 2;
  const Solution sol = solver.solve(opts);
  CHECK(sol.status == SolveStatus::max_iterations);
}

TEST_CASE("violation report flags each family") {
  Program p;
  const int x = p.add_vars("x", 2);
  AffineExpr lin;  // x0 <= 0
  lin.add(x, 1.0);
  p.add_linear(lin);
  std::vector<AffineExpr> sq{AffineExpr::var(x + 1)};
  AffineExpr qlin(-0.25);
  p.add_quadratic(std::move(sq), qlin);  // x1^2 <= 0.25
  const int l = p.add_lmi(1);
  p.lmi_add_term(l, 0, 0, x, 1.0);  // x0 >= 0 as a 1x1 lmi
  p.set_objective(VectorXd::Zero(2));
  Solver solver(p);
  VectorXd bad(2);
  bad << -2.0, 1.0;  // lmi and quadratic violated, linear satisfied
  const auto v = solver.violations(bad, 1e-9);
  REQUIRE(v.size() == 2);
  bool saw_quad = false, saw_lmi = false;
  for (const auto& item : v) {
    if (item.kind == "quadratic") {
      saw_quad = true;
      CHECK(item.amount == doctest::Approx(0.75));
    }
    if (item.kind == "lmi") {
      saw_lmi = true;
      CHECK(item.amount == doctest::Approx(2.0));
    }
  }
  CHECK(saw_quad);
  CHECK(saw_lmi);
}

TEST_CASE("partial exp sum with a nonpositive base cannot be repaired") {
  Program p;
  const int eps = p.add_vars("eps", 1);
  const int xi = p.add_vars("xi", 1);
  VectorXd c = VectorXd::Zero(2);
  c(1) = 1.0;
  p.set_objective(c);
  p.add_partial_exp_sum(3, 1.0, AffineExpr::var(eps), AffineExpr::var(xi));
  AffineExpr pin;  // eps == 0, so the sum argument can never enter its domain
  pin.add(eps, 1.0);
  p.add_equality(pin);
  Solver solver(p);
  const Solution sol = solver.solve();
  CHECK(sol.status == SolveStatus::numerical_failure);
  CHECK(sol.message.find("exp") != std::string::npos);
}

TEST_CASE("status names are stable") {
  CHECK(std::string(to_string(SolveStatus::optimal)) == "optimal");
  CHECK(std::string(to_string(SolveStatus::infeasible)) == "infeasible");
  CHECK(std::string(to_string(SolveStatus::max_iterations)) ==
        "max-iterations");
  CHECK(std::string(to_string(SolveStatus::numerical_failure)) ==
        "numerical-failure");
}

TEST_CASE("lmi across two local groups is rejected") {
  Program p;
  const int a = p.add_vars("a", 1);
  const int b = p.add_vars("b", 1);
  p.mark_local_group(a, 1);
  p.mark_local_group(b, 1);
  const int l = p.add_lmi(2);
  p.lmi_add_term(l, 0, 0, a, 1.0);
  p.lmi_add_term(l, 1, 1, b, 1.0);
  CHECK_THROWS_AS(p.check(), std::invalid_argument);
}

TEST_CASE("lmi may couple shared and one local group") {
  // [[x, 1], [1, y]] psd means x y >= 1; minimizing x + y gives 2 with
  // a genuine cross Hessian between the shared and the local variable.
  Program p;
  const int x = p.add_vars("x", 1);
  const int y = p.add_vars("y", 1);
  p.mark_local_group(y, 1);
  const int l = p.add_lmi(2);
  p.lmi_add_term(l, 0, 0, x, 1.0);
  p.lmi_add_term(l, 1, 1, y, 1.0);
  p.lmi_add_const(l, 0, 1, 1.0);
  VectorXd c(2);
  c << 1.0, 1.0;
  p.set_objective(c);
  const Solution sol = solve_ok(p);
  CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(sol.x(x) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(sol.x(y) == doctest::Approx(1.0).epsilon(1e-4));
}
