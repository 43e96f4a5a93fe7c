#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "srsim/conic/program.hpp"

namespace srsim::conic {

enum class SolveStatus { optimal, infeasible, max_iterations, numerical_failure };
const char* to_string(SolveStatus s);

struct SolveOptions {
  double gap_tol = 1e-8;     // stop when nu/t <= gap_tol * max(1, |obj|)
  double newton_tol = 1e-9;  // inner stop on squared decrement / 2
  double mu = 20.0;          // barrier weight growth per outer step
  double t0 = 1.0;           // initial barrier weight
  int max_newton = 400;      // Newton budget across the whole path
  double feas_tol = 1e-7;    // interior acceptance in phase 1
  bool allow_phase1 = true;  // run a slack phase when the start is exterior
  int verbosity = 0;
};

struct Solution {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;
  double objective = 0.0;
  double gap_bound = 0.0;  // nu/t certificate at exit
  int newton_steps = 0;
  std::string message;
};

struct ConstraintViolation {
  std::string kind;
  int index = 0;
  double amount = 0.0;  // how far beyond feasibility, in constraint units
};

// Primal barrier path-following over the Program cone classes.  Newton
// systems exploit the program's local-group structure: each group's
// Hessian block is factored independently and condensed onto the shared
// variables and the equality multipliers.
class Solver {
 public:
  explicit Solver(const Program& p);

  Solution solve(const SolveOptions& opts = {},
                 const Eigen::VectorXd* warm_start = nullptr) const;

  // All constraint violations exceeding tol at x (equalities by |e|).
  std::vector<ConstraintViolation> violations(const Eigen::VectorXd& x,
                                              double tol) const;

  // Strict interior test for every barrier term.
  bool in_domain(const Eigen::VectorXd& x) const;

 private:
  const Program& p_;
};

}  // namespace srsim::conic
