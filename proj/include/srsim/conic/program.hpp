#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace srsim::conic {

// Sparse affine expression sum_i coeff_i * x[var_i] + constant.
struct AffineExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  AffineExpr() = default;
  explicit AffineExpr(double c) : constant(c) {}

  AffineExpr& add(int var, double coeff) {
    if (coeff != 0.0) terms.emplace_back(var, coeff);
    return *this;
  }
  static AffineExpr var(int v, double coeff = 1.0) {
    AffineExpr e;
    e.add(v, coeff);
    return e;
  }
  double eval(const Eigen::VectorXd& x) const {
    double acc = constant;
    for (const auto& [v, c] : terms) acc += c * x(v);
    return acc;
  }
};

// One Hermitian coefficient record: S(x) gains x[var] * (coeff at (i,j)
// and conj(coeff) at (j,i)).  Diagonal records must carry real coeff.
struct LmiTerm {
  int i = 0;
  int j = 0;
  int var = -1;  // -1 marks a constant entry
  std::complex<double> coeff;
};

struct LinearConstraint {
  AffineExpr e;  // e(x) <= 0
};
struct EqualityConstraint {
  AffineExpr e;  // e(x) == 0
};
// sum_i sq_i(x)^2 + lin(x) <= 0
struct QuadConstraint {
  std::vector<AffineExpr> sq;
  AffineExpr lin;
};
// || (u_1(x), ..., u_m(x)) ||_2 <= t(x)
struct SocConstraint {
  std::vector<AffineExpr> u;
  AffineExpr t;
};
// S(x) = const + sum_var x[var] * F_var  must stay positive definite.
struct LmiConstraint {
  int dim = 0;
  std::vector<LmiTerm> terms;  // constants (var = -1) and coefficients
};
// t(x) <= log(u(x)), u(x) > 0
struct LogHypConstraint {
  AffineExpr t;
  AffineExpr u;
};
// sum_{l=0}^{n_terms-1} (scale * eps(x))^l / l!  <=  xi(x),  eps(x) > 0.
// The partial sum is convex and increasing on eps > 0.
struct PesConstraint {
  int n_terms = 1;
  double scale = 1.0;
  AffineExpr eps;
  AffineExpr xi;
};

// Convex program over dense variables with the cone classes above.
// Variables may be tagged into "local groups": a local group's variables
// must never share a barrier constraint with another local group (only
// with untagged shared variables), which lets the solver eliminate each
// group independently inside the Newton solve.  Equality rows may span
// anything.
class Program {
 public:
  int add_vars(const std::string& name, int count);
  int n_vars() const { return n_vars_; }

  // Tags [first, first+count) as one elimination group.
  void mark_local_group(int first, int count);

  void set_objective(Eigen::VectorXd c);
  const Eigen::VectorXd& objective() const { return c_; }

  void add_equality(AffineExpr e) { eqs_.push_back({std::move(e)}); }
  void add_linear(AffineExpr e) { lins_.push_back({std::move(e)}); }
  void add_quadratic(std::vector<AffineExpr> sq, AffineExpr lin) {
    quads_.push_back({std::move(sq), std::move(lin)});
  }
  void add_soc(std::vector<AffineExpr> u, AffineExpr t) {
    socs_.push_back({std::move(u), std::move(t)});
  }
  int add_lmi(int dim) {
    lmis_.push_back(LmiConstraint{dim, {}});
    return static_cast<int>(lmis_.size()) - 1;
  }
  void lmi_add_const(int lmi, int i, int j, std::complex<double> coeff);
  void lmi_add_term(int lmi, int i, int j, int var, std::complex<double> coeff);
  void add_log_hypograph(AffineExpr t, AffineExpr u) {
    loghyps_.push_back({std::move(t), std::move(u)});
  }
  void add_partial_exp_sum(int n_terms, double scale, AffineExpr eps,
                           AffineExpr xi) {
    pes_.push_back({n_terms, scale, std::move(eps), std::move(xi)});
  }

  const std::vector<EqualityConstraint>& equalities() const { return eqs_; }
  const std::vector<LinearConstraint>& linears() const { return lins_; }
  const std::vector<QuadConstraint>& quadratics() const { return quads_; }
  const std::vector<SocConstraint>& socs() const { return socs_; }
  const std::vector<LmiConstraint>& lmis() const { return lmis_; }
  const std::vector<LogHypConstraint>& log_hypographs() const { return loghyps_; }
  const std::vector<PesConstraint>& partial_exp_sums() const { return pes_; }

  struct VarBlock {
    std::string name;
    int offset;
    int count;
  };
  const std::vector<VarBlock>& var_blocks() const { return blocks_; }
  std::string var_name(int v) const;

  // group id per var: 0 = shared, 1.. = local groups.
  const std::vector<int>& var_groups() const { return group_of_; }
  int n_local_groups() const { return n_groups_; }

  // Throws std::invalid_argument on structural errors (bad indices,
  // local-group cross coupling, non-Hermitian diagonal records).
  void check() const;

  // Builds S(x) for one LMI.
  Eigen::MatrixXcd lmi_matrix(int lmi, const Eigen::VectorXd& x) const;

 private:
  void require_var(int v) const;

  int n_vars_ = 0;
  int n_groups_ = 0;
  Eigen::VectorXd c_;
  std::vector<VarBlock> blocks_;
  std::vector<int> group_of_;
  std::vector<EqualityConstraint> eqs_;
  std::vector<LinearConstraint> lins_;
  std::vector<QuadConstraint> quads_;
  std::vector<SocConstraint> socs_;
  std::vector<LmiConstraint> lmis_;
  std::vector<LogHypConstraint> loghyps_;
  std::vector<PesConstraint> pes_;
};

}  // namespace srsim::conic
