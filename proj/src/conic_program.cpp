#include "srsim/conic/program.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace srsim::conic {

int Program::add_vars(const std::string& name, int count) {
  if (count < 1) throw std::invalid_argument("add_vars: count must be >= 1");
  const int offset = n_vars_;
  blocks_.push_back({name, offset, count});
  n_vars_ += count;
  group_of_.resize(n_vars_, 0);
  return offset;
}

void Program::mark_local_group(int first, int count) {
  if (first < 0 || count < 1 || first + count > n_vars_)
    throw std::invalid_argument("mark_local_group: bad range");
  ++n_groups_;
  for (int v = first; v < first + count; ++v) {
    if (group_of_[v] != 0)
      throw std::invalid_argument("mark_local_group: variable already local");
    group_of_[v] = n_groups_;
  }
}

void Program::set_objective(Eigen::VectorXd c) {
  if (c.size() != n_vars_)
    throw std::invalid_argument("set_objective: size mismatch");
  c_ = std::move(c);
}

void Program::require_var(int v) const {
  if (v < 0 || v >= n_vars_) throw std::invalid_argument("bad variable index");
}

void Program::lmi_add_const(int lmi, int i, int j, std::complex<double> coeff) {
  auto& con = lmis_.at(lmi);
  if (i < 0 || j < 0 || i >= con.dim || j >= con.dim)
    throw std::invalid_argument("lmi entry out of range");
  if (i == j && std::abs(coeff.imag()) > 0)
    throw std::invalid_argument("lmi diagonal entries must be real");
  con.terms.push_back({i, j, -1, coeff});
}

void Program::lmi_add_term(int lmi, int i, int j, int var,
                           std::complex<double> coeff) {
  require_var(var);
  auto& con = lmis_.at(lmi);
  if (i < 0 || j < 0 || i >= con.dim || j >= con.dim)
    throw std::invalid_argument("lmi entry out of range");
  if (i == j && std::abs(coeff.imag()) > 0)
    throw std::invalid_argument("lmi diagonal entries must be real");
  con.terms.push_back({i, j, var, coeff});
}

std::string Program::var_name(int v) const {
  for (const auto& b : blocks_)
    if (v >= b.offset && v < b.offset + b.count)
      return b.count == 1 ? b.name : b.name + "[" + std::to_string(v - b.offset) + "]";
  return "x" + std::to_string(v);
}

Eigen::MatrixXcd Program::lmi_matrix(int lmi, const Eigen::VectorXd& x) const {
  const auto& con = lmis_.at(lmi);
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(con.dim, con.dim);
  for (const auto& t : con.terms) {
    const std::complex<double> v =
        (t.var < 0) ? t.coeff : t.coeff * x(t.var);
    if (t.i == t.j) {
      s(t.i, t.i) += v.real();
    } else {
      s(t.i, t.j) += v;
      s(t.j, t.i) += std::conj(v);
    }
  }
  return s;
}

void Program::check() const {
  const auto check_expr = [&](const AffineExpr& e) {
    for (const auto& [v, c] : e.terms) {
      require_var(v);
      if (!std::isfinite(c)) throw std::invalid_argument("non-finite coeff");
    }
    if (!std::isfinite(e.constant))
      throw std::invalid_argument("non-finite constant");
  };

  // A barrier constraint may touch at most one local group.
  const auto group_span = [&](std::set<int>& groups, const AffineExpr& e) {
    for (const auto& [v, c] : e.terms) {
      (void)c;
      if (group_of_[v] != 0) groups.insert(group_of_[v]);
    }
  };
  const auto assert_single_group = [](const std::set<int>& groups,
                                      const char* kind) {
    if (groups.size() > 1)
      throw std::invalid_argument(
          std::string(kind) + " couples distinct local groups");
  };

  for (const auto& c : eqs_) check_expr(c.e);
  for (const auto& c : lins_) {
    check_expr(c.e);
    std::set<int> g;
    group_span(g, c.e);
    assert_single_group(g, "linear constraint");
  }
  for (const auto& c : quads_) {
    std::set<int> g;
    for (const auto& s : c.sq) {
      check_expr(s);
      group_span(g, s);
    }
    check_expr(c.lin);
    group_span(g, c.lin);
    assert_single_group(g, "quadratic constraint");
  }
  for (const auto& c : socs_) {
    std::set<int> g;
    for (const auto& s : c.u) {
      check_expr(s);
      group_span(g, s);
    }
    check_expr(c.t);
    group_span(g, c.t);
    assert_single_group(g, "soc constraint");
  }
  for (const auto& c : lmis_) {
    if (c.dim < 1) throw std::invalid_argument("lmi dim must be >= 1");
    std::set<int> g;
    for (const auto& t : c.terms)
      if (t.var >= 0) {
        require_var(t.var);
        if (group_of_[t.var] != 0) g.insert(group_of_[t.var]);
      }
    assert_single_group(g, "lmi constraint");
  }
  for (const auto& c : loghyps_) {
    check_expr(c.t);
    check_expr(c.u);
    std::set<int> g;
    group_span(g, c.t);
    group_span(g, c.u);
    assert_single_group(g, "log hypograph constraint");
  }
  for (const auto& c : pes_) {
    if (c.n_terms < 1 || !(c.scale > 0))
      throw std::invalid_argument("partial exp sum: bad shape or scale");
    check_expr(c.eps);
    check_expr(c.xi);
    std::set<int> g;
    group_span(g, c.eps);
    group_span(g, c.xi);
    assert_single_group(g, "partial exp sum constraint");
  }
  if (c_.size() != 0 && c_.size() != n_vars_)
    throw std::invalid_argument("objective size mismatch");
}

}  // namespace srsim::conic
