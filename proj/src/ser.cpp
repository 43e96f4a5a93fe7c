#include "srsim/ser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "srsim/gammainc.hpp"

namespace srsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(const Eigen::VectorXd& levels, double sigma2, int frame_len) {
  if (levels.size() < 1) throw std::invalid_argument("ser: no levels");
  if (!(sigma2 > 0)) throw std::invalid_argument("ser: sigma2 must be > 0");
  if (frame_len < 1) throw std::invalid_argument("ser: frame_len must be >= 1");
  for (Eigen::Index i = 0; i < levels.size(); ++i)
    if (!(levels(i) >= 0)) throw std::invalid_argument("ser: negative level");
}

Eigen::VectorXd sorted_copy(const Eigen::VectorXd& levels) {
  Eigen::VectorXd s = levels;
  std::sort(s.data(), s.data() + s.size());
  return s;
}

}  // namespace

BoundTerms ser_bound_terms(const Eigen::VectorXd& sorted_levels, double sigma2,
                           int frame_len) {
  check_inputs(sorted_levels, sigma2, frame_len);
  const Eigen::Index q_cnt = sorted_levels.size() - 1;
  BoundTerms out;
  out.miss.resize(q_cnt);
  out.alarm.resize(q_cnt);
  const double l = static_cast<double>(frame_len);
  for (Eigen::Index i = 0; i < q_cnt; ++i) {
    const double lo = sorted_levels(i);
    const double hi = sorted_levels(i + 1);
    if (hi < lo) throw std::invalid_argument("ser_bound_terms: unsorted levels");
    const double d = 0.5 * (hi - lo);
    out.miss(i) = reg_lower_gamma(frame_len, l * d / (hi + sigma2));
    out.alarm(i) = reg_upper_gamma(frame_len, l * d / (lo + sigma2));
  }
  out.total = (out.miss.sum() + out.alarm.sum()) /
              static_cast<double>(sorted_levels.size());
  return out;
}

double ser_upper_bound(const Eigen::VectorXd& levels, double sigma2,
                       int frame_len) {
  if (levels.size() == 1) return 0.0;
  return ser_bound_terms(sorted_copy(levels), sigma2, frame_len).total;
}

Eigen::VectorXd map_boundaries(const Eigen::VectorXd& sorted_levels,
                               double sigma2, int frame_len) {
  check_inputs(sorted_levels, sigma2, frame_len);
  const int n = static_cast<int>(sorted_levels.size());
  const double l = static_cast<double>(frame_len);

  // The per-hypothesis log density in W is L log(lambda) - lambda W up to
  // shared terms, a line in W with slope -lambda.  Sweeping hypotheses in
  // mean order is an upper-envelope computation; ties and dominated
  // hypotheses collapse to empty intervals.
  std::vector<double> mu(n);
  for (int i = 0; i < n; ++i) mu[i] = sorted_levels(i) + sigma2;

  std::vector<int> owner;          // hypothesis owning each segment
  std::vector<double> start;       // segment start in W
  owner.push_back(0);
  start.push_back(0.0);
  for (int j = 1; j < n; ++j) {
    double cross = kInf;
    while (!owner.empty()) {
      const int i = owner.back();
      if (mu[j] <= mu[i]) {
        // identical mean: dominated by tie-break toward the lower index
        cross = kInf;
        break;
      }
      cross = l * std::log(mu[j] / mu[i]) / (1.0 / mu[i] - 1.0 / mu[j]);
      if (cross > start.back()) break;
      owner.pop_back();
      start.pop_back();
    }
    if (cross == kInf) continue;  // j never wins
    owner.push_back(j);
    start.push_back(cross);
  }

  // Convert segments to per-hypothesis boundaries b_0..b_{n-2}.
  Eigen::VectorXd bounds(n - 1);
  std::vector<double> hi(n, 0.0);
  std::vector<double> lo(n, 0.0);
  for (std::size_t s = 0; s < owner.size(); ++s) {
    lo[owner[s]] = start[s];
    hi[owner[s]] = (s + 1 < owner.size()) ? start[s + 1] : kInf;
  }
  double cursor = 0.0;
  for (int q = 0; q < n - 1; ++q) {
    const bool owns = hi[q] > lo[q];
    cursor = owns ? hi[q] : cursor;
    bounds(q) = cursor;
  }
  return bounds;
}

int classify_energy(double energy, const Eigen::VectorXd& boundaries) {
  const double* begin = boundaries.data();
  const double* end = begin + boundaries.size();
  return static_cast<int>(std::upper_bound(begin, end, energy) - begin);
}

double map_ser_exact(const Eigen::VectorXd& levels, double sigma2,
                     int frame_len) {
  if (levels.size() == 1) return 0.0;
  const Eigen::VectorXd s = sorted_copy(levels);
  const Eigen::VectorXd b = map_boundaries(s, sigma2, frame_len);
  const int n = static_cast<int>(s.size());
  double correct = 0.0;
  for (int q = 0; q < n; ++q) {
    const double lam = 1.0 / (s(q) + sigma2);
    const double blo = (q == 0) ? 0.0 : b(q - 1);
    const double bhi = (q == n - 1) ? kInf : b(q);
    if (bhi <= blo) continue;
    const double phi = (bhi == kInf) ? 1.0 : reg_lower_gamma(frame_len, lam * bhi);
    const double plo = (blo == 0.0) ? 0.0 : reg_lower_gamma(frame_len, lam * blo);
    correct += phi - plo;
  }
  return 1.0 - correct / n;
}

}  // namespace srsim
