#include "srsim/mc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "srsim/gammainc.hpp"
#include "srsim/ser.hpp"

namespace srsim {

double simulate_frame_energy(RngStream& rng, const Eigen::VectorXcd& gains,
                             double sigma2, int frame_len) {
  const double noise_scale = std::sqrt(sigma2);
  double energy = 0.0;
  for (int l = 0; l < frame_len; ++l) {
    std::complex<double> y = 0.0;
    for (Eigen::Index j = 0; j < gains.size(); ++j)
      y += gains(j) * rng.cgaussian();
    y += noise_scale * rng.cgaussian();
    energy += std::norm(y);
  }
  return energy;
}

std::vector<double> simulate_energies(RngStream& rng,
                                      const Eigen::VectorXcd& gains,
                                      double sigma2, int frame_len, long n) {
  std::vector<double> out;
  out.reserve(n);
  for (long i = 0; i < n; ++i)
    out.push_back(simulate_frame_energy(rng, gains, sigma2, frame_len));
  return out;
}

SerEstimate wilson_interval(long errors, long frames) {
  if (frames < 1) throw std::invalid_argument("wilson_interval: no frames");
  constexpr double z = 1.959963984540054;  // two-sided 95%
  const double n = static_cast<double>(frames);
  const double p = static_cast<double>(errors) / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2.0 * n)) / denom;
  const double half =
      z / denom * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n));
  SerEstimate est;
  est.ser = p;
  est.std_err = std::sqrt(p * (1.0 - p) / n);
  est.wilson_lo = std::max(0.0, center - half);
  est.wilson_hi = std::min(1.0, center + half);
  est.frames = frames;
  est.errors = errors;
  return est;
}

SerEstimate estimate_ser(RngStream& rng, const Eigen::MatrixXcd& gains,
                         double sigma2, int frame_len, long n_frames) {
  const int n_levels = static_cast<int>(gains.rows());
  if (n_levels < 1) throw std::invalid_argument("estimate_ser: no levels");

  Eigen::VectorXd levels = gains.cwiseAbs2().rowwise().sum();
  // The detector operates on sorted hypotheses; remember each level's rank.
  std::vector<int> rank(n_levels);
  {
    std::vector<int> order(n_levels);
    for (int i = 0; i < n_levels; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return levels(a) < levels(b); });
    Eigen::VectorXd sorted(n_levels);
    for (int r = 0; r < n_levels; ++r) {
      sorted(r) = levels(order[r]);
      rank[order[r]] = r;
    }
    levels = sorted;
  }
  const Eigen::VectorXd bounds = map_boundaries(levels, sigma2, frame_len);

  long errors = 0;
  for (long f = 0; f < n_frames; ++f) {
    const int level = static_cast<int>(f % n_levels);
    const double w = simulate_frame_energy(
        rng, gains.row(level).transpose(), sigma2, frame_len);
    if (classify_energy(w, bounds) != rank[level]) ++errors;
  }
  return wilson_interval(errors, n_frames);
}

Eigen::MatrixXcd gains_from_levels(const Eigen::VectorXd& levels) {
  Eigen::MatrixXcd g(levels.size(), 1);
  for (Eigen::Index i = 0; i < levels.size(); ++i)
    g(i, 0) = std::sqrt(levels(i));
  return g;
}

KsResult erlang_gof_ks(std::vector<double> samples, int shape, double rate,
                       double alpha) {
  if (samples.empty()) throw std::invalid_argument("ks: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = reg_lower_gamma(shape, rate * samples[i]);
    stat = std::max(stat, cdf - static_cast<double>(i) / n);
    stat = std::max(stat, static_cast<double>(i + 1) / n - cdf);
  }
  KsResult r;
  r.statistic = stat;
  r.alpha = alpha;
  r.critical = std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(n);
  r.pass = stat <= r.critical;
  return r;
}

}  // namespace srsim
