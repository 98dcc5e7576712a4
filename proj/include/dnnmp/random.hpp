#pragma once

// Random variate helpers shared by the sampler and the simulators.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

#include "dnnmp/errors.hpp"
#include "dnnmp/normal.hpp"

namespace dnnmp {

using Rng = std::mt19937_64;

/// Uniform draw on the open interval (0, 1), built from the top 53 bits.
inline double uniform_open(Rng &rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_normal(Rng &rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Gamma(shape, rate) draw.
inline double gamma_draw(Rng &rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

/// Inverse-gamma IG(shape, scale) draw: the reciprocal of Gamma(shape, scale).
inline double inverse_gamma_draw(Rng &rng, double shape, double scale) {
  return 1.0 / gamma_draw(rng, shape, scale);
}

/// Index drawn with probability proportional to exp(log_weights[k]).
inline std::size_t categorical_log(Rng &rng, std::span<const double> log_weights) {
  double mx = -kInf;
  for (double lw : log_weights) mx = std::max(mx, lw);
  if (mx == -kInf) throw NumericalError("categorical draw: all component weights are zero");
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - mx);
  double u = uniform_open(rng) * total;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    u -= std::exp(log_weights[k] - mx);
    if (u <= 0.0) return k;
  }
  // Rounding left a sliver of mass; return the last positive component.
  for (std::size_t k = log_weights.size(); k-- > 0;)
    if (log_weights[k] > -kInf) return k;
  return 0;
}

/// Standard normal truncated to (a, b). Inverse-cdf in the tail with the
/// most precision, exponential rejection when the lower bound is far out.
inline double truncated_standard_normal(Rng &rng, double a, double b) {
  if (!(b > a)) throw NumericalError("truncated normal: empty interval");
  if (b <= 0.0) return -truncated_standard_normal(rng, -b, -a);
  if (a >= 0.0) {
    const double sa = norm_cdf(-a);
    if (sa > 1e-280) {
      const double sb = norm_cdf(-b);
      const double s = sa - uniform_open(rng) * (sa - sb);
      const double x = -norm_quantile(s);
      return std::clamp(x, a, b);
    }
    // Robert (1995) translated-exponential proposal.
    const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      const double z = a - std::log(uniform_open(rng)) / alpha;
      if (z >= b) continue;
      if (std::log(uniform_open(rng)) <= -0.5 * (z - alpha) * (z - alpha)) return z;
    }
  }
  const double pa = norm_cdf(a), pb = norm_cdf(b);
  const double x = norm_quantile(pa + uniform_open(rng) * (pb - pa));
  return std::clamp(x, a, b);
}

/// N(mean, sd^2) truncated to (lo, hi); infinite bounds allowed.
inline double truncated_normal(Rng &rng, double mean, double sd, double lo, double hi) {
  return mean + sd * truncated_standard_normal(rng, (lo - mean) / sd, (hi - mean) / sd);
}

/// Draw from N(mean, cov) given the lower Cholesky factor of cov.
inline Eigen::VectorXd mvn_draw(Rng &rng, const Eigen::VectorXd &mean,
                                const Eigen::MatrixXd &chol_lower) {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = standard_normal(rng);
  return mean + chol_lower * z;
}

}  // namespace dnnmp
