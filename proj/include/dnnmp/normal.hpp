#pragma once

// Univariate and bivariate standard normal distribution functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

namespace dnnmp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A probability carried together with its complement, so that values close
/// to 1 keep full relative precision in the upper tail.
struct Uniform {
  double p = 0.5;  ///< lower-tail probability
  double q = 0.5;  ///< upper-tail probability, 1 - p

  static Uniform from_lower(double p) { return {p, 1.0 - p}; }
  static Uniform from_upper(double q) { return {1.0 - q, q}; }
};

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal quantile for p in (0, 1); p = 0 and p = 1 map to -inf/+inf.
inline double norm_quantile(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Quantile evaluated from whichever tail is more accurate.
inline double norm_quantile(const Uniform &u) {
  return u.p <= 0.5 ? norm_quantile(u.p) : -norm_quantile(u.q);
}

/// P(a < Z < b) for standard normal Z, computed in the tail that avoids
/// cancellation.
inline double norm_interval(double a, double b) {
  if (!(b > a)) return 0.0;
  if (a > 0.0) return norm_cdf(-a) - norm_cdf(-b);
  return norm_cdf(b) - norm_cdf(a);
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
      double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (x * p0 - p1) / (x * x - 1.0);
        const double dx = p0 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
  }
};

namespace detail {

// Negative half of an even-order Gauss-Legendre rule.
struct HalfRule {
  std::vector<double> x, w;
  explicit HalfRule(int n) {
    GaussLegendre gl(n);
    for (int i = 0; i < n / 2; ++i) {
      x.push_back(gl.nodes[i]);
      w.push_back(gl.weights[i]);
    }
  }
};

inline const HalfRule &half_rule(int n) {
  static const HalfRule r6(6), r12(12), r20(20);
  return n == 6 ? r6 : (n == 12 ? r12 : r20);
}

// Upper bivariate normal probability P(X > dh, Y > dk) with correlation r,
// following Genz's BVNU (Drezner-Wesolowsky with Gauss-Legendre refinement).
inline double bvn_upper(double dh, double dk, double r) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double absr = std::abs(r);
  const HalfRule &rule = half_rule(absr < 0.3 ? 6 : (absr < 0.75 ? 12 : 20));
  const auto lg = rule.x.size();

  double h = dh, k = dk;
  double hk = h * k;
  double bvn = 0.0;

  if (absr < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < lg; ++i) {
      double sn = std::sin(asr * (rule.x[i] + 1.0) / 2.0);
      bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-rule.x[i] + 1.0) / 2.0);
      bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * two_pi) + norm_cdf(-h) * norm_cdf(-k);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (absr < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    bvn = a * std::exp(-(bs / as + hk) / 2.0) *
          (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    if (hk > -160.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * norm_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (std::size_t i = 0; i < lg; ++i) {
      for (double sign : {-1.0, 1.0}) {
        double xs = a * (sign * rule.x[i] + 1.0);
        xs *= xs;
        const double rs = std::sqrt(1.0 - xs);
        const double asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0) {
          bvn += a * rule.w[i] * std::exp(asr) *
                 (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                  (1.0 + c * xs * (1.0 + d * xs)));
        }
      }
    }
    bvn = -bvn / two_pi;
  }
  if (r > 0.0) {
    bvn += norm_cdf(-std::max(h, k));
  } else {
    bvn = -bvn;
    if (k > h) {
      if (h < 0.0)
        bvn += norm_cdf(k) - norm_cdf(h);
      else
        bvn += norm_cdf(-h) - norm_cdf(-k);
    }
  }
  return bvn;
}

}  // namespace detail

/// Standard bivariate normal cdf P(X <= x, Y <= y) with correlation rho,
/// |rho| < 1. Absolute accuracy is close to double precision.
inline double bvn_cdf(double x, double y, double rho) {
  if (x == -kInf || y == -kInf) return 0.0;
  if (x == kInf) return norm_cdf(y);
  if (y == kInf) return norm_cdf(x);
  const double v = detail::bvn_upper(-x, -y, rho);
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace dnnmp
