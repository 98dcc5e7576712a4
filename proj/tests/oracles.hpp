#pragma once

// Reference computations used only by the tests. They deliberately avoid the
// library's own numerical shortcuts: quadrature instead of closed forms,
// extended precision instead of recurrences, brute-force enumeration instead
// of the factorized sums.

#include <algorithm>
#include <array>
#include <string>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using big = boost::multiprecision::cpp_bin_float_50;

inline double phi_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Adaptive Gauss-Kronrod on [a, b]. A lower depth bounds the work when
/// rounding noise in the integrand keeps the tolerance out of reach.
inline double integrate(const std::function<double(double)> &f, double a, double b, double tol = 1e-13,
                        unsigned max_depth = 20) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, max_depth, tol, &err);
}

/// P(X <= x, Y <= y) for a standard bivariate normal, integrating the
/// density over x after closing the inner integral in y.
inline double bvn(double x, double y, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  const double lo = std::min(x, -40.0);
  const auto inner = [&](double u) { return phi_pdf(u) * phi_cdf((y - rho * u) / s); };
  if (x <= -40.0) return 0.0;
  // split at a few points so the adaptive rule sees the bulk, and around
  // u = y / rho where the inner cdf turns into a near-step as rho -> 1
  double total = 0.0;
  std::vector<double> cuts = {lo, -8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0};
  if (rho > 0.0) {
    const double c = y / rho, w = 10.0 * s / rho;
    cuts.insert(cuts.end(), {c - w, c, c + w});
    std::sort(cuts.begin(), cuts.end());
  }
  double prev = lo;
  for (double c : cuts) {
    if (c <= prev) continue;
    if (c >= x) break;
    total += integrate(inner, prev, c, 1e-13, 10);
    prev = c;
  }
  total += integrate(inner, prev, x, 1e-13, 10);
  return total;
}

/// Poisson pmf in 50-digit arithmetic.
inline double poisson_pmf(int y, double lambda) {
  big l = lambda;
  big v = boost::multiprecision::exp(-l) * boost::multiprecision::pow(l, y);
  for (int k = 2; k <= y; ++k) v /= k;
  return static_cast<double>(v);
}

inline double poisson_cdf(int y, double lambda) {
  big acc = 0, term = boost::multiprecision::exp(-big(lambda));
  for (int k = 0; k <= y; ++k) {
    if (k > 0) term *= big(lambda) / k;
    acc += term;
  }
  return static_cast<double>(acc);
}

/// NB pmf from the binomial-coefficient formula in 50-digit arithmetic:
/// C(y + r - 1, y) p^r (1 - p)^y with p = r / (mu + r).
inline double negbin_pmf(int y, double mu, double r) {
  big br = r, bmu = mu;
  big p = br / (bmu + br);
  big coef = 1;
  for (int k = 1; k <= y; ++k) coef *= (big(k) + br - 1) / k;
  return static_cast<double>(coef * boost::multiprecision::pow(p, br) * boost::multiprecision::pow(1 - p, y));
}

inline double negbin_cdf(int y, double mu, double r) {
  big acc = 0;
  for (int k = 0; k <= y; ++k) acc += negbin_pmf(k, mu, r);
  return static_cast<double>(acc);
}

/// Kolmogorov distance between a sample and a continuous cdf.
inline double ks_distance(std::vector<double> x, const std::function<double(double)> &cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

/// Total-variation distance between two pmfs given on a common support.
inline double total_variation(const std::vector<double> &p, const std::vector<double> &q) {
  double s = 0.0;
  const std::size_t n = std::max(p.size(), q.size());
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k < p.size() ? p[k] : 0.0, b = k < q.size() ? q[k] : 0.0;
    s += std::abs(a - b);
  }
  return 0.5 * s;
}

/// Copula cdfs written straight from their textbook definitions, in 50-digit
/// arithmetic so the Clayton sum u^-d + v^-d - 1 survives small d.
inline double gumbel_cdf(double eta, double u, double v) {
  using boost::multiprecision::pow, boost::multiprecision::log, boost::multiprecision::exp;
  const big e = eta;
  return static_cast<double>(exp(-pow(pow(-log(big(u)), e) + pow(-log(big(v)), e), 1 / e)));
}
inline double clayton_cdf(double delta, double u, double v) {
  using boost::multiprecision::pow;
  const big d = delta;
  const big s = pow(big(u), -d) + pow(big(v), -d) - 1;
  return s > 0 ? static_cast<double>(pow(s, -1 / d)) : 0.0;
}

/// Copula cdf C(a, b) by family name: "gaussian" through the quadrature bvn,
/// the others from their textbook forms.
inline double copula_cdf(const std::string &family, double theta, double a, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  if (a >= 1.0) return std::min(b, 1.0);
  if (b >= 1.0) return a;
  if (family == "gaussian") {
    const boost::math::normal_distribution<double> z;
    return bvn(boost::math::quantile(z, a), boost::math::quantile(z, b), theta);
  }
  if (family == "gumbel") return gumbel_cdf(theta, a, b);
  return clayton_cdf(theta, a, b);
}

/// Copula densities from their textbook closed forms.
inline double copula_density(const std::string &family, double theta, double u, double v) {
  if (family == "gaussian") {
    const boost::math::normal_distribution<double> z;
    const double x = boost::math::quantile(z, u), y = boost::math::quantile(z, v), r = theta;
    return std::exp(-(r * r * (x * x + y * y) - 2 * r * x * y) / (2 * (1 - r * r))) / std::sqrt(1 - r * r);
  }
  if (family == "gumbel") {
    const double a = -std::log(u), b = -std::log(v), e = theta;
    const double s = std::pow(a, e) + std::pow(b, e);
    return gumbel_cdf(e, u, v) / (u * v) * std::pow(a * b, e - 1) / std::pow(s, 2 - 1 / e) *
           (std::pow(s, 1 / e) + e - 1);
  }
  const double d = theta;
  return (1 + d) * std::pow(u * v, -1 - d) * std::pow(std::pow(u, -d) + std::pow(v, -d) - 1, -1 / d - 2);
}

/// Link functions: rho = k, eta = 1 / (1 - k), delta = 2k / (1 - k)
/// with k = exp(-d / phi), including the library caps.
inline double link(const std::string &family, double phi, double d) {
  const double k = std::exp(-d / phi);
  if (family == "gaussian") return std::min(k, 1.0 - 1e-6);
  if (family == "gumbel") return std::min(1.0 / (1.0 - k), 50.0);
  return std::min(std::max(2.0 * k / (1.0 - k), 1e-10), 98.0);
}

/// Everything needed to evaluate a count NNMP joint pmf by brute force.
struct NnmpInstance {
  std::vector<std::array<double, 2>> sites;  ///< in ordering
  std::vector<std::vector<int>> neighbors;   ///< per position, ascending distance
  std::string family;
  double phi = 0.1;
  double lambda = 2.0;  ///< Poisson margins
  std::array<double, 3> gamma{0.0, 0.0, 0.0};
  double kappa2 = 1.0;
  double zeta = 0.1;
};

inline double dist(const std::array<double, 2> &a, const std::array<double, 2> &b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

/// Logit-Gaussian mixture weights at position i, from the definitions.
inline std::vector<double> weights(const NnmpInstance &m, std::size_t i) {
  const auto &nb = m.neighbors[i];
  const std::size_t k = nb.size();
  if (k == 1) return {1.0};
  std::vector<double> kern(k);
  double total = 0.0;
  for (std::size_t l = 0; l < k; ++l) total += kern[l] = std::exp(-dist(m.sites[i], m.sites[static_cast<std::size_t>(nb[l])]) / m.zeta);
  const double mu = m.gamma[0] + m.gamma[1] * m.sites[i][0] + m.gamma[2] * m.sites[i][1];
  const double kappa = std::sqrt(m.kappa2);
  std::vector<double> w(k);
  double r = 0.0, prev = 0.0;
  for (std::size_t l = 0; l < k; ++l) {
    r += kern[l] / total;
    const double g = l + 1 == k ? 1.0 : phi_cdf((std::log(r / (1.0 - r)) - mu) / kappa);
    w[l] = g - prev;
    prev = g;
  }
  return w;
}

/// Joint pmf as the product of margins times the sum over every configuration
/// (l_2, ..., l_n) of prod_i w_{i, l_i} c_{i, l_i}, where c is the copula
/// rectangle volume divided by the two margins.
inline double expanded_joint_pmf(const NnmpInstance &m, const std::vector<int> &y) {
  const std::size_t n = m.sites.size();
  const auto cdf = [&](int k) { return k < 0 ? 0.0 : poisson_cdf(k, m.lambda); };
  double margins = 1.0;
  for (std::size_t i = 0; i < n; ++i) margins *= poisson_pmf(y[i], m.lambda);
  // c and w for every (i, l), then the full expansion
  std::vector<std::vector<double>> c(n), w(n);
  for (std::size_t i = 1; i < n; ++i) {
    w[i] = weights(m, i);
    for (int j : m.neighbors[i]) {
      const auto js = static_cast<std::size_t>(j);
      const double theta = link(m.family, m.phi, dist(m.sites[i], m.sites[js]));
      const double a1 = cdf(y[i] - 1), b1 = cdf(y[i]), a2 = cdf(y[js] - 1), b2 = cdf(y[js]);
      const double vol = copula_cdf(m.family, theta, b1, b2) - copula_cdf(m.family, theta, a1, b2) -
                         copula_cdf(m.family, theta, b1, a2) + copula_cdf(m.family, theta, a1, a2);
      c[i].push_back(vol / (poisson_pmf(y[i], m.lambda) * poisson_pmf(y[js], m.lambda)));
    }
  }
  double sum = 0.0;
  std::vector<std::size_t> l(n, 0);
  while (true) {
    double term = 1.0;
    for (std::size_t i = 1; i < n; ++i) term *= w[i][l[i]] * c[i][l[i]];
    sum += term;
    std::size_t i = 1;
    while (i < n && ++l[i] == m.neighbors[i].size()) l[i++] = 0;
    if (i >= n) break;
  }
  return margins * sum;
}

}  // namespace oracle
