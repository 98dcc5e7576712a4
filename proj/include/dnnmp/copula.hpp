#pragma once

// Bivariate Gaussian, Gumbel and Clayton copulas with distance-driven
// dependence parameters.
//
// Every function takes the copula parameter as a plain double whose meaning
// depends on the family: the correlation rho for Gaussian, eta for Gumbel,
// delta for Clayton. "Conditional" always means the law of the first
// argument given the second.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <string_view>

#include "dnnmp/errors.hpp"
#include "dnnmp/normal.hpp"

namespace dnnmp {

enum class CopulaFamily { gaussian, gumbel, clayton };

inline std::string_view to_string(CopulaFamily f) {
  switch (f) {
    case CopulaFamily::gaussian: return "gaussian";
    case CopulaFamily::gumbel: return "gumbel";
    case CopulaFamily::clayton: return "clayton";
  }
  return "?";
}

inline CopulaFamily copula_family_from_string(std::string_view s) {
  if (s == "gaussian") return CopulaFamily::gaussian;
  if (s == "gumbel") return CopulaFamily::gumbel;
  if (s == "clayton") return CopulaFamily::clayton;
  throw ConfigError("unknown copula family '" + std::string(s) + "'");
}

/// Copula family plus the range parameter phi of its exponential link.
struct CopulaSpec {
  CopulaFamily family = CopulaFamily::gaussian;
  double phi = 0.5;
};

inline constexpr double kMaxGaussianRho = 1.0 - 1e-6;
inline constexpr double kMaxGumbelEta = 50.0;
inline constexpr double kMaxClaytonDelta = 98.0;
inline constexpr double kMinClaytonDelta = 1e-10;

namespace copula_detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -kInf) return -kInf;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log(exp(x) - 1) for x >= 0.
inline double log_expm1(double x) {
  if (x > 30.0) return x + std::log1p(-std::exp(-x));
  return std::log(std::expm1(x));
}

// log p computed from the more accurate tail.
inline double log_lower(const Uniform &u) { return u.p <= 0.5 ? std::log(u.p) : std::log1p(-u.q); }

inline void require_unit(double t, const char *what) {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream os;
    os << what << " must lie in [0, 1], got " << t;
    throw std::domain_error(os.str());
  }
}

inline void require_interior(double t, const char *what) {
  if (!(t > 0.0 && t < 1.0)) {
    std::ostringstream os;
    os << what << " must lie in (0, 1), got " << t;
    throw std::domain_error(os.str());
  }
}

}  // namespace copula_detail

/// Throws std::domain_error when the parameter is outside the admissible
/// range of the family (including the numerical clamps of the link).
inline void validate_copula_param(CopulaFamily family, double theta) {
  bool ok = false;
  switch (family) {
    case CopulaFamily::gaussian: ok = theta >= 0.0 && theta <= kMaxGaussianRho; break;
    case CopulaFamily::gumbel: ok = theta >= 1.0 && theta <= kMaxGumbelEta; break;
    case CopulaFamily::clayton: ok = theta > 0.0 && theta <= kMaxClaytonDelta; break;
  }
  if (!ok) {
    std::ostringstream os;
    os << to_string(family) << " copula parameter out of range: " << theta;
    throw std::domain_error(os.str());
  }
}

/// Copula parameter at separation d under the exponential-correlation link
/// k(d) = exp(-d / phi): rho = k, eta = 1 / (1 - k), delta = 2k / (1 - k),
/// with eta capped at 50, delta capped at 98, and rho capped below one.
inline double link(const CopulaSpec &spec, double d) {
  if (!(spec.phi > 0.0)) throw std::domain_error("link range parameter phi must be positive");
  if (!(d >= 0.0)) throw std::domain_error("link distance must be nonnegative");
  const double x = d / spec.phi;
  const double k = std::exp(-x);
  const double one_minus_k = -std::expm1(-x);
  switch (spec.family) {
    case CopulaFamily::gaussian:
      return std::min(k, kMaxGaussianRho);
    case CopulaFamily::gumbel:
      return one_minus_k > 0.0 ? std::min(1.0 / one_minus_k, kMaxGumbelEta) : kMaxGumbelEta;
    case CopulaFamily::clayton:
      if (!(one_minus_k > 0.0)) return kMaxClaytonDelta;
      return std::clamp(2.0 * k / one_minus_k, kMinClaytonDelta, kMaxClaytonDelta);
  }
  return 0.0;
}

/// Per-margin quantities that the density needs, computed once per value.
///  gaussian: v = Phi^{-1}(t)
///  gumbel:   v = -log t, lv = log(-log t)
///  clayton:  v = log t
struct CopulaCoord {
  double v = 0.0;
  double lv = 0.0;
};

inline CopulaCoord prepare(CopulaFamily family, const Uniform &u) {
  switch (family) {
    case CopulaFamily::gaussian:
      return {norm_quantile(u), 0.0};
    case CopulaFamily::gumbel: {
      const double a = -copula_detail::log_lower(u);
      return {a, std::log(a)};
    }
    case CopulaFamily::clayton:
      return {copula_detail::log_lower(u), 0.0};
  }
  return {};
}

/// Log copula density at prepared interior coordinates.
inline double log_density(CopulaFamily family, double theta, const CopulaCoord &c1,
                          const CopulaCoord &c2) {
  using namespace copula_detail;
  switch (family) {
    case CopulaFamily::gaussian: {
      const double r2 = theta * theta;
      const double x1 = c1.v, x2 = c2.v;
      return -0.5 * std::log1p(-r2) +
             (2.0 * theta * x1 * x2 - r2 * (x1 * x1 + x2 * x2)) / (2.0 * (1.0 - r2));
    }
    case CopulaFamily::gumbel: {
      const double eta = theta;
      const double log_a = log_add_exp(eta * c1.lv, eta * c2.lv);
      const double s = std::exp(log_a / eta);
      return -s + std::log(s + eta - 1.0) + (1.0 / eta - 2.0) * log_a +
             (eta - 1.0) * (c1.lv + c2.lv) + c1.v + c2.v;
    }
    case CopulaFamily::clayton: {
      const double delta = theta;
      const double e1 = -delta * c1.v, e2 = -delta * c2.v;
      double log_b;
      if (std::max(e1, e2) < 1.0) {
        log_b = std::log1p(std::expm1(e1) + std::expm1(e2));
      } else {
        const double m = std::max(e1, e2);
        log_b = m + std::log(std::exp(e1 - m) + std::exp(e2 - m) - std::exp(-m));
      }
      return std::log1p(delta) - (delta + 1.0) * (c1.v + c2.v) - (2.0 + 1.0 / delta) * log_b;
    }
  }
  return 0.0;
}

inline double log_density(CopulaFamily family, double theta, double t1, double t2) {
  copula_detail::require_interior(t1, "t1");
  copula_detail::require_interior(t2, "t2");
  validate_copula_param(family, theta);
  return log_density(family, theta, prepare(family, Uniform::from_lower(t1)),
                     prepare(family, Uniform::from_lower(t2)));
}

inline double density(CopulaFamily family, double theta, double t1, double t2) {
  return std::exp(log_density(family, theta, t1, t2));
}

/// Copula cdf C(t1, t2).
inline double cdf(CopulaFamily family, double theta, double t1, double t2) {
  using namespace copula_detail;
  require_unit(t1, "t1");
  require_unit(t2, "t2");
  validate_copula_param(family, theta);
  if (t1 == 0.0 || t2 == 0.0) return 0.0;
  if (t1 == 1.0) return t2;
  if (t2 == 1.0) return t1;
  switch (family) {
    case CopulaFamily::gaussian:
      return bvn_cdf(norm_quantile(t1), norm_quantile(t2), theta);
    case CopulaFamily::gumbel: {
      const double la1 = std::log(-std::log(t1)), la2 = std::log(-std::log(t2));
      return std::exp(-std::exp(log_add_exp(theta * la1, theta * la2) / theta));
    }
    case CopulaFamily::clayton: {
      const double e1 = -theta * std::log(t1), e2 = -theta * std::log(t2);
      double log_b;
      if (std::max(e1, e2) < 1.0) {
        log_b = std::log1p(std::expm1(e1) + std::expm1(e2));
      } else {
        const double m = std::max(e1, e2);
        log_b = m + std::log(std::exp(e1 - m) + std::exp(e2 - m) - std::exp(-m));
      }
      return std::exp(-log_b / theta);
    }
  }
  return 0.0;
}

/// Conditional cdf C_{1|2}(t1 | t2) = dC(t1, t2)/dt2 as a {p, q} pair, with
/// q = 1 - p computed directly so the upper tail keeps its digits.
inline Uniform conditional_cdf_levels(CopulaFamily family, double theta, double t1, double t2) {
  using namespace copula_detail;
  require_unit(t1, "t1");
  require_interior(t2, "t2");
  validate_copula_param(family, theta);
  if (t1 == 0.0) return {0.0, 1.0};
  if (t1 == 1.0) return {1.0, 0.0};
  double log_c = 0.0;
  switch (family) {
    case CopulaFamily::gaussian: {
      const double x1 = norm_quantile(t1), x2 = norm_quantile(t2);
      const double arg = (x1 - theta * x2) / std::sqrt(1.0 - theta * theta);
      return {norm_cdf(arg), norm_cdf(-arg)};
    }
    case CopulaFamily::gumbel: {
      const double a2 = -std::log(t2);
      const double sp = softplus(theta * (std::log(-std::log(t1)) - std::log(a2)));
      // both terms are <= 0 for eta >= 1
      log_c = std::min(0.0, -a2 * std::expm1(sp / theta) + (1.0 / theta - 1.0) * sp);
      break;
    }
    case CopulaFamily::clayton: {
      const double v = theta * std::log(t2) + log_expm1(-theta * std::log(t1));
      log_c = -(1.0 + 1.0 / theta) * softplus(v);
      break;
    }
  }
  return {std::exp(log_c), -std::expm1(log_c)};
}

inline double conditional_cdf(CopulaFamily family, double theta, double t1, double t2) {
  return conditional_cdf_levels(family, theta, t1, t2).p;
}

namespace copula_detail {

// Solves y + (eta - 1) log y = a2 + (eta - 1) log a2 - log z for y >= a2.
// Written in the offset d = log(y / a2) the equation reads
// a2 expm1(d) + (eta - 1) d = -log z, which keeps full relative precision
// in d when z is close to 1. h is convex and increasing, h(0) <= 0, so
// Newton from the right end of the bracket converges monotonically.
inline double gumbel_root_offset(double eta, double a2, double log_z) {
  const double target = -log_z;
  if (!(target > 0.0)) return 0.0;
  const auto h = [&](double d) { return a2 * std::expm1(d) + (eta - 1.0) * d - target; };
  double hi = std::log1p(target / a2);
  if (eta > 1.0) hi = std::min(hi, target / (eta - 1.0));
  double lo = 0.0;
  if (!(h(hi) >= -1e-12 * target) || !std::isfinite(hi)) {
    std::ostringstream os;
    os << "gumbel conditional inverse: root not bracketed (eta=" << eta << ", u2=" << a2
       << ", log z=" << log_z << ")";
    throw NumericalError(os.str());
  }
  double d = hi;
  for (int iter = 0; iter < 200; ++iter) {
    const double hd = h(d);
    if (hd == 0.0) return d;
    if (hd > 0.0) hi = d; else lo = d;
    double next = d - hd / (a2 * std::exp(d) + eta - 1.0);
    if (!(next >= lo && next <= hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - d) <= 4.0 * std::numeric_limits<double>::epsilon() * d) return next;
    d = next;
  }
  std::ostringstream os;
  os << "gumbel conditional inverse did not converge (eta=" << eta << ", u2=" << a2 << ")";
  throw NumericalError(os.str());
}

inline double gumbel_root(double eta, double a2, double log_z) {
  return a2 * std::exp(gumbel_root_offset(eta, a2, log_z));
}

}  // namespace copula_detail

/// Inverse of the conditional cdf: returns t1 with C_{1|2}(t1 | t2) = z.
/// Taking z as a {p, q} pair resolves t1 where z is too close to 1 for a double.
inline double conditional_sample(CopulaFamily family, double theta, double t2, const Uniform &z) {
  using namespace copula_detail;
  require_interior(t2, "t2");
  if (!(z.p > 0.0 && z.q > 0.0 && z.p <= 1.0 && z.q <= 1.0)) {
    std::ostringstream os;
    os << "z must lie in (0, 1), got p=" << z.p << " q=" << z.q;
    throw std::domain_error(os.str());
  }
  validate_copula_param(family, theta);
  const double log_z = log_lower(z);
  switch (family) {
    case CopulaFamily::gaussian:
      return norm_cdf(std::sqrt(1.0 - theta * theta) * norm_quantile(z) + theta * norm_quantile(t2));
    case CopulaFamily::gumbel: {
      const double a2 = -std::log(t2);
      const double d = gumbel_root_offset(theta, a2, log_z);
      if (!(d > 0.0)) return 1.0;
      const double log_a1 = std::log(a2) + d + std::log(-std::expm1(-theta * d)) / theta;
      return std::exp(-std::exp(log_a1));
    }
    case CopulaFamily::clayton: {
      const double w = log_expm1(-theta / (1.0 + theta) * log_z) - theta * std::log(t2);
      return std::exp(-softplus(w) / theta);
    }
  }
  return 0.0;
}

inline double conditional_sample(CopulaFamily family, double theta, double t2, double z) {
  copula_detail::require_interior(z, "z");
  return conditional_sample(family, theta, t2, Uniform::from_lower(z));
}

/// Joint pmf of (U, V) with discrete cdfs F1, F2 coupled by the copula:
/// C(b_u, b_v) - C(b_u, a_v) - C(a_u, b_v) + C(a_u, a_v), where
/// a_u = F1(u - 1) and b_u = F1(u).
template <typename Cdf1, typename Cdf2>
double discrete_pmf(CopulaFamily family, double theta, const Cdf1 &f1, const Cdf2 &f2, int u,
                    int v) {
  const double au = u > 0 ? f1(u - 1) : 0.0, bu = f1(u);
  const double av = v > 0 ? f2(v - 1) : 0.0, bv = f2(v);
  if (au > bu || av > bv) throw std::domain_error("discrete_pmf: input cdf is not monotone");
  const double val = cdf(family, theta, bu, bv) - cdf(family, theta, bu, av) -
                     cdf(family, theta, au, bv) + cdf(family, theta, au, av);
  return std::max(0.0, val);
}

}  // namespace dnnmp
