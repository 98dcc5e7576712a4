#pragma once

// Discrete marginal families and their continued (jittered) counterparts.
//
// A count Y is continued to Y* = Y - O with O ~ Unif(0, 1). The continued
// cdf is Q*(y*) = Q(floor(y*)) + (y* - floor(y*)) g(floor(y*) + 1), which is
// piecewise linear, and the continued density is g(floor(y*) + 1).

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "dnnmp/errors.hpp"
#include "dnnmp/normal.hpp"

namespace dnnmp {

enum class MarginalFamily { poisson, negative_binomial };

inline std::string_view to_string(MarginalFamily f) {
  return f == MarginalFamily::poisson ? "poisson" : "negbin";
}

inline MarginalFamily marginal_family_from_string(std::string_view s) {
  if (s == "poisson") return MarginalFamily::poisson;
  if (s == "negbin" || s == "negative_binomial") return MarginalFamily::negative_binomial;
  throw ConfigError("unknown marginal family '" + std::string(s) + "'");
}

/// Count distribution at a single site: Poisson(mean) or NB(mean, r) with
/// success probability p = r / (mean + r).
class CountDistribution {
 public:
  CountDistribution(MarginalFamily family, double mean, double r = 1.0)
      : family_(family), mean_(mean), r_(r) {
    if (!(mean > 0.0) || !std::isfinite(mean))
      throw std::domain_error("count distribution mean must be positive and finite");
    if (family == MarginalFamily::negative_binomial) {
      if (!(r > 0.0) || !std::isfinite(r))
        throw std::domain_error("negative binomial dispersion must be positive");
      p_ = r / (mean + r);
      log_p_ = std::log(r) - std::log(mean + r);
      log_1mp_ = std::log(mean) - std::log(mean + r);
      lgamma_r_ = boost::math::lgamma(r);
    }
  }

  MarginalFamily family() const { return family_; }
  double mean() const { return mean_; }
  double dispersion() const { return r_; }

  double log_pmf(int y) const {
    if (y < 0) return -kInf;
    if (family_ == MarginalFamily::poisson)
      return y * std::log(mean_) - mean_ - boost::math::lgamma(y + 1.0);
    return boost::math::lgamma(y + r_) - lgamma_r_ - boost::math::lgamma(y + 1.0) + r_ * log_p_ +
           y * log_1mp_;
  }

  double pmf(int y) const { return std::exp(log_pmf(y)); }

  /// P(Y <= y); zero for y < 0.
  double cdf(int y) const {
    if (y < 0) return 0.0;
    if (family_ == MarginalFamily::poisson) return boost::math::gamma_q(y + 1.0, mean_);
    return boost::math::ibeta(r_, y + 1.0, p_);
  }

  /// P(Y > y); one for y < 0.
  double sf(int y) const {
    if (y < 0) return 1.0;
    if (family_ == MarginalFamily::poisson) return boost::math::gamma_p(y + 1.0, mean_);
    return boost::math::ibetac(r_, y + 1.0, p_);
  }

  /// Smallest k >= 0 with P(Y <= k) >= t, for t in (0, 1).
  int quantile(double t) const { return quantile(Uniform::from_lower(t)); }

  int quantile(const Uniform &t) const {
    if (!(t.p > 0.0 && t.q > 0.0)) throw std::domain_error("quantile level must lie in (0, 1)");
    // Walk the pmf recurrence to a candidate, then settle on the exact cdf.
    int k = 0;
    double pk = pmf(0), acc = pk;
    const double target = std::min(t.p, 1.0 - 1e-15);
    while (acc < target && k < 100000000) {
      pk *= family_ == MarginalFamily::poisson ? mean_ / (k + 1.0)
                                               : (k + r_) / (k + 1.0) * (1.0 - p_);
      ++k;
      acc += pk;
      if (pk == 0.0 && acc < target) break;
    }
    if (t.p <= 0.5) {
      while (cdf(k) < t.p) ++k;
      while (k > 0 && cdf(k - 1) >= t.p) --k;
    } else {
      while (sf(k) > t.q) ++k;
      while (k > 0 && sf(k - 1) <= t.q) --k;
    }
    return k;
  }

  /// Continued cdf of Y* at the point y - o, o in [0, 1], as a (lower,
  /// upper) pair: Q(y - 1) + (1 - o) g(y) and P(Y > y) + o g(y).
  Uniform continued(int y, double o) const {
    const double g = pmf(y);
    const double below = cdf(y - 1);
    if (below <= 0.5) {
      const double p = below + (1.0 - o) * g;
      return {p, std::max(0.0, 1.0 - p)};
    }
    const double q = sf(y) + o * g;
    return {std::max(0.0, 1.0 - q), q};
  }

 private:
  MarginalFamily family_;
  double mean_;
  double r_;
  double p_ = 0.0;
  double log_p_ = 0.0, log_1mp_ = 0.0, lgamma_r_ = 0.0;
};

/// Spatially varying marginal family: Poisson with a constant rate lambda, or
/// negative binomial with log mean x(v)'beta and dispersion r.
struct MarginalModel {
  MarginalFamily family = MarginalFamily::poisson;
  double lambda = 1.0;
  Eigen::VectorXd beta;
  double r = 1.0;
  Eigen::MatrixXd design;  ///< one row per site, intercept column included

  static MarginalModel poisson(double lambda) {
    MarginalModel m;
    m.family = MarginalFamily::poisson;
    m.lambda = lambda;
    return m;
  }

  static MarginalModel negative_binomial(Eigen::VectorXd beta, double r, Eigen::MatrixXd design) {
    MarginalModel m;
    m.family = MarginalFamily::negative_binomial;
    m.beta = std::move(beta);
    m.r = r;
    m.design = std::move(design);
    return m;
  }

  double mean_at(Eigen::Index site) const {
    if (family == MarginalFamily::poisson) return lambda;
    if (site < 0 || site >= design.rows()) throw std::out_of_range("marginal: site index out of range");
    return std::exp(design.row(site).dot(beta));
  }

  CountDistribution at(Eigen::Index site) const {
    return CountDistribution(family, mean_at(site), r);
  }
};

/// NB or Poisson distribution for an explicit covariate row.
inline CountDistribution marginal_for_covariates(const MarginalModel &m,
                                                 const Eigen::RowVectorXd &x) {
  if (m.family == MarginalFamily::poisson) return CountDistribution(m.family, m.lambda);
  if (x.size() != m.beta.size()) throw DataError("covariate dimension does not match the model");
  return CountDistribution(m.family, std::exp(x.dot(m.beta)), m.r);
}

inline double pmf(const MarginalModel &m, Eigen::Index site, int y) { return m.at(site).pmf(y); }
inline double log_pmf(const MarginalModel &m, Eigen::Index site, int y) {
  return m.at(site).log_pmf(y);
}
inline double cdf(const MarginalModel &m, Eigen::Index site, int y) { return m.at(site).cdf(y); }
inline int quantile(const MarginalModel &m, Eigen::Index site, double t) {
  return m.at(site).quantile(t);
}

/// Continued cdf Q*(y*) for y* > -1.
inline double continued_cdf(const CountDistribution &g, double y_star) {
  if (!(y_star > -1.0)) throw std::domain_error("continued_cdf: y* must exceed -1");
  const double m = std::floor(y_star);
  const int mi = static_cast<int>(m);
  return g.cdf(mi) + (y_star - m) * g.pmf(mi + 1);
}

/// Continued density g*(y*) = g(floor(y* + 1)).
inline double continued_pmf(const CountDistribution &g, double y_star) {
  if (!(y_star > -1.0)) throw std::domain_error("continued_pmf: y* must exceed -1");
  return g.pmf(static_cast<int>(std::floor(y_star + 1.0)));
}

/// Count and jitter recovered from a continued-cdf level.
struct ContinuedValue {
  int y = 0;
  double o = 0.0;
  double y_star() const { return y - o; }
};

/// Inverse of the continued cdf: with m the smallest count whose cdf reaches
/// t, y* = (m - 1) + (t - Q(m - 1)) / g(m).
inline ContinuedValue continued_inverse_value(const CountDistribution &g, const Uniform &t) {
  const int m = g.quantile(t);
  const double gm = g.pmf(m);
  double frac;
  if (t.p <= 0.5)
    frac = (t.p - g.cdf(m - 1)) / gm;
  else
    frac = (g.sf(m - 1) - t.q) / gm;
  frac = std::clamp(frac, 0.0, 1.0);
  return {m, 1.0 - frac};
}

inline double continued_inverse(const CountDistribution &g, double t) {
  if (!(t > 0.0 && t < 1.0)) throw std::domain_error("continued_inverse: t must lie in (0, 1)");
  return continued_inverse_value(g, Uniform::from_lower(t)).y_star();
}

inline double continued_cdf(const MarginalModel &m, Eigen::Index site, double y_star) {
  return continued_cdf(m.at(site), y_star);
}
inline double continued_pmf(const MarginalModel &m, Eigen::Index site, double y_star) {
  return continued_pmf(m.at(site), y_star);
}
inline double continued_inverse(const MarginalModel &m, Eigen::Index site, double t) {
  return continued_inverse(m.at(site), t);
}

/// Smallest M with 1 - Q(M) < tol; used to truncate supports in summations.
inline int support_bound(const CountDistribution &g, double tol = 1e-12) {
  int m = std::max(0, static_cast<int>(g.mean()));
  while (g.sf(m) >= tol) m = m + 1 + m / 4;
  while (m > 0 && g.sf(m - 1) < tol) --m;
  return m;
}

}  // namespace dnnmp
