#pragma once

// Synthetic data: Gaussian random fields, a skewed-field Poisson generator, a
// Poisson log-linear mixed model, and forward simulation of the count NNMP.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/skew_normal.hpp>

#include "dnnmp/copula.hpp"
#include "dnnmp/errors.hpp"
#include "dnnmp/geom.hpp"
#include "dnnmp/marginal.hpp"
#include "dnnmp/model.hpp"
#include "dnnmp/random.hpp"
#include "dnnmp/weights.hpp"

namespace dnnmp {

// ---- Gaussian random fields ---------------------------------------------

/// Zero-mean Gaussian vector with exponential covariance
/// variance * exp(-d / range), factored once and drawn repeatedly.
class GaussianField {
 public:
  GaussianField(std::span<const Location> sites, double range, double variance) {
    if (!(range > 0.0)) throw ConfigError("GP range must be positive");
    if (!(variance >= 0.0)) throw ConfigError("GP variance must be nonnegative");
    const auto n = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b <= a; ++b)
        k(a, b) = k(b, a) = variance * std::exp(-distance(sites[static_cast<std::size_t>(a)],
                                                          sites[static_cast<std::size_t>(b)]) / range);
    if (variance == 0.0) {
      chol_ = Eigen::MatrixXd::Zero(n, n);
      return;
    }
    for (double jitter = 0.0; jitter <= 1e-6 * 1.0001; jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0) {
      Eigen::MatrixXd kj = k;
      kj.diagonal().array() += jitter * variance;
      Eigen::LLT<Eigen::MatrixXd> llt(kj);
      if (llt.info() == Eigen::Success) {
        chol_ = llt.matrixL();
        return;
      }
    }
    throw NumericalError("GP covariance factorization failed at the largest jitter");
  }

  Eigen::VectorXd draw(Rng &rng) const {
    Eigen::VectorXd z(chol_.rows());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = standard_normal(rng);
    return chol_.triangularView<Eigen::Lower>() * z;
  }

  const Eigen::MatrixXd &cholesky() const { return chol_; }

 private:
  Eigen::MatrixXd chol_;
};

inline Eigen::VectorXd gp_sample(std::span<const Location> sites, double range, double variance,
                                 std::uint64_t seed) {
  Rng rng(seed);
  return GaussianField(sites, range, variance).draw(rng);
}

// ---- site layouts -------------------------------------------------------

/// `count` distinct nodes of a regular grid x grid lattice on [0, 1]^2,
/// chosen uniformly without replacement.
inline std::vector<Location> sample_grid_sites(int grid, std::size_t count, Rng &rng) {
  if (grid < 2) throw ConfigError("grid resolution must be at least 2");
  const auto total = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
  if (count > total) throw ConfigError("more sites requested than grid nodes");
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(total - i));
    std::swap(idx[i], idx[std::min(j, total - 1)]);
  }
  std::vector<Location> out(count);
  const double h = 1.0 / (grid - 1);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = {static_cast<double>(idx[i] % static_cast<std::size_t>(grid)) * h,
              static_cast<double>(idx[i] / static_cast<std::size_t>(grid)) * h};
  return out;
}

inline std::vector<Location> uniform_sites(std::size_t count, Rng &rng) {
  std::vector<Location> out(count);
  for (auto &s : out) s = {uniform_open(rng), uniform_open(rng)};
  return out;
}

// ---- skewed-field Poisson data ------------------------------------------

struct SkewFieldConfig {
  double sigma1 = 3.0;
  double sigma2 = 1.0;
  double gp_range = 0.1;
  double lambda0 = 5.0;
  int grid = 120;
  std::size_t n_sites = 1000;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
    if (!(gp_range > 0.0)) throw ConfigError("gp_range must be positive");
    if (!(lambda0 > 0.0)) throw ConfigError("lambda0 must be positive");
    if (!(sigma1 >= 0.0) || !std::isfinite(sigma1)) throw ConfigError("sigma1 must be finite and nonnegative");
  }
};

/// cdf of z = sigma1 |w1| + sigma2 w2 for independent standard normals,
/// returned as a (lower, upper) pair.
inline Uniform skew_field_cdf(double z, double sigma1, double sigma2) {
  if (sigma1 == 0.0) return {norm_cdf(z / sigma2), norm_cdf(-z / sigma2)};
  const boost::math::skew_normal_distribution<double> d(0.0, std::hypot(sigma1, sigma2), sigma1 / sigma2);
  return {boost::math::cdf(d, z), boost::math::cdf(boost::math::complement(d, z))};
}

/// Latent values z and counts y = Poisson(lambda0) quantile of F_Z(z).
struct SimulatedField {
  Dataset data;
  Eigen::VectorXd latent;
};

inline SimulatedField skew_field_counts(const SkewFieldConfig &cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SimulatedField out;
  out.data.sites = sample_grid_sites(cfg.grid, cfg.n_sites, rng);
  const GaussianField field(out.data.sites, cfg.gp_range, 1.0);
  const Eigen::VectorXd w1 = field.draw(rng);
  const Eigen::VectorXd w2 = field.draw(rng);
  out.latent = cfg.sigma1 * w1.cwiseAbs() + cfg.sigma2 * w2;
  const CountDistribution g(MarginalFamily::poisson, cfg.lambda0);
  out.data.counts.resize(cfg.n_sites);
  for (std::size_t i = 0; i < cfg.n_sites; ++i) {
    Uniform u = skew_field_cdf(out.latent[static_cast<Eigen::Index>(i)], cfg.sigma1, cfg.sigma2);
    u.p = std::max(u.p, 1e-300);
    u.q = std::max(u.q, 1e-300);
    out.data.counts[i] = g.quantile(u);
  }
  out.data.covariates.resize(static_cast<Eigen::Index>(cfg.n_sites), 0);
  return out;
}

// ---- Poisson log-linear mixed model -------------------------------------

struct SglmmConfig {
  Eigen::Vector3d beta{1.5, 1.0, 2.0};
  double gp_sigma2 = 0.2;
  double gp_range = 1.0 / 12.0;
  int grid = 120;
  std::size_t n_sites = 1000;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(gp_sigma2 >= 0.0)) throw ConfigError("gp_sigma2 must be nonnegative");
    if (!(gp_range > 0.0)) throw ConfigError("gp_range must be positive");
    if (!beta.allFinite()) throw ConfigError("beta must be finite");
  }
};

/// Counts y ~ Poisson(exp(beta0 + beta1 v1 + beta2 v2 + z)); the coordinates
/// are returned as the two covariates.
inline SimulatedField sglmm_counts(const SglmmConfig &cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SimulatedField out;
  out.data.sites = sample_grid_sites(cfg.grid, cfg.n_sites, rng);
  out.latent = GaussianField(out.data.sites, cfg.gp_range, cfg.gp_sigma2).draw(rng);
  const auto n = static_cast<Eigen::Index>(cfg.n_sites);
  out.data.covariates.resize(n, 2);
  out.data.counts.resize(cfg.n_sites);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Location &s = out.data.sites[static_cast<std::size_t>(i)];
    out.data.covariates(i, 0) = s.x;
    out.data.covariates(i, 1) = s.y;
    const double mu = std::exp(cfg.beta[0] + cfg.beta[1] * s.x + cfg.beta[2] * s.y + out.latent[i]);
    out.data.counts[static_cast<std::size_t>(i)] = std::poisson_distribution<int>(mu)(rng);
  }
  return out;
}

// ---- the count NNMP itself ----------------------------------------------

/// How a neighbor's count is mapped to a copula level during forward
/// simulation. `shared`: every site keeps one jitter o, reused on every edge
/// that conditions on it (the augmented model). `per_edge`: each edge draws
/// its own jitter, which reproduces the discrete conditional pmfs exactly.
enum class ExtensionMode { shared, per_edge };

struct NnmpParams {
  MarginalModel marginal;  ///< design rows, if any, in ordering positions
  CopulaSpec copula;
  WeightParams weights;
};

struct ForwardDraw {
  std::vector<int> y;
  std::vector<double> o;
  std::vector<int> ell;  ///< chosen component per position (-1 at the first)
};

/// Weights of position i over its ordered neighbors.
inline std::vector<double> neighbor_weights(const OrderedReferenceSet &ref, std::size_t i, const WeightParams &wp) {
  const auto &nb = ref.neighbors(i);
  if (nb.size() <= 1) return std::vector<double>(nb.size(), 1.0);
  std::vector<double> d(nb.size());
  for (std::size_t l = 0; l < nb.size(); ++l) d[l] = distance(ref.site(i), ref.site(static_cast<std::size_t>(nb[l])));
  CutoffVector cut;
  cutoffs_from_distances(d, wp.zeta, cut);
  std::vector<double> w;
  mixture_weights(cut, wp.mean_at(ref.site(i)), std::sqrt(wp.kappa2), w);
  return w;
}

inline ForwardDraw nnmp_forward_sample(const OrderedReferenceSet &ref, const NnmpParams &par, Rng &rng,
                                       ExtensionMode mode = ExtensionMode::shared) {
  const std::size_t n = ref.size();
  ForwardDraw out;
  out.y.resize(n);
  out.o.resize(n);
  out.ell.assign(n, -1);
  std::vector<CountDistribution> g;
  g.reserve(n);
  for (std::size_t i = 0; i < n; ++i) g.push_back(par.marginal.at(static_cast<Eigen::Index>(i)));
  std::vector<double> lw;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      const ContinuedValue v = continued_inverse_value(g[0], Uniform::from_lower(uniform_open(rng)));
      out.y[0] = v.y;
      out.o[0] = v.o;
      continue;
    }
    const auto &nb = ref.neighbors(i);
    std::size_t l = 0;
    if (nb.size() > 1) {
      const auto w = neighbor_weights(ref, i, par.weights);
      lw.resize(w.size());
      for (std::size_t k = 0; k < w.size(); ++k) lw[k] = w[k] > 0.0 ? std::log(w[k]) : -kInf;
      l = categorical_log(rng, lw);
    }
    out.ell[i] = static_cast<int>(l);
    const auto j = static_cast<std::size_t>(nb[l]);
    const double oj = mode == ExtensionMode::shared ? out.o[j] : uniform_open(rng);
    const Uniform t2 = g[j].continued(out.y[j], oj);
    const double theta = link(par.copula, distance(ref.site(i), ref.site(j)));
    const double t1 = conditional_sample(par.copula.family, theta, std::clamp(t2.p, 1e-300, 1.0 - 0x1.0p-53),
                                         uniform_open(rng));
    const ContinuedValue v =
        continued_inverse_value(g[i], Uniform::from_lower(std::clamp(t1, 1e-300, 1.0 - 0x1.0p-53)));
    out.y[i] = v.y;
    out.o[i] = v.o;
  }
  return out;
}

/// Joint pmf of counts along the ordering as the product of the first
/// marginal and the mixture conditionals sum_l w_l f(y_i | y_(il)), where
/// each bivariate pmf comes from copula rectangle volumes.
inline double sequential_joint_pmf(const OrderedReferenceSet &ref, const NnmpParams &par, std::span<const int> y) {
  const std::size_t n = ref.size();
  if (y.size() != n) throw std::invalid_argument("sequential_joint_pmf: wrong number of counts");
  std::vector<CountDistribution> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(par.marginal.at(static_cast<Eigen::Index>(i)));
  double p = g[0].pmf(y[0]);
  for (std::size_t i = 1; i < n; ++i) {
    const auto &nb = ref.neighbors(i);
    const auto w = neighbor_weights(ref, i, par.weights);
    double cond = 0.0;
    for (std::size_t l = 0; l < nb.size(); ++l) {
      const auto j = static_cast<std::size_t>(nb[l]);
      const double theta = link(par.copula, distance(ref.site(i), ref.site(j)));
      const auto fi = [&](int k) { return g[i].cdf(k); };
      const auto fj = [&](int k) { return g[j].cdf(k); };
      const double joint = discrete_pmf(par.copula.family, theta, fi, fj, y[i], y[j]);
      cond += w[l] * joint / g[j].pmf(y[j]);
    }
    p *= cond;
  }
  return p;
}

}  // namespace dnnmp
