#pragma once

// Data, priors, model specification and sampler state shared by the fitting,
// prediction and diagnostic modules.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "dnnmp/copula.hpp"
#include "dnnmp/errors.hpp"
#include "dnnmp/geom.hpp"
#include "dnnmp/marginal.hpp"
#include "dnnmp/weights.hpp"

namespace dnnmp {

/// Observed counts at locations, with optional covariates (no intercept
/// column; one is added for regression marginals).
struct Dataset {
  std::vector<Location> sites;
  std::vector<int> counts;
  Eigen::MatrixXd covariates;  ///< rows = sites; may have zero columns

  std::size_t size() const { return sites.size(); }

  void validate() const {
    if (counts.size() != sites.size()) throw DataError("dataset: counts and sites differ in length");
    if (covariates.rows() != 0 && static_cast<std::size_t>(covariates.rows()) != sites.size())
      throw DataError("dataset: covariate rows do not match site count");
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] < 0) {
        std::ostringstream os;
        os << "dataset: negative count at row " << i;
        throw DataError(os.str());
      }
    }
    if (covariates.size() > 0 && !covariates.allFinite())
      throw DataError("dataset: non-finite covariate value");
    require_distinct(sites);
  }

  /// Intercept column followed by the covariates.
  Eigen::MatrixXd design() const {
    const auto n = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixXd x(n, 1 + covariates.cols());
    x.col(0).setOnes();
    if (covariates.cols() > 0) x.rightCols(covariates.cols()) = covariates;
    return x;
  }

  Dataset subset(const std::vector<std::size_t> &rows) const {
    Dataset d;
    d.covariates.resize(static_cast<Eigen::Index>(rows.size()), covariates.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      d.sites.push_back(sites[rows[k]]);
      d.counts.push_back(counts[rows[k]]);
      if (covariates.cols() > 0)
        d.covariates.row(static_cast<Eigen::Index>(k)) = covariates.row(static_cast<Eigen::Index>(rows[k]));
    }
    return d;
  }
};

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
  double log_density(double x) const {
    return shape * std::log(rate) - boost::math::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
  }
  double mean() const { return shape / rate; }
};

struct InverseGammaPrior {
  double shape = 3.0;
  double scale = 1.0;
  double log_density(double x) const {
    return shape * std::log(scale) - boost::math::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
  }
  double mean() const { return shape > 1.0 ? scale / (shape - 1.0) : scale; }
};

struct Priors {
  Eigen::VectorXd beta_mean;  ///< sized to the design when left empty
  Eigen::MatrixXd beta_cov;
  Eigen::Vector3d gamma_mean{-1.5, 0.0, 0.0};
  Eigen::Matrix3d gamma_cov = 2.0 * Eigen::Matrix3d::Identity();
  InverseGammaPrior kappa2{3.0, 1.0};
  InverseGammaPrior phi{3.0, 1.0};
  InverseGammaPrior zeta{3.0, 1.0};
  GammaPrior lambda{1.0, 1.0};
  GammaPrior r{1.0, 1.0};
  double default_beta_variance = 100.0;

  void validate(Eigen::Index p) const {
    const auto positive = [](double v, const char *what) {
      if (!(v > 0.0)) throw ConfigError(std::string("prior hyperparameter must be positive: ") + what);
    };
    positive(kappa2.shape, "kappa2.shape");
    positive(kappa2.scale, "kappa2.scale");
    positive(phi.shape, "phi.shape");
    positive(phi.scale, "phi.scale");
    positive(zeta.shape, "zeta.shape");
    positive(zeta.scale, "zeta.scale");
    positive(lambda.shape, "lambda.shape");
    positive(lambda.rate, "lambda.rate");
    positive(r.shape, "r.shape");
    positive(r.rate, "r.rate");
    if (Eigen::LLT<Eigen::Matrix3d>(gamma_cov).info() != Eigen::Success ||
        !gamma_cov.isApprox(gamma_cov.transpose()))
      throw ConfigError("gamma prior covariance must be symmetric positive definite");
    if (beta_mean.size() != 0 && beta_mean.size() != p)
      throw ConfigError("beta prior mean has the wrong dimension");
    if (beta_cov.size() != 0) {
      if (beta_cov.rows() != p || beta_cov.cols() != p)
        throw ConfigError("beta prior covariance has the wrong dimension");
      if (Eigen::LLT<Eigen::MatrixXd>(beta_cov).info() != Eigen::Success ||
          !beta_cov.isApprox(beta_cov.transpose()))
        throw ConfigError("beta prior covariance must be symmetric positive definite");
    }
  }

  Eigen::VectorXd beta_mean_or_default(Eigen::Index p) const {
    return beta_mean.size() == p ? beta_mean : Eigen::VectorXd::Zero(p);
  }
  Eigen::MatrixXd beta_cov_or_default(Eigen::Index p) const {
    return beta_cov.rows() == p ? beta_cov
                                : Eigen::MatrixXd(default_beta_variance * Eigen::MatrixXd::Identity(p, p));
  }
};

struct ModelSpec {
  MarginalFamily marginal = MarginalFamily::poisson;
  CopulaFamily copula = CopulaFamily::gaussian;
  int L = 10;
  Priors priors;
};

/// One state of the augmented model. Per-site vectors are indexed by
/// position in the reference ordering. t and ell are meaningful from the
/// third and second position on, respectively (t[0], t[1] are NaN,
/// ell[0] = -1, ell[1] = 0); ell is 0-based.
struct ModelState {
  double lambda = 1.0;
  Eigen::VectorXd beta;
  double r = 1.0;
  double phi = 0.5;
  double zeta = 0.5;
  Eigen::Vector3d gamma{-1.5, 0.0, 0.0};
  double kappa2 = 0.5;
  std::vector<double> o;
  std::vector<double> t;
  std::vector<int> ell;

  WeightParams weight_params() const { return {{gamma[0], gamma[1], gamma[2]}, kappa2, zeta}; }
};

/// The data arranged along a reference ordering, ready for fitting.
struct FitContext {
  OrderedReferenceSet ref;
  std::vector<int> y;      ///< counts in ordering positions
  Eigen::MatrixXd design;  ///< intercept + covariates, ordering positions
  ModelSpec spec;
  std::uint64_t ordering_seed = 0;

  std::size_t size() const { return y.size(); }

  MarginalModel marginal(const ModelState &s) const {
    if (spec.marginal == MarginalFamily::poisson) return MarginalModel::poisson(s.lambda);
    return MarginalModel::negative_binomial(s.beta, s.r, design);
  }

  CopulaSpec copula(const ModelState &s) const { return {spec.copula, s.phi}; }

  /// Distances from position i to each of its ordered neighbors.
  std::vector<double> neighbor_distances(std::size_t i) const {
    const auto &nb = ref.neighbors(i);
    std::vector<double> d(nb.size());
    for (std::size_t l = 0; l < nb.size(); ++l) d[l] = distance(ref.site(i), ref.site(static_cast<std::size_t>(nb[l])));
    return d;
  }
};

inline FitContext make_context(const Dataset &data, const ModelSpec &spec, std::uint64_t ordering_seed) {
  data.validate();
  if (spec.L < 1) throw ConfigError("neighbor budget L must be at least 1");
  const Eigen::MatrixXd x = data.design();
  spec.priors.validate(x.cols());
  if (data.size() < 2) throw DataError("fitting needs at least two sites");
  OrderedReferenceSet ref = random_ordering(data.sites, ordering_seed, spec.L);
  std::vector<int> y(data.size());
  Eigen::MatrixXd design(x.rows(), x.cols());
  for (std::size_t i = 0; i < data.size(); ++i) {
    y[i] = data.counts[ref.original_index(i)];
    design.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(ref.original_index(i)));
  }
  return FitContext{std::move(ref), std::move(y), std::move(design), spec, ordering_seed};
}

}  // namespace dnnmp
