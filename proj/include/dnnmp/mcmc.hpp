#pragma once

// Metropolis-within-Gibbs sampler for the augmented model: latent
// configuration (t, ell), auxiliary jitters o, conjugate gamma / kappa2 and
// random-walk updates for the marginal, copula and kernel parameters.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dnnmp/copula.hpp"
#include "dnnmp/errors.hpp"
#include "dnnmp/marginal.hpp"
#include "dnnmp/model.hpp"
#include "dnnmp/random.hpp"
#include "dnnmp/weights.hpp"

namespace dnnmp {

/// Which blocks a sweep updates. Switching blocks off holds them fixed,
/// which is how conditional samplers are checked against exact targets.
struct UpdateMask {
  bool t_ell = true;
  bool o = true;
  bool gamma = true;
  bool kappa2 = true;
  bool marginal = true;
  bool phi = true;
  bool zeta = true;
};

struct StepSizes {
  double lambda = 0.05;
  double r = 0.1;
  double phi = 0.1;
  double zeta = 0.1;
  double beta = 1.0;  ///< multiplies the Cholesky factor of the GLM covariance
};

struct ChainConfig {
  int n_iter = 20000;
  int burnin = 4000;
  int thin = 4;
  std::uint64_t seed = 1;
  bool adapt = true;
  double target_accept = 0.35;
  StepSizes steps;
  UpdateMask updates;
  /// Drop every data-dependent factor, leaving the prior and the latent
  /// augmentation. Used to check that the chain recovers the prior.
  bool prior_only = false;
  bool keep_latent = false;  ///< also store t and ell in each sample
  std::optional<ModelState> init;
  int chain = 0;

  void validate() const {
    if (n_iter < 0 || burnin < 0 || n_iter < burnin)
      throw ConfigError("chain lengths must satisfy n_iter >= burnin >= 0");
    if (thin < 1) throw ConfigError("thin must be at least 1");
    if (!(target_accept > 0.0 && target_accept < 1.0))
      throw ConfigError("target acceptance must lie in (0, 1)");
  }
};

struct BlockRate {
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / proposed; }
};

struct PosteriorSamples {
  std::vector<ModelState> samples;
  std::map<std::string, double> acceptance;  ///< post-burn-in rates per block
  std::map<std::string, double> step_sizes;  ///< frozen values after burn-in
  std::uint64_t seed = 0;
  int n_iter = 0;
  int burnin = 0;
  int thin = 1;
  int chain = 0;
};

namespace mcmc_detail {

/// Q(y - 1), P(Y > y) and g(y) for one observed count; the continued cdf at
/// y - o follows from these without further special-function calls.
struct Cell {
  double below = 0.0;
  double above = 0.0;
  double g = 0.0;
  double log_g = 0.0;

  Uniform at(double o) const {
    if (below <= 0.5) {
      const double p = below + (1.0 - o) * g;
      return {p, std::max(0.0, 1.0 - p)};
    }
    const double q = above + o * g;
    return {std::max(0.0, 1.0 - q), q};
  }
};

inline Cell make_cell(const CountDistribution &dist, int y) {
  Cell c;
  c.log_g = dist.log_pmf(y);
  c.g = std::exp(c.log_g);
  c.below = dist.cdf(y - 1);
  c.above = c.below <= 0.5 ? std::max(0.0, 1.0 - c.below - c.g) : dist.sf(y);
  return c;
}

inline bool finite_uniform(const Uniform &u) { return u.p > 0.0 && u.q > 0.0; }

}  // namespace mcmc_detail

/// Log-likelihood of the continued data given the jitters o: the first
/// site's continued density times the mixture conditionals of the rest.
inline double log_likelihood(const FitContext &ctx, const ModelState &s) {
  const std::size_t n = ctx.size();
  if (s.o.size() != n) throw std::invalid_argument("log_likelihood: state has the wrong size");
  const MarginalModel marg = ctx.marginal(s);
  const CopulaSpec cop = ctx.copula(s);
  std::vector<Uniform> u(n);
  std::vector<CopulaCoord> coord(n);
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(s.o[i] >= 0.0 && s.o[i] < 1.0)) throw DataError("log_likelihood: continued value outside (y - 1, y]");
    const CountDistribution g = marg.at(static_cast<Eigen::Index>(i));
    u[i] = g.continued(ctx.y[i], s.o[i]);
    coord[i] = prepare(cop.family, u[i]);
    ll += g.log_pmf(ctx.y[i]);
  }
  const WeightParams wp = s.weight_params();
  CutoffVector cut;
  std::vector<double> w;
  for (std::size_t i = 1; i < n; ++i) {
    const auto &nb = ctx.ref.neighbors(i);
    const auto d = ctx.neighbor_distances(i);
    if (nb.size() == 1) {
      w.assign(1, 1.0);
    } else {
      cutoffs_from_distances(d, wp.zeta, cut);
      mixture_weights(cut, wp.mean_at(ctx.ref.site(i)), std::sqrt(wp.kappa2), w);
    }
    double acc = -kInf;
    for (std::size_t l = 0; l < nb.size(); ++l) {
      if (w[l] <= 0.0) continue;
      const double term = std::log(w[l]) + log_density(cop.family, link(cop, d[l]), coord[i],
                                                       coord[static_cast<std::size_t>(nb[l])]);
      acc = copula_detail::log_add_exp(acc, term);
    }
    ll += acc;
  }
  if (!std::isfinite(ll)) throw NumericalError("log_likelihood is not finite");
  return ll;
}

class Sampler {
 public:
  Sampler(const FitContext &ctx, ChainConfig cfg) : ctx_(ctx), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.validate();
    n_ = ctx_.size();
    family_ = ctx_.spec.copula;
    const auto &pri = ctx_.spec.priors;
    p_ = ctx_.design.cols();
    beta_mean_ = pri.beta_mean_or_default(p_);
    beta_prec_ = pri.beta_cov_or_default(p_).inverse();
    nbr_.resize(n_);
    dist_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      nbr_[i] = ctx_.ref.neighbors(i);
      dist_[i] = ctx_.neighbor_distances(i);
    }
    // Rows (1, x, y) for the sites that carry a latent t.
    const std::size_t m = n_ > 2 ? n_ - 2 : 0;
    dmat_.resize(static_cast<Eigen::Index>(m), 3);
    for (std::size_t i = 2; i < n_; ++i) {
      const auto &s = ctx_.ref.site(i);
      dmat_.row(static_cast<Eigen::Index>(i - 2)) << 1.0, s.x, s.y;
    }
    dtd_ = dmat_.transpose() * dmat_;
    gamma_prec_ = pri.gamma_cov.inverse();
    gamma_prec_mean_ = gamma_prec_ * pri.gamma_mean;
    steps_ = cfg_.steps;
    initialize();
  }

  const ModelState &state() const { return st_; }
  const std::map<std::string, BlockRate> &rates() const { return rates_; }

  /// One full sweep in the fixed order (t, ell) -> o -> gamma -> kappa2 ->
  /// marginal -> phi -> zeta. `adapt_k` >= 0 enables step tuning.
  void sweep(int adapt_k = -1) {
    const auto &m = cfg_.updates;
    if (m.t_ell) update_t_and_ell();
    if (m.o) update_o();
    if (m.gamma) update_gamma();
    if (m.kappa2) update_kappa2();
    if (m.marginal) {
      if (ctx_.spec.marginal == MarginalFamily::poisson) {
        update_lambda(adapt_k);
      } else {
        update_beta(adapt_k);
        update_r(adapt_k);
      }
    }
    if (m.phi) update_phi(adapt_k);
    if (m.zeta) update_zeta(adapt_k);
  }

  PosteriorSamples run() {
    PosteriorSamples out;
    out.seed = cfg_.seed;
    out.n_iter = cfg_.n_iter;
    out.burnin = cfg_.burnin;
    out.thin = cfg_.thin;
    out.chain = cfg_.chain;
    for (int it = 0; it < cfg_.n_iter; ++it) {
      const bool burning = it < cfg_.burnin;
      if (it == cfg_.burnin) rates_.clear();
      sweep(burning && cfg_.adapt ? it : -1);
      if (!burning && (it - cfg_.burnin + 1) % cfg_.thin == 0) out.samples.push_back(snapshot());
    }
    for (const auto &[name, r] : rates_) out.acceptance[name] = r.rate();
    out.step_sizes = {{"lambda", steps_.lambda}, {"r", steps_.r},     {"phi", steps_.phi},
                      {"zeta", steps_.zeta},     {"beta", steps_.beta}};
    return out;
  }

  /// Log of the augmented joint density at the current state (up to the
  /// constant of the uniform o and the indicator on t); used in tests.
  double augmented_log_target() const {
    double v = 0.0;
    if (!cfg_.prior_only) {
      for (std::size_t i = 0; i < n_; ++i) v += cell_[i].log_g;
      for (std::size_t i = 1; i < n_; ++i) v += own_[i];
    }
    return v;
  }

 private:
  using Cell = mcmc_detail::Cell;

  // ---- initialization ------------------------------------------------

  void initialize() {
    const auto &pri = ctx_.spec.priors;
    if (cfg_.init) {
      st_ = *cfg_.init;
      if (st_.o.size() != n_) throw ConfigError("initial state has the wrong number of sites");
      if (st_.t.size() != n_ || st_.ell.size() != n_) {
        st_.t.assign(n_, std::numeric_limits<double>::quiet_NaN());
        st_.ell.assign(n_, 0);
        init_latent_ = true;
      }
    } else {
      st_.o.assign(n_, 0.5);
      st_.t.assign(n_, std::numeric_limits<double>::quiet_NaN());
      st_.ell.assign(n_, 0);
      st_.phi = pri.phi.mean();
      st_.zeta = pri.zeta.mean();
      st_.gamma = pri.gamma_mean;
      st_.kappa2 = pri.kappa2.mean();
      init_marginal();
      init_latent_ = true;
    }
    if (n_ > 0) st_.ell[0] = -1;
    if (n_ > 1) st_.ell[1] = 0;
    if (ctx_.spec.marginal == MarginalFamily::negative_binomial && st_.beta.size() != p_)
      throw ConfigError("initial beta has the wrong dimension");
    beta_chol_ = glm_proposal_chol();

    refresh_cells();
    refresh_theta();
    refresh_cutoffs();
    if (init_latent_) {
      for (std::size_t i = 2; i < n_; ++i) {
        // median of the Gaussian restricted to the first interval
        const double mu = mean_at(i), kappa = std::sqrt(st_.kappa2);
        const double hi = (cut_[i].r_star[1] - mu) / kappa;
        st_.t[i] = mu + kappa * norm_quantile(0.5 * norm_cdf(hi));
        if (!std::isfinite(st_.t[i])) st_.t[i] = cut_[i].r_star[1] - kappa;
      }
    }
    for (std::size_t i = 2; i < n_; ++i) {
      const auto l = static_cast<std::size_t>(st_.ell[i]);
      if (l >= nbr_[i].size() || !(st_.t[i] > cut_[i].r_star[l] && st_.t[i] < cut_[i].r_star[l + 1]))
        throw NumericalError("initial latent t lies outside its configuration interval at position " +
                             std::to_string(i));
    }
    rebuild_children();
    refresh_own();
    check_finite_start();
  }

  void init_marginal() {
    double ybar = 0.0;
    for (int y : ctx_.y) ybar += y;
    ybar = n_ > 0 ? ybar / static_cast<double>(n_) : 1.0;
    st_.lambda = std::max(ybar, 0.1);
    if (ctx_.spec.marginal != MarginalFamily::negative_binomial) {
      st_.beta.resize(0);
      return;
    }
    st_.beta = Eigen::VectorXd::Zero(p_);
    st_.beta[0] = std::log(std::max(ybar, 0.1));
    // Iteratively reweighted least squares for a Poisson log-linear fit.
    for (int k = 0; k < 25; ++k) {
      const Eigen::VectorXd eta = ctx_.design * st_.beta;
      const Eigen::VectorXd mu = eta.array().min(30.0).exp();
      Eigen::VectorXd z(static_cast<Eigen::Index>(n_));
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = eta[i] + (ctx_.y[static_cast<std::size_t>(i)] - mu[i]) / mu[i];
      const Eigen::MatrixXd xtw = ctx_.design.transpose() * mu.asDiagonal();
      const Eigen::MatrixXd a = xtw * ctx_.design + 1e-8 * Eigen::MatrixXd::Identity(p_, p_);
      const Eigen::VectorXd next = a.ldlt().solve(xtw * z);
      if (!next.allFinite()) break;
      const double change = (next - st_.beta).cwiseAbs().maxCoeff();
      st_.beta = next;
      if (change < 1e-10) break;
    }
    if (!st_.beta.allFinite()) {
      st_.beta = Eigen::VectorXd::Zero(p_);
      st_.beta[0] = std::log(std::max(ybar, 0.1));
    }
    // method-of-moments dispersion around the fitted means
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double mu = std::exp(ctx_.design.row(static_cast<Eigen::Index>(i)).dot(st_.beta));
      const double e = ctx_.y[i] - mu;
      num += mu * mu;
      den += e * e - mu;
    }
    st_.r = den > 0.0 ? std::clamp(num / den, 0.1, 100.0) : 100.0;
  }

  /// Cholesky factor of a proposal covariance for beta, taken from the
  /// negative-binomial information at the current state.
  Eigen::MatrixXd glm_proposal_chol() const {
    if (ctx_.spec.marginal != MarginalFamily::negative_binomial) return {};
    Eigen::MatrixXd info = beta_prec_;
    for (std::size_t i = 0; i < n_; ++i) {
      const Eigen::RowVectorXd x = ctx_.design.row(static_cast<Eigen::Index>(i));
      const double mu = std::exp(std::min(30.0, x.dot(st_.beta)));
      const double wgt = mu * st_.r / (mu + st_.r);
      info += wgt * x.transpose() * x;
    }
    const Eigen::MatrixXd cov = info.inverse();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("beta proposal covariance is not positive definite");
    return (2.38 / std::sqrt(static_cast<double>(p_))) * Eigen::MatrixXd(llt.matrixL());
  }

  void check_finite_start() const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (!std::isfinite(cell_[i].log_g))
        throw NumericalError("non-finite marginal log-density at initialization (position " +
                             std::to_string(i) + ")");
      if (!mcmc_detail::finite_uniform(u_[i]))
        throw NumericalError("continued cdf at the boundary at initialization (position " +
                             std::to_string(i) + ")");
    }
    for (std::size_t i = 1; i < n_; ++i)
      if (!std::isfinite(own_[i]))
        throw NumericalError("non-finite copula log-density at initialization (position " +
                             std::to_string(i) + ")");
  }

  // ---- caches --------------------------------------------------------

  double mean_at(std::size_t i) const {
    const auto &s = ctx_.ref.site(i);
    return st_.gamma[0] + st_.gamma[1] * s.x + st_.gamma[2] * s.y;
  }

  std::vector<Cell> compute_cells(double lambda, const Eigen::VectorXd &beta, double r) const {
    std::vector<Cell> cells(n_);
    if (ctx_.spec.marginal == MarginalFamily::poisson) {
      const CountDistribution dist(MarginalFamily::poisson, lambda);
      std::map<int, Cell> memo;
      for (std::size_t i = 0; i < n_; ++i) {
        auto it = memo.find(ctx_.y[i]);
        if (it == memo.end()) it = memo.emplace(ctx_.y[i], mcmc_detail::make_cell(dist, ctx_.y[i])).first;
        cells[i] = it->second;
      }
    } else {
      const Eigen::VectorXd eta = ctx_.design * beta;
      for (std::size_t i = 0; i < n_; ++i) {
        const double mu = std::exp(eta[static_cast<Eigen::Index>(i)]);
        if (!(mu > 0.0) || !std::isfinite(mu)) {
          cells[i].log_g = -kInf;
          continue;
        }
        cells[i] = mcmc_detail::make_cell(CountDistribution(MarginalFamily::negative_binomial, mu, r), ctx_.y[i]);
      }
    }
    return cells;
  }

  void refresh_cells() {
    cell_ = compute_cells(st_.lambda, st_.beta, st_.r);
    u_.resize(n_);
    coord_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      u_[i] = cell_[i].at(st_.o[i]);
      coord_[i] = prepare(family_, u_[i]);
    }
  }

  void refresh_theta() {
    theta_.resize(n_);
    const CopulaSpec spec{family_, st_.phi};
    for (std::size_t i = 0; i < n_; ++i) {
      theta_[i].resize(nbr_[i].size());
      for (std::size_t l = 0; l < nbr_[i].size(); ++l) theta_[i][l] = link(spec, dist_[i][l]);
    }
  }

  void refresh_cutoffs() {
    cut_.resize(n_);
    for (std::size_t i = 2; i < n_; ++i) cutoffs_from_distances(dist_[i], st_.zeta, cut_[i]);
  }

  double edge_term(std::size_t i, std::size_t l, const CopulaCoord &ci, const CopulaCoord &cj) const {
    if (cfg_.prior_only) return 0.0;
    return log_density(family_, theta_[i][l], ci, cj);
  }

  std::size_t parent(std::size_t i) const {
    return static_cast<std::size_t>(nbr_[i][static_cast<std::size_t>(st_.ell[i])]);
  }

  void refresh_own() {
    own_.assign(n_, 0.0);
    for (std::size_t i = 1; i < n_; ++i)
      own_[i] = edge_term(i, static_cast<std::size_t>(st_.ell[i]), coord_[i], coord_[parent(i)]);
  }

  void rebuild_children() {
    children_.assign(n_, {});
    for (std::size_t i = 1; i < n_; ++i) children_[parent(i)].push_back(static_cast<int>(i));
  }

  void unlink_child(std::size_t p, std::size_t child) {
    auto &v = children_[p];
    const auto it = std::find(v.begin(), v.end(), static_cast<int>(child));
    *it = v.back();
    v.pop_back();
  }

  ModelState snapshot() const {
    ModelState s = st_;
    if (!cfg_.keep_latent) {
      s.t.clear();
      s.ell.clear();
    }
    return s;
  }

  // ---- adaptation ----------------------------------------------------

  void record(const std::string &block, bool accepted, double &step, int adapt_k) {
    auto &r = rates_[block];
    ++r.proposed;
    if (accepted) ++r.accepted;
    if (adapt_k >= 0) {
      const double gain = 1.0 / std::pow(adapt_k + 1.0, 0.6);
      step *= std::exp(gain * ((accepted ? 1.0 : 0.0) - cfg_.target_accept));
      step = std::clamp(step, 1e-6, 1e3);
    }
  }

  bool accept(double log_ratio) {
    if (log_ratio >= 0.0) return true;
    if (std::isnan(log_ratio)) return false;
    return std::log(uniform_open(rng_)) < log_ratio;
  }

  // ---- latent blocks -------------------------------------------------

  void update_t_and_ell() {
    const double kappa = std::sqrt(st_.kappa2);
    std::vector<double> w, logp;
    for (std::size_t i = 2; i < n_; ++i) {
      const std::size_t k = nbr_[i].size();
      const double mu = mean_at(i);
      std::size_t l_new = 0;
      if (k > 1) {
        mixture_weights(cut_[i], mu, kappa, w);
        logp.resize(k);
        for (std::size_t l = 0; l < k; ++l)
          logp[l] = (w[l] > 0.0 ? std::log(w[l]) : -kInf) +
                    edge_term(i, l, coord_[i], coord_[static_cast<std::size_t>(nbr_[i][l])]);
        l_new = categorical_log(rng_, logp);
      }
      st_.t[i] = truncated_normal(rng_, mu, kappa, cut_[i].r_star[l_new], cut_[i].r_star[l_new + 1]);
      const auto l_old = static_cast<std::size_t>(st_.ell[i]);
      if (l_new != l_old) {
        unlink_child(parent(i), i);
        st_.ell[i] = static_cast<int>(l_new);
        children_[parent(i)].push_back(static_cast<int>(i));
        own_[i] = k > 1 ? logp[l_new] - std::log(w[l_new]) : own_[i];
        if (!std::isfinite(own_[i])) own_[i] = edge_term(i, l_new, coord_[i], coord_[parent(i)]);
      }
    }
  }

  void update_o() {
    for (std::size_t i = 0; i < n_; ++i) {
      const double o_new = uniform_open(rng_);
      if (cfg_.prior_only) {
        st_.o[i] = o_new;
        u_[i] = cell_[i].at(o_new);
        coord_[i] = prepare(family_, u_[i]);
        record("o", true, dummy_step_, -1);
        continue;
      }
      const Uniform u_new = cell_[i].at(o_new);
      if (!mcmc_detail::finite_uniform(u_new)) {
        record("o", false, dummy_step_, -1);
        continue;
      }
      const CopulaCoord c_new = prepare(family_, u_new);
      double own_new = 0.0, delta = 0.0;
      if (i >= 1) {
        own_new = edge_term(i, static_cast<std::size_t>(st_.ell[i]), c_new, coord_[parent(i)]);
        delta += own_new - own_[i];
      }
      child_new_.clear();
      for (int j : children_[i]) {
        const auto ju = static_cast<std::size_t>(j);
        const double v = edge_term(ju, static_cast<std::size_t>(st_.ell[ju]), coord_[ju], c_new);
        child_new_.push_back(v);
        delta += v - own_[ju];
      }
      const bool ok = accept(delta);
      record("o", ok, dummy_step_, -1);
      if (!ok) continue;
      st_.o[i] = o_new;
      u_[i] = u_new;
      coord_[i] = c_new;
      if (i >= 1) own_[i] = own_new;
      for (std::size_t k = 0; k < children_[i].size(); ++k)
        own_[static_cast<std::size_t>(children_[i][k])] = child_new_[k];
    }
  }

  void update_gamma() {
    Eigen::Vector3d dtt = Eigen::Vector3d::Zero();
    for (std::size_t i = 2; i < n_; ++i) dtt += dmat_.row(static_cast<Eigen::Index>(i - 2)).transpose() * st_.t[i];
    const Eigen::Matrix3d prec = gamma_prec_ + dtd_ / st_.kappa2;
    Eigen::LLT<Eigen::Matrix3d> llt(prec);
    if (llt.info() != Eigen::Success) throw NumericalError("gamma full-conditional precision is not positive definite");
    const Eigen::Vector3d mean = llt.solve(gamma_prec_mean_ + dtt / st_.kappa2);
    // x = mean + U^{-1} z with prec = U'U has covariance prec^{-1}
    Eigen::Vector3d z;
    for (int k = 0; k < 3; ++k) z[k] = standard_normal(rng_);
    st_.gamma = mean + Eigen::Matrix3d(llt.matrixU()).triangularView<Eigen::Upper>().solve(z);
  }

  void update_kappa2() {
    const auto &pri = ctx_.spec.priors.kappa2;
    double ss = 0.0;
    for (std::size_t i = 2; i < n_; ++i) {
      const double e = st_.t[i] - mean_at(i);
      ss += e * e;
    }
    const double m = n_ > 2 ? static_cast<double>(n_ - 2) : 0.0;
    st_.kappa2 = inverse_gamma_draw(rng_, pri.shape + 0.5 * m, pri.scale + 0.5 * ss);
  }

  // ---- parameter blocks ----------------------------------------------

  /// Marginal and own-copula log terms for candidate cells; sets `coords`.
  double marginal_target(const std::vector<Cell> &cells, std::vector<CopulaCoord> &coords,
                         std::vector<Uniform> &us) const {
    coords.resize(n_);
    us.resize(n_);
    double v = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      us[i] = cells[i].at(st_.o[i]);
      coords[i] = prepare(family_, us[i]);
      v += cells[i].log_g;
      if (!mcmc_detail::finite_uniform(us[i])) return -kInf;
    }
    for (std::size_t i = 1; i < n_; ++i)
      v += log_density(family_, theta_[i][static_cast<std::size_t>(st_.ell[i])], coords[i], coords[parent(i)]);
    return std::isfinite(v) ? v : -kInf;
  }

  double current_marginal_target() const {
    double v = 0.0;
    for (std::size_t i = 0; i < n_; ++i) v += cell_[i].log_g;
    for (std::size_t i = 1; i < n_; ++i) v += own_[i];
    return v;
  }

  void adopt_marginal(std::vector<Cell> &&cells, std::vector<CopulaCoord> &&coords, std::vector<Uniform> &&us) {
    cell_ = std::move(cells);
    coord_ = std::move(coords);
    u_ = std::move(us);
    refresh_own();
  }

  void update_lambda(int adapt_k) {
    const auto &pri = ctx_.spec.priors.lambda;
    const double cur = st_.lambda;
    const double prop = cur * std::exp(steps_.lambda * standard_normal(rng_));
    double log_ratio = pri.log_density(prop) - pri.log_density(cur) + std::log(prop / cur);
    std::vector<Cell> cells;
    std::vector<CopulaCoord> coords;
    std::vector<Uniform> us;
    if (!cfg_.prior_only && prop > 0.0 && std::isfinite(prop)) {
      cells = compute_cells(prop, st_.beta, st_.r);
      log_ratio += marginal_target(cells, coords, us) - current_marginal_target();
    }
    const bool ok = prop > 0.0 && std::isfinite(prop) && accept(log_ratio);
    record("lambda", ok, steps_.lambda, adapt_k);
    if (!ok) return;
    st_.lambda = prop;
    if (cfg_.prior_only)
      refresh_cells();
    else
      adopt_marginal(std::move(cells), std::move(coords), std::move(us));
  }

  void update_beta(int adapt_k) {
    Eigen::VectorXd z(p_);
    for (Eigen::Index k = 0; k < p_; ++k) z[k] = standard_normal(rng_);
    const Eigen::VectorXd prop = st_.beta + steps_.beta * (beta_chol_ * z);
    const auto log_prior = [&](const Eigen::VectorXd &b) {
      const Eigen::VectorXd e = b - beta_mean_;
      return -0.5 * e.dot(beta_prec_ * e);
    };
    double log_ratio = log_prior(prop) - log_prior(st_.beta);
    std::vector<Cell> cells;
    std::vector<CopulaCoord> coords;
    std::vector<Uniform> us;
    if (!cfg_.prior_only) {
      cells = compute_cells(st_.lambda, prop, st_.r);
      log_ratio += marginal_target(cells, coords, us) - current_marginal_target();
    }
    const bool ok = accept(log_ratio);
    record("beta", ok, steps_.beta, adapt_k);
    if (!ok) return;
    st_.beta = prop;
    if (cfg_.prior_only)
      refresh_cells();
    else
      adopt_marginal(std::move(cells), std::move(coords), std::move(us));
  }

  void update_r(int adapt_k) {
    const auto &pri = ctx_.spec.priors.r;
    const double cur = st_.r;
    const double prop = cur * std::exp(steps_.r * standard_normal(rng_));
    double log_ratio = pri.log_density(prop) - pri.log_density(cur) + std::log(prop / cur);
    std::vector<Cell> cells;
    std::vector<CopulaCoord> coords;
    std::vector<Uniform> us;
    const bool valid = prop > 0.0 && std::isfinite(prop);
    if (!cfg_.prior_only && valid) {
      cells = compute_cells(st_.lambda, st_.beta, prop);
      log_ratio += marginal_target(cells, coords, us) - current_marginal_target();
    }
    const bool ok = valid && accept(log_ratio);
    record("r", ok, steps_.r, adapt_k);
    if (!ok) return;
    st_.r = prop;
    if (cfg_.prior_only)
      refresh_cells();
    else
      adopt_marginal(std::move(cells), std::move(coords), std::move(us));
  }

  void update_phi(int adapt_k) {
    const auto &pri = ctx_.spec.priors.phi;
    const double cur = st_.phi;
    const double prop = cur * std::exp(steps_.phi * standard_normal(rng_));
    const bool valid = prop > 0.0 && std::isfinite(prop);
    double log_ratio = valid ? pri.log_density(prop) - pri.log_density(cur) + std::log(prop / cur) : -kInf;
    std::vector<double> own_new;
    if (!cfg_.prior_only && valid) {
      const CopulaSpec spec{family_, prop};
      own_new.assign(n_, 0.0);
      double delta = 0.0;
      for (std::size_t i = 1; i < n_; ++i) {
        const auto l = static_cast<std::size_t>(st_.ell[i]);
        own_new[i] = log_density(family_, link(spec, dist_[i][l]), coord_[i], coord_[parent(i)]);
        delta += own_new[i] - own_[i];
      }
      log_ratio += std::isfinite(delta) ? delta : -kInf;
    }
    const bool ok = valid && accept(log_ratio);
    record("phi", ok, steps_.phi, adapt_k);
    if (!ok) return;
    st_.phi = prop;
    refresh_theta();
    if (!cfg_.prior_only) own_ = std::move(own_new);
  }

  void update_zeta(int adapt_k) {
    const auto &pri = ctx_.spec.priors.zeta;
    const double cur = st_.zeta;
    const double prop = cur * std::exp(steps_.zeta * standard_normal(rng_));
    const bool valid = prop > 0.0 && std::isfinite(prop);
    const double log_ratio =
        valid ? pri.log_density(prop) - pri.log_density(cur) + std::log(prop / cur) : -kInf;
    bool ok = valid && accept(log_ratio);
    if (ok) {
      // every t_i must stay inside its configuration interval
      scratch_cut_.resize(n_);
      for (std::size_t i = 2; i < n_ && ok; ++i) {
        cutoffs_from_distances(dist_[i], prop, scratch_cut_[i]);
        const auto l = static_cast<std::size_t>(st_.ell[i]);
        ok = st_.t[i] > scratch_cut_[i].r_star[l] && st_.t[i] < scratch_cut_[i].r_star[l + 1];
      }
    }
    record("zeta", ok, steps_.zeta, adapt_k);
    if (!ok) return;
    st_.zeta = prop;
    std::swap(cut_, scratch_cut_);
  }

  const FitContext &ctx_;
  ChainConfig cfg_;
  Rng rng_;
  std::size_t n_ = 0;
  Eigen::Index p_ = 0;
  CopulaFamily family_ = CopulaFamily::gaussian;
  ModelState st_;
  bool init_latent_ = false;
  StepSizes steps_;
  double dummy_step_ = 0.0;

  std::vector<std::vector<int>> nbr_;
  std::vector<std::vector<double>> dist_;
  std::vector<std::vector<double>> theta_;
  std::vector<CutoffVector> cut_, scratch_cut_;
  std::vector<Cell> cell_;
  std::vector<Uniform> u_;
  std::vector<CopulaCoord> coord_;
  std::vector<double> own_;
  std::vector<std::vector<int>> children_;
  std::vector<double> child_new_;

  Eigen::MatrixXd dmat_;
  Eigen::Matrix3d dtd_;
  Eigen::Matrix3d gamma_prec_;
  Eigen::Vector3d gamma_prec_mean_;
  Eigen::VectorXd beta_mean_;
  Eigen::MatrixXd beta_prec_;
  Eigen::MatrixXd beta_chol_;

  std::map<std::string, BlockRate> rates_;
};

inline PosteriorSamples run_chain(const FitContext &ctx, const ChainConfig &cfg) {
  Sampler s(ctx, cfg);
  return s.run();
}

}  // namespace dnnmp
