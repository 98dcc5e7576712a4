#pragma once

// Posterior predictive draws of counts at reference or new locations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dnnmp/copula.hpp"
#include "dnnmp/errors.hpp"
#include "dnnmp/marginal.hpp"
#include "dnnmp/mcmc.hpp"
#include "dnnmp/model.hpp"
#include "dnnmp/random.hpp"
#include "dnnmp/weights.hpp"

namespace dnnmp {

/// Stateless 64-bit mixer; used to derive independent streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream for one (seed, target, sample) triple.
inline Rng stream_for(std::uint64_t seed, std::uint64_t target, std::uint64_t sample) {
  return Rng(splitmix64(splitmix64(splitmix64(seed) ^ target) ^ (sample * 0xd1342543de82ef95ULL)));
}

struct PredictionRequest {
  std::vector<Location> targets;
  Eigen::MatrixXd covariates;  ///< rows = targets, no intercept; NB only
  int draws_per_sample = 1;
  std::uint64_t seed = 1;
};

/// Where a target sits relative to the reference set and whom it conditions on.
struct TargetNeighborhood {
  std::optional<std::size_t> reference_position;  ///< set when the target is a reference site
  std::vector<int> neighbors;
  std::vector<double> distances;
};

inline TargetNeighborhood neighborhood_of(const Location &v0, const FitContext &ctx) {
  TargetNeighborhood nb;
  const auto &sites = ctx.ref.sites();
  const auto hit = std::find(sites.begin(), sites.end(), v0);
  if (hit != sites.end()) {
    const auto i = static_cast<std::size_t>(hit - sites.begin());
    nb.reference_position = i;
    nb.neighbors = ctx.ref.neighbors(i);
    nb.distances = ctx.neighbor_distances(i);
    return nb;
  }
  const int L = std::min<int>(ctx.spec.L, static_cast<int>(ctx.size()));
  nb.neighbors = neighbors_of_new(v0, ctx.ref, L);
  for (int j : nb.neighbors) nb.distances.push_back(distance(v0, ctx.ref.site(static_cast<std::size_t>(j))));
  return nb;
}

/// One predictive count at v0 given a posterior sample. `g0` is the target's
/// marginal under that sample.
inline int predict_at(const Location &v0, const TargetNeighborhood &nb, const CountDistribution &g0,
                      const ModelState &s, const FitContext &ctx, Rng &rng) {
  if (nb.neighbors.empty()) {
    // first reference site: its conditional is the marginal itself
    return g0.quantile(uniform_open(rng));
  }
  std::size_t l = 0;
  if (nb.neighbors.size() > 1) {
    CutoffVector cut;
    cutoffs_from_distances(nb.distances, s.zeta, cut);
    std::vector<double> w;
    mixture_weights(cut, s.weight_params().mean_at(v0), std::sqrt(s.kappa2), w);
    std::vector<double> lw(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) lw[k] = w[k] > 0.0 ? std::log(w[k]) : -kInf;
    l = categorical_log(rng, lw);
  }
  const auto j = static_cast<std::size_t>(nb.neighbors[l]);
  const MarginalModel marg = ctx.marginal(s);
  const Uniform t2 = marg.at(static_cast<Eigen::Index>(j)).continued(ctx.y[j], s.o[j]);
  const CopulaSpec cop = ctx.copula(s);
  const double theta = link(cop, nb.distances[l]);
  const double z = uniform_open(rng);
  const double t1 = conditional_sample(cop.family, theta, std::clamp(t2.p, 1e-300, 1.0 - 0x1.0p-53), z);
  const double tt = std::clamp(t1, 1e-300, 1.0 - 0x1.0p-53);
  return continued_inverse_value(g0, Uniform::from_lower(tt)).y;
}

/// Draws arranged as targets x (samples * draws_per_sample), sample-major.
inline Eigen::MatrixXi predict(const FitContext &ctx, const PosteriorSamples &post, const PredictionRequest &req) {
  if (req.draws_per_sample < 1) throw ConfigError("draws per sample must be at least 1");
  const bool nb_model = ctx.spec.marginal == MarginalFamily::negative_binomial;
  const Eigen::Index q = ctx.design.cols() - 1;
  if (nb_model) {
    if (static_cast<std::size_t>(req.covariates.rows()) != req.targets.size() || req.covariates.cols() != q)
      throw DataError("prediction targets need covariates matching the fitted model");
  }
  const auto m = static_cast<Eigen::Index>(post.samples.size()) * req.draws_per_sample;
  Eigen::MatrixXi out(static_cast<Eigen::Index>(req.targets.size()), m);
  for (std::size_t a = 0; a < req.targets.size(); ++a) {
    const Location &v0 = req.targets[a];
    const TargetNeighborhood nb = neighborhood_of(v0, ctx);
    Eigen::RowVectorXd x(q + 1);
    x[0] = 1.0;
    if (nb_model && q > 0) x.tail(q) = req.covariates.row(static_cast<Eigen::Index>(a));
    for (std::size_t b = 0; b < post.samples.size(); ++b) {
      const ModelState &s = post.samples[b];
      if (s.o.size() != ctx.size()) throw DataError("posterior sample does not match the reference set");
      const CountDistribution g0 = marginal_for_covariates(ctx.marginal(s), x);
      Rng rng = stream_for(req.seed, a, b);
      for (int k = 0; k < req.draws_per_sample; ++k)
        out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b) * req.draws_per_sample + k) =
            predict_at(v0, nb, g0, s, ctx, rng);
    }
  }
  return out;
}

/// Linear-interpolation empirical quantile of sorted values (the usual
/// "type 7" definition).
inline double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double empirical_quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return sorted_quantile(values, p);
}

struct PredictiveSummary {
  double median = 0.0;
  double mean = 0.0;
  double lower95 = 0.0;
  double upper95 = 0.0;
  std::size_t n_draws = 0;
  double width() const { return upper95 - lower95; }
};

template <typename Range>
PredictiveSummary predictive_summary(const Range &draws) {
  std::vector<double> v;
  for (const auto &d : draws) v.push_back(static_cast<double>(d));
  if (v.empty()) throw std::invalid_argument("predictive summary needs at least one draw");
  std::sort(v.begin(), v.end());
  PredictiveSummary s;
  s.n_draws = v.size();
  double total = 0.0;
  for (double x : v) total += x;
  s.mean = total / static_cast<double>(v.size());
  s.median = sorted_quantile(v, 0.5);
  s.lower95 = sorted_quantile(v, 0.025);
  s.upper95 = sorted_quantile(v, 0.975);
  return s;
}

inline std::vector<PredictiveSummary> predictive_summary(const Eigen::MatrixXi &draws) {
  std::vector<PredictiveSummary> out;
  for (Eigen::Index a = 0; a < draws.rows(); ++a) {
    std::vector<int> row(static_cast<std::size_t>(draws.cols()));
    for (Eigen::Index b = 0; b < draws.cols(); ++b) row[static_cast<std::size_t>(b)] = draws(a, b);
    out.push_back(predictive_summary(row));
  }
  return out;
}

}  // namespace dnnmp
