#pragma once

// Mixture weights built as increments of a logit-Gaussian cdf over
// kernel-driven cutoff points.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "dnnmp/geom.hpp"
#include "dnnmp/normal.hpp"

namespace dnnmp {

struct WeightParams {
  std::array<double, 3> gamma{-1.5, 0.0, 0.0};
  double kappa2 = 1.0;
  double zeta = 0.5;

  /// Mean of the underlying Gaussian at a site: gamma0 + gamma1 x + gamma2 y.
  double mean_at(const Location &s) const { return gamma[0] + gamma[1] * s.x + gamma[2] * s.y; }
};

/// Cutoffs 0 = r_0 < r_1 < ... < r_K = 1 and their logits, with
/// r_star[0] = -inf and r_star[K] = +inf.
struct CutoffVector {
  std::vector<double> r;
  std::vector<double> r_star;

  std::size_t components() const { return r.empty() ? 0 : r.size() - 1; }
};

/// Cutoffs whose increments are proportional to exp(-d_l / zeta).
/// Kernels are shifted by the smallest distance so they cannot all
/// underflow; the logits are formed as log(head mass) - log(tail mass).
inline void cutoffs_from_distances(std::span<const double> dist, double zeta, CutoffVector &out) {
  const std::size_t k = dist.size();
  if (k == 0) throw std::invalid_argument("cutoffs need at least one neighbor");
  if (!(zeta > 0.0)) throw std::domain_error("kernel range zeta must be positive");
  double dmin = dist[0];
  for (double d : dist) dmin = std::min(dmin, d);
  out.r.resize(k + 1);
  out.r_star.resize(k + 1);
  // suffix sums give the tail mass exactly, avoiding 1 - r cancellation
  thread_local std::vector<double> kern, tail;
  kern.resize(k);
  tail.resize(k + 1);
  for (std::size_t l = 0; l < k; ++l) kern[l] = std::exp(-(dist[l] - dmin) / zeta);
  tail[k] = 0.0;
  for (std::size_t l = k; l-- > 0;) tail[l] = tail[l + 1] + kern[l];
  const double total = tail[0];
  double head = 0.0;
  out.r[0] = 0.0;
  out.r_star[0] = -kInf;
  for (std::size_t l = 1; l < k; ++l) {
    head += kern[l - 1];
    out.r[l] = head / total;
    out.r_star[l] = std::log(head) - std::log(tail[l]);
  }
  out.r[k] = 1.0;
  out.r_star[k] = kInf;
}

inline CutoffVector cutoffs(const Location &site, std::span<const Location> neighbors, double zeta) {
  std::vector<double> d(neighbors.size());
  for (std::size_t l = 0; l < neighbors.size(); ++l) d[l] = distance(site, neighbors[l]);
  CutoffVector out;
  cutoffs_from_distances(d, zeta, out);
  return out;
}

/// w_l = Phi((r*_l - mu) / kappa) - Phi((r*_{l-1} - mu) / kappa).
inline void mixture_weights(const CutoffVector &c, double mu, double kappa, std::vector<double> &w) {
  const std::size_t k = c.components();
  w.resize(k);
  for (std::size_t l = 0; l < k; ++l)
    w[l] = norm_interval((c.r_star[l] - mu) / kappa, (c.r_star[l + 1] - mu) / kappa);
}

inline std::vector<double> mixture_weights(const CutoffVector &c, const WeightParams &params,
                                           const Location &site) {
  std::vector<double> w;
  mixture_weights(c, params.mean_at(site), std::sqrt(params.kappa2), w);
  return w;
}

}  // namespace dnnmp
