#pragma once

// Locations, random ordering of a reference set, and nearest-neighbor sets.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "dnnmp/errors.hpp"
#include "dnnmp/random.hpp"

namespace dnnmp {

struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location &, const Location &) = default;
  friend auto operator<=>(const Location &, const Location &) = default;
};

inline double squared_distance(const Location &a, const Location &b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(const Location &a, const Location &b) {
  return std::sqrt(squared_distance(a, b));
}

/// Throws DataError naming the first repeated coordinate pair, if any.
inline void require_distinct(std::span<const Location> locs) {
  std::map<Location, std::size_t> seen;
  for (std::size_t i = 0; i < locs.size(); ++i) {
    if (!std::isfinite(locs[i].x) || !std::isfinite(locs[i].y)) {
      std::ostringstream os;
      os << "location " << i << " has non-finite coordinates";
      throw DataError(os.str());
    }
    auto [it, inserted] = seen.emplace(locs[i], i);
    if (!inserted) {
      std::ostringstream os;
      os << "duplicate location (" << locs[i].x << ", " << locs[i].y << ") at rows " << it->second
         << " and " << i;
      throw DataError(os.str());
    }
  }
}

/// Indices of the k candidates closest to `target`, sorted by (distance,
/// index). Exhaustive scan; this is the reference every faster search must
/// reproduce.
inline std::vector<int> nearest_by_scan(const Location &target, std::span<const Location> candidates,
                                        int k) {
  std::vector<std::pair<double, int>> d;
  d.reserve(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j)
    d.emplace_back(squared_distance(target, candidates[j]), static_cast<int>(j));
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 0)), d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
  std::vector<int> out(kk);
  for (std::size_t j = 0; j < kk; ++j) out[j] = d[j].second;
  return out;
}

/// Reference locations in a fixed order with, for each position i >= 1
/// (0-based), the min(i, L) closest predecessors sorted by distance.
class OrderedReferenceSet {
 public:
  OrderedReferenceSet(std::vector<Location> sites, std::vector<std::size_t> original_index,
                      int neighbor_budget)
      : sites_(std::move(sites)), original_(std::move(original_index)), budget_(neighbor_budget) {
    if (budget_ < 1) throw ConfigError("neighbor budget L must be at least 1");
    if (sites_.size() != original_.size())
      throw std::invalid_argument("ordering size does not match site count");
    neighbors_.resize(sites_.size());
    for (std::size_t i = 1; i < sites_.size(); ++i)
      neighbors_[i] = nearest_by_scan(sites_[i], std::span(sites_).first(i), budget_);
  }

  std::size_t size() const { return sites_.size(); }
  int neighbor_budget() const { return budget_; }
  const std::vector<Location> &sites() const { return sites_; }
  const Location &site(std::size_t i) const { return sites_[i]; }
  /// Predecessor indices (in ordering positions) of position i.
  const std::vector<int> &neighbors(std::size_t i) const { return neighbors_[i]; }
  /// Position in the caller's original input of ordered site i.
  std::size_t original_index(std::size_t i) const { return original_[i]; }
  const std::vector<std::size_t> &permutation() const { return original_; }

 private:
  std::vector<Location> sites_;
  std::vector<std::size_t> original_;
  int budget_;
  std::vector<std::vector<int>> neighbors_;
};

/// Uniformly random permutation of `locations` determined by `seed`, with
/// neighbor lists for budget L.
inline OrderedReferenceSet random_ordering(std::span<const Location> locations, std::uint64_t seed,
                                           int neighbor_budget) {
  if (locations.size() < 2) throw DataError("random ordering needs at least two locations");
  require_distinct(locations);
  std::vector<std::size_t> perm(locations.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  // Fisher-Yates with our own uniform so the permutation is portable.
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(uniform_open(rng) * static_cast<double>(i + 1));
    std::swap(perm[i], perm[std::min(j, i)]);
  }
  std::vector<Location> ordered(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) ordered[i] = locations[perm[i]];
  return OrderedReferenceSet(std::move(ordered), std::move(perm), neighbor_budget);
}

/// Ordering that keeps the input order (useful for constructed layouts).
inline OrderedReferenceSet identity_ordering(std::span<const Location> locations, int neighbor_budget) {
  require_distinct(locations);
  std::vector<std::size_t> perm(locations.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  return OrderedReferenceSet(std::vector<Location>(locations.begin(), locations.end()),
                             std::move(perm), neighbor_budget);
}

/// Indices of the L reference sites closest to v0, ascending by distance
/// (ties to the lower ordering index).
inline std::vector<int> neighbors_of_new(const Location &v0, const OrderedReferenceSet &ref, int L) {
  if (L < 1) throw ConfigError("neighbor budget L must be at least 1");
  if (static_cast<std::size_t>(L) > ref.size())
    throw ConfigError("neighbor budget L exceeds the reference set size");
  return nearest_by_scan(v0, ref.sites(), L);
}

}  // namespace dnnmp
