#pragma once

// Static 2-d tree for k-nearest-neighbor queries over a fixed point set.
// Results are ordered by (squared distance, index), which makes them
// identical to nearest_by_scan.

#include <algorithm>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "dnnmp/geom.hpp"

namespace dnnmp {

class KdTree {
 public:
  explicit KdTree(std::span<const Location> points, int leaf_size = 8)
      : points_(points.begin(), points.end()), leaf_size_(std::max(1, leaf_size)) {
    index_.resize(points_.size());
    std::iota(index_.begin(), index_.end(), 0);
    if (!points_.empty()) build(0, static_cast<int>(index_.size()));
  }

  std::size_t size() const { return points_.size(); }

  /// The k nearest points to `target`, ascending by (distance, index).
  std::vector<int> nearest(const Location &target, int k) const {
    k = std::min<int>(k, static_cast<int>(points_.size()));
    if (k <= 0) return {};
    Heap heap;  // max-heap on (d2, index): top is the current worst
    search(0, target, k, heap);
    std::vector<std::pair<double, int>> found;
    found.reserve(heap.size());
    while (!heap.empty()) {
      found.push_back(heap.top());
      heap.pop();
    }
    std::sort(found.begin(), found.end());
    std::vector<int> out(found.size());
    for (std::size_t j = 0; j < found.size(); ++j) out[j] = found[j].second;
    return out;
  }

 private:
  using Heap = std::priority_queue<std::pair<double, int>>;

  struct Node {
    int begin = 0, end = 0;  // range in index_
    int axis = -1;           // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
    double lo[2] = {0, 0}, hi[2] = {0, 0};
  };

  static double coord(const Location &p, int axis) { return axis == 0 ? p.x : p.y; }

  int build(int begin, int end) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo[0] = node.lo[1] = kInf;
    node.hi[0] = node.hi[1] = -kInf;
    for (int j = begin; j < end; ++j) {
      const auto &p = points_[index_[j]];
      node.lo[0] = std::min(node.lo[0], p.x);
      node.hi[0] = std::max(node.hi[0], p.x);
      node.lo[1] = std::min(node.lo[1], p.y);
      node.hi[1] = std::max(node.hi[1], p.y);
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= leaf_size_) return id;
    const int axis = (node.hi[0] - node.lo[0]) >= (node.hi[1] - node.lo[1]) ? 0 : 1;
    const int mid = begin + (end - begin) / 2;
    std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                     [&](int a, int b) { return coord(points_[a], axis) < coord(points_[b], axis); });
    nodes_[id].axis = axis;
    nodes_[id].split = coord(points_[index_[mid]], axis);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  static double box_distance2(const Node &n, const Location &t) {
    const double dx = std::max({n.lo[0] - t.x, 0.0, t.x - n.hi[0]});
    const double dy = std::max({n.lo[1] - t.y, 0.0, t.y - n.hi[1]});
    return dx * dx + dy * dy;
  }

  void search(int id, const Location &target, int k, Heap &heap) const {
    const Node &n = nodes_[id];
    if (static_cast<int>(heap.size()) == k && box_distance2(n, target) > heap.top().first) return;
    if (n.axis < 0) {
      for (int j = n.begin; j < n.end; ++j) {
        const std::pair<double, int> cand{squared_distance(target, points_[index_[j]]), index_[j]};
        if (static_cast<int>(heap.size()) < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    const bool go_left = coord(target, n.axis) < n.split;
    search(go_left ? n.left : n.right, target, k, heap);
    search(go_left ? n.right : n.left, target, k, heap);
  }

  std::vector<Location> points_;
  int leaf_size_;
  std::vector<int> index_;
  std::vector<Node> nodes_;
};

}  // namespace dnnmp
