#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "curvadv/cloud.hpp"

namespace curvadv {

namespace detail {

struct Candidate {
  double d2;
  std::size_t index;
};

// Strict weak order: closer first, lower index wins ties.
inline bool closer(const Candidate& a, const Candidate& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
}

inline void check_k(std::size_t k, std::size_t available) {
  if (k == 0) throw ValidationError("knn: k must be positive");
  if (k > available) {
    throw SizeError("knn: k = " + std::to_string(k) + " exceeds the " + std::to_string(available) +
                    " available points");
  }
}

}  // namespace detail

/// Reference k-nearest-neighbor search by exhaustive scan.
inline std::vector<std::size_t> knn_scan(const PointCloud& cloud, const Vec3& query, std::size_t k,
                                         std::optional<std::size_t> exclude = std::nullopt) {
  const std::size_t available = cloud.size() - (exclude && *exclude < cloud.size() ? 1 : 0);
  detail::check_k(k, available);
  std::vector<detail::Candidate> all;
  all.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (exclude && i == *exclude) continue;
    all.push_back({squared_distance(cloud[i], query), i});
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    detail::closer);
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = all[i].index;
  return out;
}

/// Static kd-tree over a point cloud with exact, deterministic k-NN queries.
///
/// Results match knn_scan exactly, including the lower-index tie rule: a
/// subtree is skipped only when its splitting plane is strictly farther than
/// the current k-th candidate.
class KdTree {
 public:
  explicit KdTree(const PointCloud& cloud) : cloud_(&cloud), order_(cloud.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!order_.empty()) build(0, order_.size());
  }

  std::size_t size() const noexcept { return order_.size(); }

  std::vector<std::size_t> query(const Vec3& q, std::size_t k,
                                 std::optional<std::size_t> exclude = std::nullopt) const {
    const std::size_t available = size() - (exclude && *exclude < size() ? 1 : 0);
    detail::check_k(k, available);
    Heap heap(detail::closer);
    if (!nodes_.empty()) search_node(0, q, k, exclude, heap);
    std::vector<std::size_t> out(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
      out[i] = heap.top().index;
      heap.pop();
    }
    return out;
  }

 private:
  using Heap = std::priority_queue<detail::Candidate, std::vector<detail::Candidate>,
                                   bool (*)(const detail::Candidate&, const detail::Candidate&)>;

  // Left child follows its parent directly; right child index is kept in
  // right_index_. Left points have coordinate <= split, right points >= split.
  struct Node {
    std::size_t begin, end;
    int axis;  // -1 for leaves
    double split;
  };

  static constexpr std::size_t kLeafSize = 8;

  void build(std::size_t begin, std::size_t end) {
    const std::size_t self = nodes_.size();
    right_index_.push_back(0);
    if (end - begin <= kLeafSize) {
      nodes_.push_back({begin, end, -1, 0.0});
      return;
    }
    Vec3 lo = (*cloud_)[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      const Vec3& p = (*cloud_)[order_[i]];
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a) {
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t l, std::size_t r) { return (*cloud_)[l][axis] < (*cloud_)[r][axis]; });
    nodes_.push_back({begin, end, axis, (*cloud_)[order_[mid]][axis]});
    build(begin, mid);
    right_index_[self] = nodes_.size();
    build(mid, end);
  }

  void search_node(std::size_t node, const Vec3& q, std::size_t k, std::optional<std::size_t> exclude,
                   Heap& heap) const {
    const Node& n = nodes_[node];
    if (n.axis < 0) {
      for (std::size_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        if (exclude && idx == *exclude) continue;
        const detail::Candidate c{squared_distance((*cloud_)[idx], q), idx};
        if (heap.size() < k) {
          heap.push(c);
        } else if (detail::closer(c, heap.top())) {
          heap.pop();
          heap.push(c);
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::size_t left = node + 1;
    const std::size_t right = right_index_[node];
    const std::size_t near_child = diff < 0.0 ? left : right;
    const std::size_t far_child = diff < 0.0 ? right : left;
    search_node(near_child, q, k, exclude, heap);
    if (heap.size() < k || diff * diff <= heap.top().d2) search_node(far_child, q, k, exclude, heap);
  }

  const PointCloud* cloud_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> right_index_;
};

/// k nearest points of `cloud` to `query`, ascending by distance, ties to the
/// lower index. `exclude` removes one index from consideration.
inline std::vector<std::size_t> knn(const PointCloud& cloud, const Vec3& query, std::size_t k,
                                    std::optional<std::size_t> exclude = std::nullopt) {
  return KdTree(cloud).query(query, k, exclude);
}

/// Neighbors of cloud[index]; `exclude_self` drops the point itself.
inline std::vector<std::size_t> knn_of(const PointCloud& cloud, std::size_t index, std::size_t k,
                                       bool exclude_self) {
  if (index >= cloud.size()) throw ValidationError("knn: query index out of range");
  return knn(cloud, cloud[index], k, exclude_self ? std::optional<std::size_t>(index) : std::nullopt);
}

}  // namespace curvadv
