#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "curvadv/cloud.hpp"
#include "curvadv/errors.hpp"
#include "curvadv/neighbors.hpp"

namespace curvadv {

/// Pairwise (cascade) summation; the result depends only on the values and
/// their order, never on how work is split.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct ChamferResult {
  double total = 0.0;
  double term_pred_to_gt = 0.0;  ///< mean over gt points of the distance to the nearest pred point
  double term_gt_to_pred = 0.0;  ///< mean over pred points of the distance to the nearest gt point
};

/// Nearest point of `to` for every point of `from`, with the squared
/// distance. Exhaustive for small clouds, kd-tree otherwise; both give the
/// same lowest-index answer on ties.
struct NearestAssignment {
  std::vector<std::size_t> index;
  std::vector<double> d2;
};

inline NearestAssignment nearest_assignment(const PointCloud& from, const PointCloud& to) {
  NearestAssignment a;
  a.index.resize(from.size());
  a.d2.resize(from.size());
  if (static_cast<double>(from.size()) * static_cast<double>(to.size()) <= 4096.0) {
    for (std::size_t i = 0; i < from.size(); ++i) {
      double best = squared_distance(from[i], to[0]);
      std::size_t arg = 0;
      for (std::size_t j = 1; j < to.size(); ++j) {
        const double d = squared_distance(from[i], to[j]);
        if (d < best) {
          best = d;
          arg = j;
        }
      }
      a.index[i] = arg;
      a.d2[i] = best;
    }
    return a;
  }
  const KdTree tree(to);
  for (std::size_t i = 0; i < from.size(); ++i) {
    const std::size_t j = tree.query(from[i], 1)[0];
    a.index[i] = j;
    a.d2[i] = squared_distance(from[i], to[j]);
  }
  return a;
}

namespace detail {

inline void check_pair(const PointCloud& pred, const PointCloud& gt, const char* what) {
  if (pred.empty() || gt.empty()) throw SizeError(std::string(what) + ": empty cloud");
}

inline double mean_of(std::vector<double>& v, bool squared) {
  if (!squared) {
    for (double& x : v) x = std::sqrt(x);
  }
  return pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace detail

/// Symmetric Chamfer distance with unsquared point distances. `squared`
/// switches both terms to mean squared nearest distance, the training loss.
inline ChamferResult chamfer(const PointCloud& pred, const PointCloud& gt, bool squared = false) {
  detail::check_pair(pred, gt, "chamfer");
  auto g2p = nearest_assignment(gt, pred);
  auto p2g = nearest_assignment(pred, gt);
  ChamferResult r;
  r.term_pred_to_gt = detail::mean_of(g2p.d2, squared);
  r.term_gt_to_pred = detail::mean_of(p2g.d2, squared);
  r.total = r.term_pred_to_gt + r.term_gt_to_pred;
  return r;
}

inline double squared_chamfer(const PointCloud& pred, const PointCloud& gt) { return chamfer(pred, gt, true).total; }

struct ChamferGradient {
  std::vector<Vec3> grad;  ///< d total / d pred[i]
  bool subgradient = false;  ///< a zero-distance pair contributed the zero vector
};

/// Gradient of chamfer(pred, gt, squared) with respect to the pred points,
/// nearest-neighbor assignments held fixed.
inline ChamferGradient chamfer_gradient(const PointCloud& pred, const PointCloud& gt, bool squared = false) {
  detail::check_pair(pred, gt, "chamfer_gradient");
  const auto p2g = nearest_assignment(pred, gt);
  const auto g2p = nearest_assignment(gt, pred);
  ChamferGradient out;
  out.grad.assign(pred.size(), Vec3{});
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  const double inv_m = 1.0 / static_cast<double>(gt.size());
  auto contribution = [&](const Vec3& diff, double d2, double weight) -> Vec3 {
    if (squared) return (2.0 * weight) * diff;
    if (d2 == 0.0) {
      out.subgradient = true;
      return {};
    }
    return (weight / std::sqrt(d2)) * diff;
  };
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.grad[i] += contribution(pred[i] - gt[p2g.index[i]], p2g.d2[i], inv_n);
  }
  for (std::size_t j = 0; j < gt.size(); ++j) {
    const std::size_t i = g2p.index[j];
    out.grad[i] += contribution(pred[i] - gt[j], g2p.d2[j], inv_m);
  }
  return out;
}

struct OutlierReport {
  double threshold = 0.0;
  std::size_t count = 0;
  double fraction = 0.0;
  std::vector<std::size_t> offending_indices;
};

/// Points of `adv` farther than `threshold` from every point of `clean`.
inline OutlierReport outlier_score(const PointCloud& adv, const PointCloud& clean, double threshold) {
  if (!(threshold > 0.0)) throw ValidationError("outlier_score: threshold must be positive");
  detail::check_pair(adv, clean, "outlier_score");
  const auto nearest = nearest_assignment(adv, clean);
  OutlierReport r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < adv.size(); ++i) {
    if (std::sqrt(nearest.d2[i]) > threshold) r.offending_indices.push_back(i);
  }
  r.count = r.offending_indices.size();
  r.fraction = static_cast<double>(r.count) / static_cast<double>(adv.size());
  return r;
}

}  // namespace curvadv
