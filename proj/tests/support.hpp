#pragma once

// Shared helpers for the test suites.

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <vector>

#include "curvadv/curvature.hpp"
#include "curvadv/metrics.hpp"
#include "curvadv/random.hpp"
#include "curvadv/tinynet.hpp"

namespace curvadv::testing {

inline double deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Angle between two lines (sign-insensitive), in [0, pi/2].
inline double line_angle(const Vec3& a, const Vec3& b) {
  const double t = angle_between(a, b);
  return std::min(t, std::numbers::pi - t);
}

/// Worst angular error of an estimated pair against a reference pair, under
/// the better of the two member matchings.
inline double pair_error(const Vec3& e0, const Vec3& e1, const Vec3& r0, const Vec3& r1) {
  const double straight = std::max(line_angle(e0, r0), line_angle(e1, r1));
  const double swapped = std::max(line_angle(e0, r1), line_angle(e1, r0));
  return std::min(straight, swapped);
}

/// Fourth-order central difference of f at 0.
template <class F>
double five_point(F&& f, double h) {
  return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h);
}

/// Every discrete choice behind the loss: ReLU masks, max-pool winners and
/// Chamfer nearest neighbors. The loss is smooth where this is constant.
inline std::vector<std::int64_t> loss_pattern(const ModelParams& p, const Batch& in, const Batch& gt, Branch br, Mode mode) {
  const ForwardResult fr = forward(p, in, br, mode);
  std::vector<std::int64_t> out;
  for (const Matrix* r : {&fr.cache.r1, &fr.cache.r2, &fr.cache.r3}) {
    for (Eigen::Index i = 0; i < r->size(); ++i) out.push_back(r->data()[i] > 0.0);
  }
  out.insert(out.end(), fr.cache.arg_g.begin(), fr.cache.arg_g.end());
  out.insert(out.end(), fr.cache.arg_code.begin(), fr.cache.arg_code.end());
  for (std::size_t b = 0; b < in.size(); ++b) {
    for (const auto& a : {nearest_assignment(fr.predictions[b], gt[b]), nearest_assignment(gt[b], fr.predictions[b])}) {
      out.insert(out.end(), a.index.begin(), a.index.end());
    }
  }
  return out;
}

/// True when the loss pattern is the same at every stencil point of `five_point`.
template <class Pattern>
bool smooth_over_stencil(Pattern&& pattern, double h) {
  const auto base = pattern(0.0);
  for (double t : {-2 * h, -h, h, 2 * h}) {
    if (pattern(t) != base) return false;
  }
  return true;
}

inline Vec3 random_unit(Rng& rng) {
  for (;;) {
    const Vec3 v{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const double n = norm(v);
    if (n > 0.1 && n <= 1.0) return v / n;
  }
}

inline PointCloud random_cloud(Rng& rng, std::size_t n, double half = 0.5) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.push_back({uniform(rng, -half, half), uniform(rng, -half, half), uniform(rng, -half, half)});
  return c;
}

}  // namespace curvadv::testing
