#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "curvadv/cloud.hpp"
#include "curvadv/errors.hpp"
#include "curvadv/geometry.hpp"
#include "curvadv/neighbors.hpp"

namespace curvadv {

/// Reference used to pick the sign of each estimated normal.
struct Orientation {
  enum class Mode { kViewpoint, kHemisphere };

  Mode mode = Mode::kHemisphere;
  Vec3 viewpoint;

  static Orientation toward(const Vec3& viewpoint) { return {Mode::kViewpoint, viewpoint}; }
  static Orientation hemisphere() { return {}; }

  friend bool operator==(const Orientation&, const Orientation&) = default;
};

/// How the normal variation of a candidate direction pair is scored.
enum class VariationRule {
  /// Section-plane turning rate: the tilt of each neighbor normal inside the
  /// plane spanned by the direction and the normal is regressed on the
  /// neighbor's tangent offset; the slope along the direction, scaled to the
  /// neighborhood diameter, is the direction's angle.
  kSectionFit,
  /// Intersection-line construction: the two neighbor normals closest in
  /// angle to the direction and the two farthest each define a plane whose
  /// intersection with the normal section plane is (n1 x n2) x d_perp; the
  /// angle between the two lines is the direction's angle.
  kIntersection,
};

struct CurvatureParams {
  std::size_t k_p = 20;  ///< neighbors for normal estimation
  std::size_t k_n = 10;  ///< neighbors whose normals form M_p
  std::size_t k_d = 18;  ///< rotated direction pairs per point
  /// Radians between consecutive pairs; (pi/2)/k_d when unset.
  std::optional<double> rotation_step;
  Orientation orientation;
  VariationRule rule = VariationRule::kSectionFit;

  double step() const { return rotation_step.value_or(std::numbers::pi / 2.0 / static_cast<double>(k_d)); }

  void validate() const {
    if (k_p < 3) throw ValidationError("curvature: k_p must be >= 3");
    if (k_n < 4) throw ValidationError("curvature: k_n must be >= 4");
    if (k_d < 2) throw ValidationError("curvature: k_d must be >= 2");
    const double s = step();
    if (!(s > 0.0) || s > std::numbers::pi / 2.0 + 1e-15) {
      throw ValidationError("curvature: rotation step must lie in (0, pi/2]");
    }
    if (orientation.mode == Orientation::Mode::kViewpoint && !is_finite(orientation.viewpoint)) {
      throw ValidationError("curvature: viewpoint must be finite");
    }
  }

  friend bool operator==(const CurvatureParams& a, const CurvatureParams& b) {
    return a.k_p == b.k_p && a.k_n == b.k_n && a.k_d == b.k_d && a.step() == b.step() &&
           a.orientation == b.orientation && a.rule == b.rule;
  }
};

/// Per-point surface frame.
///
/// `principal[0]` is the member of the winning pair with the smaller
/// single-direction variation (the minimum-curvature proxy) and
/// `principal[1] = normalize(normal x principal[0])`. `mean_dir` is the
/// normalized sum of the winning pair as generated, so it bisects the two
/// principal lines inside the tangent plane.
struct SurfaceFrame {
  Vec3 normal;
  std::array<Vec3, 2> principal;
  Vec3 mean_dir;
  /// |alpha - beta| of the winning pair; unavailable for frames read from a cache.
  std::optional<double> variation;

  const Vec3& min_dir() const { return principal[0]; }
};

struct CurvatureField {
  std::vector<SurfaceFrame> frames;
  CurvatureParams params;

  std::size_t size() const noexcept { return frames.size(); }
  const SurfaceFrame& operator[](std::size_t i) const { return frames[i]; }
};

/// Applies the orientation rule to an unoriented normal at point `p`.
inline Vec3 orient_normal(const Vec3& n, const Vec3& p, const Orientation& orientation) {
  if (orientation.mode == Orientation::Mode::kViewpoint) {
    return dot(n, orientation.viewpoint - p) < 0.0 ? -n : n;
  }
  constexpr double kFlat = 1e-12;
  double s = n.z;
  if (std::abs(s) <= kFlat) s = n.y;
  if (std::abs(s) <= kFlat) s = n.x;
  return s < 0.0 ? -n : n;
}

/// Smallest-eigenvalue eigenvector of the k_p-neighborhood covariance of
/// every point, oriented per `params.orientation`.
inline std::vector<Vec3> estimate_normals(const PointCloud& cloud, const CurvatureParams& params,
                                          const KdTree& tree) {
  params.validate();
  validate_cloud(cloud);
  if (cloud.size() <= params.k_p) {
    throw SizeError("estimate_normals: cloud of " + std::to_string(cloud.size()) +
                    " points needs more than k_p = " + std::to_string(params.k_p));
  }
  std::vector<Vec3> normals(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nb = tree.query(cloud[i], params.k_p, i);
    const EigenDecomp3 e = eig3(covariance(cloud, i, nb));
    normals[i] = orient_normal(e.eigenvectors[0], cloud[i], params.orientation);
  }
  return normals;
}

inline std::vector<Vec3> estimate_normals(const PointCloud& cloud, const CurvatureParams& params) {
  validate_cloud(cloud);
  return estimate_normals(cloud, params, KdTree(cloud));
}

/// Deterministic tangent frame (u, v) with (u, v, normal) right-handed.
/// u is the coordinate axis least aligned with the normal (ties to the lower
/// axis), made orthogonal to the normal.
inline std::pair<Vec3, Vec3> tangent_basis(const Vec3& normal) {
  const double len = norm(normal);
  if (!(len > 0.0) || !is_finite(normal)) throw ValidationError("tangent_basis: zero or non-finite normal");
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(normal[a]) < std::abs(normal[axis])) axis = a;
  }
  Vec3 e;
  e[axis] = 1.0;
  const Vec3 n = normal / len;
  const Vec3 u = normalized(e - dot(e, n) * n);
  return {u, cross(n, u)};
}

/// Direction of the line where the plane spanned by n1, n2 meets the plane
/// with normal d_perp. Not normalized; a near-zero result means degenerate.
inline Vec3 intersection_direction(const Vec3& n1, const Vec3& n2, const Vec3& d_perp) {
  return cross(cross(n1, n2), d_perp);
}

/// Orthonormal tangent pair (D, D') with D' = normal x D.
struct DirectionPair {
  Vec3 first;
  Vec3 second;
};

/// j-th candidate pair: the tangent basis rotated by j * step about the normal.
inline DirectionPair rotated_pair(const std::pair<Vec3, Vec3>& basis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * basis.first + s * basis.second, -s * basis.first + c * basis.second};
}

struct VariationResult {
  double delta = 0.0;  ///< |alpha - beta|
  double alpha = 0.0;  ///< angle along pair.first
  double beta = 0.0;   ///< angle along pair.second
};

namespace detail {

constexpr double kDegenerate = 1e-12;

inline double intersection_angle(const Vec3& dir, const Vec3& perp, std::span<const Vec3> normals) {
  std::vector<std::size_t> order(normals.size());
  std::vector<double> key(normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    order[i] = i;
    key[i] = angle_between(normals[i], dir);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  const std::size_t last = order.size() - 1;
  const Vec3 d12 = intersection_direction(normals[order[0]], normals[order[1]], perp);
  const Vec3 d34 = intersection_direction(normals[order[last]], normals[order[last - 1]], perp);
  if (norm(d12) <= kDegenerate || norm(d34) <= kDegenerate) return 0.0;
  return angle_between(d12, d34);
}

// Signed turning rate of the normals inside the (dir, normal) plane,
// expressed as the angle accumulated across the neighborhood diameter.
inline double section_angle(const Vec3& dir, const Vec3& perp, const Vec3& normal,
                            std::span<const Vec3> normals, std::span<const Vec3> offsets) {
  const std::size_t n = normals.size();
  double mean_a = 0.0, mean_b = 0.0, mean_t = 0.0, radius = 0.0;
  std::vector<double> a(n), b(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = dot(offsets[i], dir);
    b[i] = dot(offsets[i], perp);
    // Neighbors whose global orientation flipped are compared as lines.
    const Vec3 m = dot(normals[i], normal) < 0.0 ? -normals[i] : normals[i];
    t[i] = std::atan2(dot(m, dir), dot(m, normal));
    mean_a += a[i];
    mean_b += b[i];
    mean_t += t[i];
    radius += std::hypot(a[i], b[i]);
  }
  const double inv = 1.0 / static_cast<double>(n);
  mean_a *= inv;
  mean_b *= inv;
  mean_t *= inv;
  radius *= inv;
  double saa = 0.0, sab = 0.0, sbb = 0.0, sat = 0.0, sbt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a, db = b[i] - mean_b, dt = t[i] - mean_t;
    saa += da * da;
    sab += da * db;
    sbb += db * db;
    sat += da * dt;
    sbt += db * dt;
  }
  const double det = saa * sbb - sab * sab;
  const double scale = saa + sbb;
  if (!(scale > 0.0) || det <= kDegenerate * scale * scale) return 0.0;
  const double slope = (sbb * sat - sab * sbt) / det;
  return slope * 2.0 * radius;
}

}  // namespace detail

/// Scores a candidate direction pair at a point from the normals M_p of its
/// neighbors. `neighbor_offsets` (q - p for each neighbor) is required by
/// the section-fit rule and ignored by the intersection rule.
inline VariationResult normal_variation(const DirectionPair& pair, const Vec3& normal,
                                        std::span<const Vec3> neighbor_normals,
                                        std::span<const Vec3> neighbor_offsets,
                                        VariationRule rule = VariationRule::kSectionFit) {
  if (neighbor_normals.size() < 4) {
    throw SizeError("normal_variation: need at least 4 neighbor normals, got " +
                    std::to_string(neighbor_normals.size()));
  }
  VariationResult r;
  if (rule == VariationRule::kIntersection) {
    r.alpha = detail::intersection_angle(pair.first, pair.second, neighbor_normals);
    r.beta = detail::intersection_angle(pair.second, pair.first, neighbor_normals);
  } else {
    if (neighbor_offsets.size() != neighbor_normals.size()) {
      throw ValidationError("normal_variation: offsets and normals differ in count");
    }
    r.alpha = detail::section_angle(pair.first, pair.second, normal, neighbor_normals, neighbor_offsets);
    r.beta = detail::section_angle(pair.second, pair.first, normal, neighbor_normals, neighbor_offsets);
  }
  r.delta = std::abs(r.alpha - r.beta);
  return r;
}

/// Full per-point frame estimation: normals first, then for every point the
/// k_d rotated tangent pairs are scored against the normals of its k_n
/// nearest neighbors and the highest-variation pair (first one on ties) is
/// kept.
inline CurvatureField estimate_frames(const PointCloud& cloud, const CurvatureParams& params) {
  params.validate();
  validate_cloud(cloud);
  if (cloud.size() <= std::max(params.k_p, params.k_n)) {
    throw SizeError("estimate_frames: cloud of " + std::to_string(cloud.size()) +
                    " points needs more than max(k_p, k_n) points");
  }
  const KdTree tree(cloud);
  const std::vector<Vec3> normals = estimate_normals(cloud, params, tree);
  const double step = params.step();

  CurvatureField field;
  field.params = params;
  field.frames.resize(cloud.size());
  std::vector<Vec3> m_p(params.k_n), offsets(params.k_n);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nb = tree.query(cloud[i], params.k_n, i);
    for (std::size_t j = 0; j < nb.size(); ++j) {
      m_p[j] = normals[nb[j]];
      offsets[j] = cloud[nb[j]] - cloud[i];
    }
    const Vec3& n = normals[i];
    const auto basis = tangent_basis(n);
    DirectionPair best = rotated_pair(basis, 0.0);
    VariationResult best_score = normal_variation(best, n, m_p, offsets, params.rule);
    for (std::size_t j = 1; j < params.k_d; ++j) {
      const DirectionPair pair = rotated_pair(basis, static_cast<double>(j) * step);
      const VariationResult score = normal_variation(pair, n, m_p, offsets, params.rule);
      if (score.delta > best_score.delta) {
        best = pair;
        best_score = score;
      }
    }
    SurfaceFrame& f = field.frames[i];
    f.normal = n;
    f.principal[0] = std::abs(best_score.alpha) <= std::abs(best_score.beta) ? best.first : best.second;
    f.principal[1] = normalized(cross(n, f.principal[0]));
    f.mean_dir = normalized(best.first + best.second);
    f.variation = best_score.delta;
  }
  return field;
}

}  // namespace curvadv
