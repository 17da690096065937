#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curvadv/cloud.hpp"
#include "curvadv/errors.hpp"
#include "curvadv/geometry.hpp"
#include "curvadv/random.hpp"

namespace curvadv {

enum class Category { kSphere, kCylinder, kTorus, kSaddle, kBox, kCone };

inline constexpr std::array<Category, 6> kAllCategories{Category::kSphere, Category::kCylinder,
                                                        Category::kTorus,  Category::kSaddle,
                                                        Category::kBox,    Category::kCone};

inline std::string_view category_name(Category c) {
  switch (c) {
    case Category::kSphere: return "sphere";
    case Category::kCylinder: return "cylinder";
    case Category::kTorus: return "torus";
    case Category::kSaddle: return "saddle";
    case Category::kBox: return "box";
    case Category::kCone: return "cone";
  }
  return "?";
}

inline Category parse_category(std::string_view name) {
  for (Category c : kAllCategories) {
    if (category_name(c) == name) return c;
  }
  throw ValidationError("unknown shape category '" + std::string(name) + "'");
}

/// Analytic surface description. Shapes are centered on the origin with
/// the z axis as their symmetry axis; which fields matter depends on the
/// category:
///   sphere    radius
///   cylinder  radius, height, caps
///   torus     radius (major), minor_radius
///   saddle    z = curvature * (x^2 - y^2) over |x|, |y| <= half_extents.x, .y
///   box       half_extents
///   cone      radius (base), height, caps (base disc); apex at +height/2
struct ShapeSpec {
  Category category = Category::kSphere;
  double radius = 0.5;
  double minor_radius = 0.1;
  double height = 1.0;
  double curvature = 1.0;
  Vec3 half_extents{0.5, 0.5, 0.5};
  bool caps = false;
  std::size_t complete_count = 1024;
  std::size_t input_count = 256;
  std::uint64_t seed = 0;

  static ShapeSpec sphere(double r) { return {.category = Category::kSphere, .radius = r}; }
  static ShapeSpec cylinder(double r, double h, bool caps = false) {
    return {.category = Category::kCylinder, .radius = r, .height = h, .caps = caps};
  }
  static ShapeSpec torus(double major, double minor) {
    return {.category = Category::kTorus, .radius = major, .minor_radius = minor};
  }
  static ShapeSpec saddle(double a, double half_width) {
    return {.category = Category::kSaddle, .curvature = a, .half_extents = {half_width, half_width, 0.0}};
  }
  static ShapeSpec box(const Vec3& half) { return {.category = Category::kBox, .half_extents = half}; }
  static ShapeSpec cone(double r, double h, bool caps = false) {
    return {.category = Category::kCone, .radius = r, .height = h, .caps = caps};
  }

  void validate() const {
    auto positive = [&](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(std::string(category_name(category)) + ": " + what + " must be positive");
      }
    };
    if (complete_count < 8 || input_count < 8) throw ValidationError("shape: sample counts must be >= 8");
    switch (category) {
      case Category::kSphere: positive(radius, "radius"); break;
      case Category::kCylinder:
      case Category::kCone:
        positive(radius, "radius");
        positive(height, "height");
        break;
      case Category::kTorus:
        positive(radius, "major radius");
        positive(minor_radius, "minor radius");
        if (minor_radius >= radius) throw ValidationError("torus: minor radius must be below the major radius");
        break;
      case Category::kSaddle:
        positive(half_extents.x, "half width x");
        positive(half_extents.y, "half width y");
        if (!std::isfinite(curvature) || curvature == 0.0) throw ValidationError("saddle: curvature must be nonzero");
        break;
      case Category::kBox:
        positive(half_extents.x, "half extent x");
        positive(half_extents.y, "half extent y");
        positive(half_extents.z, "half extent z");
        break;
    }
  }
};

/// Exact differential geometry at a surface point. `min_dir` has the
/// smaller absolute principal curvature. On umbilic or flat regions the
/// principal directions are arbitrary and `umbilic` is set.
struct AnalyticFrame {
  Vec3 normal;  ///< outward
  Vec3 min_dir;
  Vec3 max_dir;
  double k_min = 0.0;
  double k_max = 0.0;
  bool umbilic = false;
};

struct GeneratedShape {
  PointCloud cloud;
  std::vector<AnalyticFrame> frames;  ///< oracle frame of each sample
};

namespace detail {

inline AnalyticFrame make_frame(const Vec3& n, Vec3 d1, double k1, Vec3 d2, double k2) {
  if (std::abs(k1) > std::abs(k2)) {
    std::swap(d1, d2);
    std::swap(k1, k2);
  }
  AnalyticFrame f{normalized(n), normalized(d1), normalized(d2), k1, k2, false};
  f.umbilic = std::abs(std::abs(k1) - std::abs(k2)) <= 1e-12 && std::abs(k1 - k2) <= 1e-12;
  return f;
}

inline AnalyticFrame flat_frame(const Vec3& n) {
  Vec3 e{1, 0, 0};
  if (std::abs(n.x) > 0.9) e = {0, 1, 0};
  const Vec3 u = normalized(e - dot(e, n) * n);
  return {n, u, cross(n, u), 0.0, 0.0, true};
}

// Integer split of `total` proportional to `weights` (largest remainder,
// ties to the lower index).
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / sum;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    used += counts[i];
    rem.push_back({exact - static_cast<double>(counts[i]), i});
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < total; ++i, ++used) ++counts[rem[i % rem.size()].second];
  return counts;
}

// n jittered-stratified samples of the unit square: an nx-by-ny grid with
// nx / ny close to `aspect`, one uniform sample in each of n distinct
// randomly chosen cells.
inline std::vector<std::array<double, 2>> jittered(std::size_t n, double aspect, Rng& rng) {
  std::vector<std::array<double, 2>> out;
  if (n == 0) return out;
  const auto nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n) * aspect))));
  const std::size_t ny = (n + nx - 1) / nx;
  std::vector<std::size_t> cells(nx * ny);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  std::shuffle(cells.begin(), cells.end(), rng);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cx = cells[i] % nx, cy = cells[i] / nx;
    out.push_back({(static_cast<double>(cx) + uniform01(rng)) / static_cast<double>(nx),
                   (static_cast<double>(cy) + uniform01(rng)) / static_cast<double>(ny)});
  }
  return out;
}

// Inverse of F(v) = (R v + r sin v) / (2 pi R) on [0, 2 pi): the torus
// tube angle with density proportional to the local circumference.
inline double torus_tube_angle(double u, double major, double minor) {
  const double target = 2.0 * std::numbers::pi * major * u;
  double v = 2.0 * std::numbers::pi * u;
  for (int it = 0; it < 50; ++it) {
    const double f = major * v + minor * std::sin(v) - target;
    const double df = major + minor * std::cos(v);
    const double step = f / df;
    v -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return v;
}

inline void push(GeneratedShape& g, const Vec3& p, const AnalyticFrame& f) {
  g.cloud.push_back(p);
  g.frames.push_back(f);
}

inline void disc(GeneratedShape& g, std::size_t n, double r, double z, const Vec3& normal, Rng& rng) {
  for (const auto& s : jittered(n, 1.0, rng)) {
    const double rho = r * std::sqrt(s[0]);
    const double phi = 2.0 * std::numbers::pi * s[1];
    push(g, {rho * std::cos(phi), rho * std::sin(phi), z}, flat_frame(normal));
  }
}

}  // namespace detail

/// Exact frame of the surface at a point lying on it.
inline AnalyticFrame analytic_frame(const ShapeSpec& spec, const Vec3& p) {
  constexpr double kOnPlane = 1e-9;
  switch (spec.category) {
    case Category::kSphere: {
      const AnalyticFrame f = detail::flat_frame(normalized(p));
      return {f.normal, f.min_dir, f.max_dir, 1.0 / spec.radius, 1.0 / spec.radius, true};
    }
    case Category::kCylinder: {
      if (spec.caps && std::abs(std::abs(p.z) - spec.height / 2.0) <= kOnPlane) {
        return detail::flat_frame({0, 0, p.z > 0 ? 1.0 : -1.0});
      }
      const Vec3 n = normalized(Vec3{p.x, p.y, 0.0});
      return detail::make_frame(n, {0, 0, 1}, 0.0, cross({0, 0, 1}, n), 1.0 / spec.radius);
    }
    case Category::kTorus: {
      const double rho = std::hypot(p.x, p.y);
      const Vec3 radial{p.x / rho, p.y / rho, 0.0};
      const Vec3 n = normalized(p - spec.radius * radial);
      const Vec3 parallel = cross({0, 0, 1}, radial);
      const double cos_v = dot(n, radial);
      return detail::make_frame(n, parallel, cos_v / rho, cross(n, parallel), 1.0 / spec.minor_radius);
    }
    case Category::kSaddle: {
      // Graph z = a (x^2 - y^2): shape operator I^-1 II in parameter space.
      const double a = spec.curvature;
      const double fx = 2 * a * p.x, fy = -2 * a * p.y;
      const double w = std::sqrt(1 + fx * fx + fy * fy);
      const Vec3 n{-fx / w, -fy / w, 1.0 / w};
      const double e = 1 + fx * fx, f = fx * fy, g = 1 + fy * fy;
      const double l = 2 * a / w, m = 0.0, nn = -2 * a / w;
      const double det_i = e * g - f * f;
      const double s00 = (g * l - f * m) / det_i, s01 = (g * m - f * nn) / det_i;
      const double s10 = (e * m - f * l) / det_i, s11 = (e * nn - f * m) / det_i;
      const double tr = s00 + s11, dt = s00 * s11 - s01 * s10;
      const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - dt));
      const double k1 = tr / 2 + disc, k2 = tr / 2 - disc;
      auto dir = [&](double k) {
        // Null vector of (S - k I); either row works away from degeneracy.
        double du = s01, dv = k - s00;
        if (std::hypot(du, dv) < 1e-14) {
          du = k - s11;
          dv = s10;
        }
        return normalized(Vec3{du, dv, fx * du + fy * dv});
      };
      return detail::make_frame(n, dir(k1), k1, dir(k2), k2);
    }
    case Category::kBox: {
      const Vec3& h = spec.half_extents;
      int axis = 0;
      double best = -1.0;
      for (int i = 0; i < 3; ++i) {
        const double r = std::abs(p[i]) / h[i];
        if (r > best) {
          best = r;
          axis = i;
        }
      }
      Vec3 n;
      n[axis] = p[axis] >= 0 ? 1.0 : -1.0;
      return detail::flat_frame(n);
    }
    case Category::kCone: {
      if (spec.caps && std::abs(p.z + spec.height / 2.0) <= kOnPlane) return detail::flat_frame({0, 0, -1});
      const double rho = std::hypot(p.x, p.y);
      if (rho < 1e-12) return detail::flat_frame({0, 0, 1});  // apex
      const Vec3 radial{p.x / rho, p.y / rho, 0.0};
      const Vec3 apex{0, 0, spec.height / 2.0};
      const Vec3 generator = normalized(p - apex);
      const Vec3 parallel = cross({0, 0, 1}, radial);
      const Vec3 n = normalized(cross(generator, parallel));
      return detail::make_frame(n, generator, 0.0, parallel, dot(n, radial) / rho);
    }
  }
  throw ValidationError("analytic_frame: unknown category");
}

/// Area-uniform, jittered-stratified sample of `spec.complete_count` points
/// with an oracle frame for each.
inline GeneratedShape generate_shape(const ShapeSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.complete_count;
  const double pi = std::numbers::pi;
  GeneratedShape g;
  g.cloud.reserve(n);
  switch (spec.category) {
    case Category::kSphere:
      for (const auto& s : detail::jittered(n, pi, rng)) {
        const double phi = 2 * pi * s[0], z = 1 - 2 * s[1];
        const double rho = std::sqrt(std::max(0.0, 1 - z * z));
        const Vec3 p = spec.radius * Vec3{rho * std::cos(phi), rho * std::sin(phi), z};
        detail::push(g, p, analytic_frame(spec, p));
      }
      break;
    case Category::kCylinder: {
      const double r = spec.radius, h = spec.height;
      const double cap_area = spec.caps ? pi * r * r : 0.0;
      const auto counts = detail::apportion(n, {2 * pi * r * h, cap_area, cap_area});
      for (const auto& s : detail::jittered(counts[0], 2 * pi * r / h, rng)) {
        const double phi = 2 * pi * s[0];
        const Vec3 p{r * std::cos(phi), r * std::sin(phi), h * (s[1] - 0.5)};
        detail::push(g, p, analytic_frame(spec, p));
      }
      detail::disc(g, counts[1], r, h / 2, {0, 0, 1}, rng);
      detail::disc(g, counts[2], r, -h / 2, {0, 0, -1}, rng);
      break;
    }
    case Category::kTorus:
      for (const auto& s : detail::jittered(n, spec.radius / spec.minor_radius, rng)) {
        const double phi = 2 * pi * s[0];
        const double v = detail::torus_tube_angle(s[1], spec.radius, spec.minor_radius);
        const double rho = spec.radius + spec.minor_radius * std::cos(v);
        const Vec3 p{rho * std::cos(phi), rho * std::sin(phi), spec.minor_radius * std::sin(v)};
        detail::push(g, p, analytic_frame(spec, p));
      }
      break;
    case Category::kSaddle: {
      // Jittered grid over the domain thinned by the area element; the grid
      // grows until enough samples survive, then a random subset is kept.
      const double a = spec.curvature, hx = spec.half_extents.x, hy = spec.half_extents.y;
      const double w_max = std::sqrt(1 + 4 * a * a * (hx * hx + hy * hy));
      std::vector<Vec3> kept;
      for (double over = 1.3; kept.size() < n; over *= 1.1) {
        kept.clear();
        const auto m = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * over));
        for (const auto& s : detail::jittered(m, hx / hy, rng)) {
          const double x = hx * (2 * s[0] - 1), y = hy * (2 * s[1] - 1);
          const double w = std::sqrt(1 + 4 * a * a * (x * x + y * y)) / w_max;
          if (uniform01(rng) < w) kept.push_back({x, y, a * (x * x - y * y)});
        }
      }
      std::shuffle(kept.begin(), kept.end(), rng);
      for (std::size_t i = 0; i < n; ++i) detail::push(g, kept[i], analytic_frame(spec, kept[i]));
      break;
    }
    case Category::kBox: {
      const Vec3& h = spec.half_extents;
      const double ayz = h.y * h.z, axz = h.x * h.z, axy = h.x * h.y;
      const auto counts = detail::apportion(n, {ayz, ayz, axz, axz, axy, axy});
      for (int face = 0; face < 6; ++face) {
        const int axis = face / 2;
        const double sign = face % 2 == 0 ? 1.0 : -1.0;
        const int ua = (axis + 1) % 3, va = (axis + 2) % 3;
        for (const auto& s : detail::jittered(counts[face], h[ua] / h[va], rng)) {
          Vec3 p;
          p[axis] = sign * h[axis];
          p[ua] = h[ua] * (2 * s[0] - 1);
          p[va] = h[va] * (2 * s[1] - 1);
          Vec3 nrm;
          nrm[axis] = sign;
          detail::push(g, p, detail::flat_frame(nrm));
        }
      }
      break;
    }
    case Category::kCone: {
      const double r = spec.radius, h = spec.height;
      const double slant = std::hypot(r, h);
      const auto counts = detail::apportion(n, {pi * r * slant, spec.caps ? pi * r * r : 0.0});
      for (const auto& s : detail::jittered(counts[0], 2 * pi * r / slant, rng)) {
        const double t = std::sqrt(s[1]);  // fraction of the way from apex to base
        const double phi = 2 * pi * s[0];
        const Vec3 p{t * r * std::cos(phi), t * r * std::sin(phi), h / 2 - t * h};
        detail::push(g, p, analytic_frame(spec, p));
      }
      detail::disc(g, counts[1], r, -h / 2, {0, 0, -1}, rng);
      break;
    }
  }
  return g;
}

}  // namespace curvadv
