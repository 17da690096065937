#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "curvadv/curvature.hpp"
#include "curvadv/shapes.hpp"
#include "support.hpp"

using namespace curvadv;
using curvadv::testing::deg;
using curvadv::testing::line_angle;
using curvadv::testing::pair_error;

namespace {

PointCloud plane_cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.push_back({uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), 0.0});
  return c;
}

void expect_frame_invariants(const SurfaceFrame& f) {
  EXPECT_NEAR(norm(f.normal), 1.0, 1e-9);
  EXPECT_NEAR(norm(f.principal[0]), 1.0, 1e-9);
  EXPECT_NEAR(norm(f.principal[1]), 1.0, 1e-9);
  EXPECT_NEAR(norm(f.mean_dir), 1.0, 1e-9);
  EXPECT_LE(std::abs(dot(f.principal[0], f.principal[1])), 1e-7);
  EXPECT_LE(std::abs(dot(f.principal[0], f.normal)), 1e-7);
  EXPECT_LE(std::abs(dot(f.principal[1], f.normal)), 1e-7);
  EXPECT_LE(std::abs(dot(f.mean_dir, f.normal)), 1e-6);
  // The mean direction bisects the two principal lines.
  EXPECT_NEAR(line_angle(f.mean_dir, f.principal[0]), std::numbers::pi / 4, 1e-7);
}

}  // namespace

TEST(Normals, PlaneHemisphere) {
  const PointCloud c = plane_cloud(500, 1);
  const auto normals = estimate_normals(c, CurvatureParams{});
  for (const Vec3& n : normals) EXPECT_LE(norm(n - Vec3{0, 0, 1}), 1e-6);
}

TEST(Normals, SphereTowardViewpoint) {
  ShapeSpec spec = ShapeSpec::sphere(1.0);
  spec.complete_count = 2048;
  spec.seed = 2;
  const PointCloud c = generate_shape(spec).cloud;
  CurvatureParams params;
  params.orientation = Orientation::toward({0, 0, 5});
  const auto normals = estimate_normals(c, params);
  std::size_t upper = 0, good = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].z <= 0.5) continue;
    ++upper;
    if (deg(angle_between(normals[i], c[i])) <= 5.0) ++good;
  }
  ASSERT_GT(upper, 100u);
  EXPECT_GE(static_cast<double>(good), 0.99 * static_cast<double>(upper));
}

TEST(Normals, CloudOfSizeKpThrows) {
  const PointCloud c = plane_cloud(20, 3);
  EXPECT_THROW(estimate_normals(c, CurvatureParams{}), SizeError);
}

TEST(Normals, HemisphereFallsThroughToY) {
  EXPECT_EQ(orient_normal({0, -1, 0}, {}, Orientation::hemisphere()), (Vec3{0, 1, 0}));
  EXPECT_EQ(orient_normal({-1, 0, 0}, {}, Orientation::hemisphere()), (Vec3{1, 0, 0}));
  EXPECT_EQ(orient_normal({0, 0, -1}, {}, Orientation::toward({0, 0, -3})), (Vec3{0, 0, -1}));
}

TEST(TangentBasis, ZNormal) {
  const auto [u, v] = tangent_basis({0, 0, 1});
  EXPECT_EQ(u, (Vec3{1, 0, 0}));
  EXPECT_EQ(v, (Vec3{0, 1, 0}));
}

TEST(TangentBasis, XNormalSpansYz) {
  const auto [u, v] = tangent_basis({1, 0, 0});
  EXPECT_NEAR(u.x, 0, 1e-15);
  EXPECT_NEAR(v.x, 0, 1e-15);
  EXPECT_NEAR(norm(u), 1, 1e-9);
  EXPECT_NEAR(dot(u, v), 0, 1e-9);
}

TEST(TangentBasis, RandomRightHanded) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 n = curvadv::testing::random_unit(rng);
    const auto [u, v] = tangent_basis(n);
    EXPECT_NEAR(dot(cross(u, v), n), 1.0, 1e-9);
    EXPECT_NEAR(dot(u, n), 0.0, 1e-12);
    EXPECT_NEAR(norm(v), 1.0, 1e-12);
  }
  EXPECT_THROW(tangent_basis({}), ValidationError);
}

TEST(IntersectionDirection, Degenerate) {
  EXPECT_LE(norm(intersection_direction({0, 0, 1}, {0, 1, 0}, {1, 0, 0})), 1e-12);
  EXPECT_EQ(intersection_direction({0, 0, 1}, {0, 0, 1}, {0, 1, 0}), Vec3{});
}

TEST(IntersectionDirection, TiltedPairAgainstXPlane) {
  const double t = 10.0 * std::numbers::pi / 180.0;
  const Vec3 d = intersection_direction({0, 0, 1}, {std::sin(t), 0, std::cos(t)}, {1, 0, 0});
  // Plane spanned by the normals is y = 0; with x = 0 it leaves the z axis.
  EXPECT_LE(line_angle(d, {0, 0, 1}), 1e-12);
}

TEST(IntersectionDirection, MatchesPlaneIntersectionSolve) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Vec3 n1 = curvadv::testing::random_unit(rng), n2 = curvadv::testing::random_unit(rng);
    const Vec3 dp = curvadv::testing::random_unit(rng);
    const Vec3 d = intersection_direction(n1, n2, dp);
    // Oracle: the line through the origin in both planes solves
    // [a; b; r] x = [0; 0; 1] for planes with normals a = n1 x n2, b = dp and
    // any r off the line; Cramer's rule.
    const Vec3 a = cross(n1, n2), r{0.3, -0.7, 0.64};
    const double det = dot(a, cross(dp, r));
    ASSERT_GT(std::abs(det), 1e-6);
    const Vec3 x = cross(a, dp) / det;
    EXPECT_LE(line_angle(d, x), 1e-9);
  }
}

TEST(NormalVariation, FlatPatchIsZero) {
  const std::vector<Vec3> normals(10, Vec3{0, 0, 1});
  std::vector<Vec3> offsets;
  Rng rng(6);
  for (int i = 0; i < 10; ++i) offsets.push_back({uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1), 0});
  const DirectionPair pair{{1, 0, 0}, {0, 1, 0}};
  for (VariationRule rule : {VariationRule::kSectionFit, VariationRule::kIntersection}) {
    const auto r = normal_variation(pair, {0, 0, 1}, normals, offsets, rule);
    EXPECT_EQ(r.delta, 0.0);
  }
}

TEST(NormalVariation, TooFewNormalsThrows) {
  const std::vector<Vec3> normals(3, Vec3{0, 0, 1});
  const std::vector<Vec3> offsets(3, Vec3{0.1, 0, 0});
  for (VariationRule rule : {VariationRule::kSectionFit, VariationRule::kIntersection}) {
    EXPECT_THROW(normal_variation({{1, 0, 0}, {0, 1, 0}}, {0, 0, 1}, normals, offsets, rule), SizeError);
  }
}

TEST(NormalVariation, AnalyticCylinderPatchPicksAxisPair) {
  Rng rng(7);
  const double r = 0.3;
  const CurvatureParams params;
  int hits = 0, trials = 200;
  for (int t = 0; t < trials; ++t) {
    const double phi = uniform(rng, 0, 2 * std::numbers::pi);
    const Vec3 p{r * std::cos(phi), r * std::sin(phi), uniform(rng, -0.3, 0.3)};
    const Vec3 n{std::cos(phi), std::sin(phi), 0};
    std::vector<Vec3> normals, offsets;
    for (int i = 0; i < 10; ++i) {
      const double a = phi + uniform(rng, -0.2, 0.2);
      const Vec3 q{r * std::cos(a), r * std::sin(a), p.z + uniform(rng, -0.06, 0.06)};
      normals.push_back({std::cos(a), std::sin(a), 0});
      offsets.push_back(q - p);
    }
    const auto basis = tangent_basis(n);
    std::size_t best = 0;
    double best_delta = -1;
    for (std::size_t j = 0; j < params.k_d; ++j) {
      const auto pair = rotated_pair(basis, static_cast<double>(j) * params.step());
      const double d = normal_variation(pair, n, normals, offsets).delta;
      if (d > best_delta) {
        best_delta = d;
        best = j;
      }
    }
    const auto pair = rotated_pair(basis, static_cast<double>(best) * params.step());
    // Closest grid pair to the true directions is within half a step.
    if (deg(pair_error(pair.first, pair.second, {0, 0, 1}, cross({0, 0, 1}, n))) <= deg(params.step()) / 2 + 1e-9) ++hits;
  }
  EXPECT_EQ(hits, trials);
}

TEST(Frames, PlaneTiesToFirstPair) {
  const PointCloud c = plane_cloud(500, 8);
  const CurvatureField field = estimate_frames(c, CurvatureParams{});
  ASSERT_EQ(field.size(), c.size());
  for (const SurfaceFrame& f : field.frames) {
    EXPECT_LE(*f.variation, 1e-6);
    const auto [u, v] = tangent_basis(f.normal);
    EXPECT_EQ(f.principal[0], u);
    expect_frame_invariants(f);
  }
}

TEST(Frames, CylinderAxisAndCircumference) {
  ShapeSpec spec = ShapeSpec::cylinder(0.3, 1.0);
  spec.complete_count = 4096;
  spec.seed = 9;
  const GeneratedShape g = generate_shape(spec);
  const CurvatureField field = estimate_frames(g.cloud, CurvatureParams{});
  std::size_t good = 0;
  for (std::size_t i = 0; i < g.cloud.size(); ++i) {
    const auto& f = field[i];
    expect_frame_invariants(f);
    if (deg(pair_error(f.principal[0], f.principal[1], g.frames[i].min_dir, g.frames[i].max_dir)) <= 10.0) ++good;
  }
  EXPECT_GE(static_cast<double>(good), 0.90 * static_cast<double>(g.cloud.size()));
}

TEST(Frames, SaddleNearOriginAlignsWithAxes) {
  ShapeSpec spec = ShapeSpec::saddle(1.0, 0.5);
  spec.complete_count = 4096;
  spec.seed = 10;
  const PointCloud c = generate_shape(spec).cloud;
  const CurvatureField field = estimate_frames(c, CurvatureParams{});
  const auto nearest = knn(c, {0, 0, 0}, 50);
  std::size_t good = 0;
  for (std::size_t i : nearest) {
    const auto& f = field[i];
    if (deg(pair_error(f.principal[0], f.principal[1], {1, 0, 0}, {0, 1, 0})) <= 10.0) ++good;
  }
  EXPECT_GE(good, 40u);
}

TEST(Frames, DeterministicBitIdentical) {
  ShapeSpec spec = ShapeSpec::torus(0.35, 0.12);
  spec.seed = 11;
  const PointCloud c = generate_shape(spec).cloud;
  const auto a = estimate_frames(c, CurvatureParams{});
  const auto b = estimate_frames(c, CurvatureParams{});
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(a[i].normal, b[i].normal);
    EXPECT_EQ(a[i].principal, b[i].principal);
    EXPECT_EQ(a[i].mean_dir, b[i].mean_dir);
    EXPECT_EQ(a[i].variation, b[i].variation);
  }
}

TEST(Frames, InvariantUnderAxisRotation) {
  // A quarter turn about z maps coordinate axes onto coordinate axes, which
  // keeps the tangent-basis construction equivariant.
  ShapeSpec spec = ShapeSpec::cone(0.4, 0.8);
  spec.seed = 12;
  const PointCloud c = generate_shape(spec).cloud;
  auto rot = [](const Vec3& p) { return Vec3{-p.y, p.x, p.z}; };
  PointCloud rc;
  for (const Vec3& p : c) rc.push_back(rot(p));
  CurvatureParams params;
  params.orientation = Orientation::toward({0.3, 0.2, 3.0});
  CurvatureParams rparams = params;
  rparams.orientation = Orientation::toward(rot(params.orientation.viewpoint));
  const auto a = estimate_frames(c, params);
  const auto b = estimate_frames(rc, rparams);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LE(angle_between(rot(a[i].normal), b[i].normal), 1e-5);
    EXPECT_LE(line_angle(rot(a[i].principal[0]), b[i].principal[0]), 1e-5);
    EXPECT_LE(line_angle(rot(a[i].mean_dir), b[i].mean_dir), 1e-5);
  }
}

TEST(Frames, IntersectionRuleStillSatisfiesFrameInvariants) {
  CurvatureParams params;
  params.rule = VariationRule::kIntersection;
  ShapeSpec spec = ShapeSpec::sphere(0.5);
  spec.seed = 13;
  const auto field = estimate_frames(generate_shape(spec).cloud, params);
  for (const auto& f : field.frames) expect_frame_invariants(f);
  const auto flat = estimate_frames(plane_cloud(300, 14), params);
  for (const auto& f : flat.frames) EXPECT_EQ(*f.variation, 0.0);
}

TEST(Params, Validation) {
  CurvatureParams p;
  EXPECT_NEAR(p.step(), std::numbers::pi / 36, 1e-15);
  p.k_n = 3;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.rotation_step = 2.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p.rotation_step = std::numbers::pi / 10;  // the literal pi / k_n spacing
  EXPECT_NO_THROW(p.validate());
}
