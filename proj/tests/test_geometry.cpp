#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "curvadv/cloud.hpp"
#include "curvadv/geometry.hpp"
#include "curvadv/random.hpp"

using namespace curvadv;

namespace {

SymMat3 random_sym(Rng& rng, double scale = 1.0) {
  return {uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale),
          uniform(rng, -scale, scale), uniform(rng, -scale, scale), uniform(rng, -scale, scale)};
}

double det3(const SymMat3& m) {
  return m.xx * (m.yy * m.zz - m.yz * m.yz) - m.xy * (m.xy * m.zz - m.yz * m.xz) +
         m.xz * (m.xy * m.yz - m.yy * m.xz);
}

// Real roots of det(M - t I) by bisection between the critical points of
// the characteristic cubic; deliberately shares nothing with eig3.
std::array<double, 3> charpoly_roots(const SymMat3& m) {
  const double c2 = -(m.xx + m.yy + m.zz);
  const double c1 = m.xx * m.yy + m.xx * m.zz + m.yy * m.zz - m.xy * m.xy - m.xz * m.xz - m.yz * m.yz;
  const double c0 = -det3(m);
  auto p = [&](double t) { return ((t + c2) * t + c1) * t + c0; };
  double bound = 0.0;
  for (int r = 0; r < 3; ++r) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += std::abs(m(r, c));
    bound = std::max(bound, s);
  }
  bound += 1.0;
  const double disc = std::max(0.0, c2 * c2 - 3.0 * c1);
  const double r1 = (-c2 - std::sqrt(disc)) / 3.0, r2 = (-c2 + std::sqrt(disc)) / 3.0;
  auto bisect = [&](double lo, double hi) {
    double plo = p(lo);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double pm = p(mid);
      if ((pm <= 0) == (plo <= 0)) {
        lo = mid;
        plo = pm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  return {bisect(-bound, r1), bisect(r1, r2), bisect(r2, bound)};
}

}  // namespace

TEST(Vec3, CrossAndAngle) {
  const Vec3 x{1, 0, 0}, y{0, 1, 0};
  EXPECT_EQ(cross(x, y), (Vec3{0, 0, 1}));
  EXPECT_NEAR(angle_between(x, y), std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(angle_between(x, -x), std::numbers::pi, 1e-15);
  EXPECT_EQ(normalized(Vec3{}), Vec3{});
}

TEST(Eig3, Identity) {
  const auto e = eig3(SymMat3::identity());
  for (double v : e.eigenvalues) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Eig3, DiagonalSortedAndAxisAligned) {
  const auto e = eig3(SymMat3::diagonal(3, 1, 2));
  EXPECT_NEAR(e.eigenvalues[0], 1, 1e-14);
  EXPECT_NEAR(e.eigenvalues[1], 2, 1e-14);
  EXPECT_NEAR(e.eigenvalues[2], 3, 1e-14);
  EXPECT_NEAR(std::abs(e.eigenvectors[0].y), 1, 1e-12);
  EXPECT_NEAR(std::abs(e.eigenvectors[1].z), 1, 1e-12);
  EXPECT_NEAR(std::abs(e.eigenvectors[2].x), 1, 1e-12);
}

TEST(Eig3, ZeroMatrix) {
  const auto e = eig3(SymMat3{});
  for (double v : e.eigenvalues) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(std::abs(dot(e.eigenvectors[0], e.eigenvectors[1])), 0, 1e-15);
}

TEST(Eig3, RandomResidualOrthonormalityAndCharpoly) {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const double scale = std::pow(10.0, uniform(rng, -4, 4));
    const SymMat3 m = random_sym(rng, scale);
    const auto e = eig3(m);
    const auto roots = charpoly_roots(m);
    const double mnorm = std::max({std::abs(e.eigenvalues[0]), std::abs(e.eigenvalues[2]), 1e-300});
    for (int i = 0; i < 3; ++i) {
      const Vec3& v = e.eigenvectors[i];
      EXPECT_NEAR(norm(v), 1.0, 1e-9);
      EXPECT_LE(norm(m * v - e.eigenvalues[i] * v), 1e-7 * mnorm);
      EXPECT_NEAR(e.eigenvalues[i], roots[i], 1e-7 * mnorm);
      for (int j = i + 1; j < 3; ++j) EXPECT_LE(std::abs(dot(v, e.eigenvectors[j])), 1e-7);
    }
    EXPECT_LE(e.eigenvalues[0], e.eigenvalues[1]);
    EXPECT_LE(e.eigenvalues[1], e.eigenvalues[2]);
  }
}

TEST(Eig3, ReconstructionIncludingRepeatedEigenvalues) {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    // Random rotation from a random symmetric matrix's eigenvectors, then
    // prescribed spectra with exact and near repeats.
    const auto basis = eig3(random_sym(rng)).eigenvectors;
    std::array<double, 3> lam{uniform(rng, -2, 2), 0, 0};
    lam[1] = trial % 3 == 0 ? lam[0] : uniform(rng, -2, 2);
    lam[2] = trial % 5 == 0 ? lam[1] + 1e-9 : uniform(rng, -2, 2);
    SymMat3 m;
    for (int i = 0; i < 3; ++i) {
      SymMat3 o = SymMat3::outer(basis[i]);
      m += {lam[i] * o.xx, lam[i] * o.xy, lam[i] * o.xz, lam[i] * o.yy, lam[i] * o.yz, lam[i] * o.zz};
    }
    const auto e = eig3(m);
    SymMat3 back;
    for (int i = 0; i < 3; ++i) {
      SymMat3 o = SymMat3::outer(e.eigenvectors[i]);
      const double l = e.eigenvalues[i];
      back += {l * o.xx, l * o.xy, l * o.xz, l * o.yy, l * o.yz, l * o.zz};
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(back(r, c), m(r, c), 1e-7);
    }
  }
}

TEST(Covariance, SingleNeighbor) {
  const PointCloud cloud{{0, 0, 0}, {1, 0, 0}};
  const std::vector<std::size_t> nb{1};
  const SymMat3 c = covariance(cloud, 0, nb);
  EXPECT_EQ(c, SymMat3::diagonal(1, 0, 0));
}

TEST(Covariance, SelfNeighborhoodIsZero) {
  const PointCloud cloud{{0.3, -0.2, 0.1}};
  const std::vector<std::size_t> nb{0};
  EXPECT_EQ(covariance(cloud, 0, nb), SymMat3{});
}

TEST(Covariance, EmptyNeighborhoodThrows) {
  const PointCloud cloud{{0, 0, 0}};
  EXPECT_THROW(covariance(cloud, 0, {}), SizeError);
}

TEST(Covariance, MatchesElementwiseSumAndIsPsd) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    PointCloud cloud;
    for (int i = 0; i < 21; ++i) cloud.push_back({uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)});
    std::vector<std::size_t> nb(20);
    for (std::size_t i = 0; i < 20; ++i) nb[i] = i + 1;
    const SymMat3 c = covariance(cloud, 0, nb);
    for (int r = 0; r < 3; ++r) {
      for (int s = 0; s < 3; ++s) {
        double want = 0.0;
        for (std::size_t q : nb) want += (cloud[0][r] - cloud[q][r]) * (cloud[0][s] - cloud[q][s]);
        EXPECT_NEAR(c(r, s), want, 1e-12);
      }
    }
    EXPECT_GE(eig3(c).eigenvalues[0], -1e-9);
  }
}

TEST(Normalize, TwoPointExample) {
  const auto n = normalize_cloud(PointCloud{{2, 2, 2}, {4, 2, 2}});
  EXPECT_EQ(n.cloud[0], (Vec3{-0.5, 0, 0}));
  EXPECT_EQ(n.cloud[1], (Vec3{0.5, 0, 0}));
  EXPECT_EQ(n.record.scale, 2.0);
  EXPECT_EQ(n.record.offset, (Vec3{3, 2, 2}));
}

TEST(Normalize, SinglePointMapsToOrigin) {
  const auto n = normalize_cloud(PointCloud{{5, -1, 2}});
  EXPECT_EQ(n.cloud[0], Vec3{});
  EXPECT_EQ(n.record.scale, 1.0);
}

TEST(Normalize, AlreadyNormalizedIsIdentity) {
  const PointCloud c{{-0.5, 0.1, 0.0}, {0.5, -0.1, 0.0}, {0.0, 0.0, 0.2}, {0.0, 0.0, -0.2}};
  const auto n = normalize_cloud(c);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE(norm(n.cloud[i] - c[i]), 1e-12);
}

TEST(Normalize, RoundTripAndBounds) {
  Rng rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    PointCloud c;
    for (int i = 0; i < 64; ++i) c.push_back({uniform(rng, -7, 3), uniform(rng, 10, 12), uniform(rng, -1, 1)});
    const auto n = normalize_cloud(c);
    Vec3 centroid;
    double max_abs = 0;
    for (const Vec3& p : n.cloud) {
      centroid += p;
      max_abs = std::max(max_abs, max_abs_component(p));
    }
    EXPECT_LE(norm(centroid / 64.0), 1e-12);
    EXPECT_NEAR(max_abs, 0.5, 1e-12);
    const PointCloud back = denormalize_cloud(n.cloud, n.record);
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE(norm(back[i] - c[i]), 1e-9);
  }
}

TEST(Normalize, RejectsNonFinite) {
  EXPECT_THROW(normalize_cloud(PointCloud{{0, std::nan(""), 0}}), ValidationError);
  EXPECT_THROW(normalize_cloud(PointCloud{}), SizeError);
}
