#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "curvadv/neighbors.hpp"
#include "curvadv/random.hpp"

using namespace curvadv;

namespace {

// O(n^2) oracle over all pairwise distances: full sort by (d2, index).
std::vector<std::size_t> brute(const PointCloud& c, const Vec3& q, std::size_t k, std::optional<std::size_t> ex) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!ex || i != *ex) idx.push_back(i);
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double da = squared_distance(c[a], q), db = squared_distance(c[b], q);
    return da < db || (da == db && a < b);
  });
  idx.resize(k);
  return idx;
}

}  // namespace

TEST(Knn, CollinearExample) {
  const PointCloud c{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
  EXPECT_EQ(knn_of(c, 0, 1, true), (std::vector<std::size_t>{1}));
}

TEST(Knn, AllOthers) {
  const PointCloud c{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}, {-2, 0, 0}};
  auto r = knn_of(c, 2, 3, true);
  std::sort(r.begin(), r.end());
  EXPECT_EQ(r, (std::vector<std::size_t>{0, 1, 3}));
}

TEST(Knn, TooManyThrows) {
  const PointCloud c{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(knn_of(c, 0, 2, true), SizeError);
  EXPECT_THROW(knn(c, {}, 0), ValidationError);
}

TEST(Knn, TiesGoToLowerIndex) {
  PointCloud c;
  for (int i = 0; i < 40; ++i) c.push_back({i % 2 == 0 ? 1.0 : -1.0, 0, 0});
  const auto r = knn(c, {0, 0, 0}, 5);
  EXPECT_EQ(r, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Knn, MatchesExhaustiveScan) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 499;
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse quantization forces many exact distance ties.
      const bool grid = trial % 3 == 0;
      auto coord = [&] { return grid ? std::round(uniform(rng, -4, 4)) : uniform(rng, -1, 1); };
      c.push_back({coord(), coord(), coord()});
    }
    const KdTree tree(c);
    for (int q = 0; q < 5; ++q) {
      const std::size_t qi = rng() % n;
      const std::size_t k = 1 + rng() % (n - 1);
      EXPECT_EQ(tree.query(c[qi], k, qi), brute(c, c[qi], k, qi));
      EXPECT_EQ(knn_scan(c, c[qi], k, qi), brute(c, c[qi], k, qi));
      const Vec3 free{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
      EXPECT_EQ(tree.query(free, k), brute(c, free, k, std::nullopt));
    }
  }
}

TEST(Knn, HundredPointsK20) {
  Rng rng(22);
  PointCloud c;
  for (int i = 0; i < 100; ++i) c.push_back({uniform01(rng), uniform01(rng), uniform01(rng)});
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(knn_of(c, i, 20, true), brute(c, c[i], 20, i));
}
