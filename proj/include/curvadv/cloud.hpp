#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "curvadv/errors.hpp"
#include "curvadv/geometry.hpp"

namespace curvadv {

/// Ordered set of 3D points in model units.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {}
  PointCloud(std::initializer_list<Vec3> points) : points_(points) {}

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  Vec3& operator[](std::size_t i) { return points_[i]; }

  auto begin() const noexcept { return points_.begin(); }
  auto end() const noexcept { return points_.end(); }
  auto begin() noexcept { return points_.begin(); }
  auto end() noexcept { return points_.end(); }

  const std::vector<Vec3>& points() const noexcept { return points_; }
  std::vector<Vec3>& points() noexcept { return points_; }
  std::span<const Vec3> view() const noexcept { return points_; }

  void push_back(const Vec3& p) { points_.push_back(p); }
  void reserve(std::size_t n) { points_.reserve(n); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Vec3> points_;
};

/// Throws SizeError if empty and ValidationError on any non-finite coordinate.
inline void validate_cloud(const PointCloud& cloud, const char* what = "cloud") {
  if (cloud.empty()) throw SizeError(std::string(what) + " is empty");
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!is_finite(cloud[i])) {
      throw ValidationError(std::string(what) + " has a non-finite coordinate at point " +
                            std::to_string(i));
    }
  }
}

/// Affine map applied by normalize_cloud: normalized = (p - offset) / scale.
struct NormalizationRecord {
  Vec3 offset;
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p - offset) / scale; }
  Vec3 invert(const Vec3& q) const { return q * scale + offset; }
};

struct NormalizedCloud {
  PointCloud cloud;
  NormalizationRecord record;
};

/// Centers the cloud on its centroid and scales it so that the largest
/// absolute coordinate is 0.5. Clouds without extent map to the origin with
/// unit scale.
inline NormalizedCloud normalize_cloud(const PointCloud& cloud) {
  validate_cloud(cloud);
  Vec3 centroid;
  for (const Vec3& p : cloud) centroid += p;
  centroid = centroid / static_cast<double>(cloud.size());

  double extent = 0.0;
  for (const Vec3& p : cloud) extent = std::max(extent, max_abs_component(p - centroid));

  NormalizationRecord record{centroid, extent > 0.0 ? 2.0 * extent : 1.0};
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const Vec3& p : cloud) out.push_back(record.apply(p));
  return {PointCloud(std::move(out)), record};
}

inline PointCloud denormalize_cloud(const PointCloud& cloud, const NormalizationRecord& record) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const Vec3& q : cloud) out.push_back(record.invert(q));
  return PointCloud(std::move(out));
}

/// Sum over the neighborhood of (p - q)(p - q)^T with p = cloud[center_index].
inline SymMat3 covariance(const PointCloud& cloud, std::size_t center_index,
                          std::span<const std::size_t> neighborhood) {
  if (neighborhood.empty()) throw SizeError("covariance: empty neighborhood");
  if (center_index >= cloud.size()) throw ValidationError("covariance: center index out of range");
  const Vec3& p = cloud[center_index];
  SymMat3 c;
  for (std::size_t q : neighborhood) {
    if (q >= cloud.size()) throw ValidationError("covariance: neighbor index out of range");
    c += SymMat3::outer(p - cloud[q]);
  }
  return c;
}

}  // namespace curvadv
