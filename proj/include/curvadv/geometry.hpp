#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace curvadv {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
constexpr double squared_norm(const Vec3& a) { return dot(a, a); }
constexpr double squared_distance(const Vec3& a, const Vec3& b) { return squared_norm(a - b); }
inline double distance(const Vec3& a, const Vec3& b) { return std::sqrt(squared_distance(a, b)); }

/// Unit vector along `a`; returns the zero vector when |a| is zero.
inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  return n > 0.0 ? a / n : Vec3{};
}

inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Angle in [0, pi] between two nonzero vectors.
inline double angle_between(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate near 0 and pi where acos loses digits.
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

inline double max_abs_component(const Vec3& a) {
  return std::max({std::abs(a.x), std::abs(a.y), std::abs(a.z)});
}

/// Symmetric 3x3 matrix; only the upper triangle is stored.
struct SymMat3 {
  double xx = 0.0, xy = 0.0, xz = 0.0;
  double yy = 0.0, yz = 0.0;
  double zz = 0.0;

  constexpr double operator()(int r, int c) const {
    if (r > c) std::swap(r, c);
    if (r == 0) return c == 0 ? xx : (c == 1 ? xy : xz);
    if (r == 1) return c == 1 ? yy : yz;
    return zz;
  }

  constexpr Vec3 operator*(const Vec3& v) const {
    return {xx * v.x + xy * v.y + xz * v.z, xy * v.x + yy * v.y + yz * v.z,
            xz * v.x + yz * v.y + zz * v.z};
  }

  constexpr SymMat3& operator+=(const SymMat3& o) {
    xx += o.xx;
    xy += o.xy;
    xz += o.xz;
    yy += o.yy;
    yz += o.yz;
    zz += o.zz;
    return *this;
  }

  static constexpr SymMat3 identity() { return {1.0, 0.0, 0.0, 1.0, 0.0, 1.0}; }
  static constexpr SymMat3 diagonal(double a, double b, double c) { return {a, 0.0, 0.0, b, 0.0, c}; }

  /// a a^T
  static constexpr SymMat3 outer(const Vec3& a) {
    return {a.x * a.x, a.x * a.y, a.x * a.z, a.y * a.y, a.y * a.z, a.z * a.z};
  }

  friend constexpr bool operator==(const SymMat3&, const SymMat3&) = default;
};

/// Eigenvalues ascending; eigenvectors[i] belongs to eigenvalues[i].
struct EigenDecomp3 {
  std::array<double, 3> eigenvalues{};
  std::array<Vec3, 3> eigenvectors{};
};

namespace detail {

// Unit vectors u, v with (u, v, w) orthonormal; w must be unit length.
inline void orthogonal_complement(const Vec3& w, Vec3& u, Vec3& v) {
  if (std::abs(w.x) > std::abs(w.y)) {
    const double inv = 1.0 / std::sqrt(w.x * w.x + w.z * w.z);
    u = {-w.z * inv, 0.0, w.x * inv};
  } else {
    const double inv = 1.0 / std::sqrt(w.y * w.y + w.z * w.z);
    u = {0.0, w.z * inv, -w.y * inv};
  }
  v = cross(w, u);
}

// Eigenvector of a simple eigenvalue: the largest cross product of two rows
// of (A - lambda I) spans its null space.
inline Vec3 eigenvector_from_rows(const SymMat3& a, double lambda) {
  const Vec3 r0{a.xx - lambda, a.xy, a.xz};
  const Vec3 r1{a.xy, a.yy - lambda, a.yz};
  const Vec3 r2{a.xz, a.yz, a.zz - lambda};
  const Vec3 c01 = cross(r0, r1);
  const Vec3 c02 = cross(r0, r2);
  const Vec3 c12 = cross(r1, r2);
  const double d01 = dot(c01, c01);
  const double d02 = dot(c02, c02);
  const double d12 = dot(c12, c12);
  if (d01 >= d02 && d01 >= d12 && d01 > 0.0) return c01 / std::sqrt(d01);
  if (d02 >= d12 && d02 > 0.0) return c02 / std::sqrt(d02);
  if (d12 > 0.0) return c12 / std::sqrt(d12);
  // (A - lambda I) vanishes: every direction is an eigenvector.
  return {1.0, 0.0, 0.0};
}

// Second eigenvector, restricted to the plane orthogonal to `first`.
inline Vec3 eigenvector_in_complement(const SymMat3& a, const Vec3& first, double lambda) {
  Vec3 u, v;
  orthogonal_complement(first, u, v);
  const Vec3 au = a * u;
  const Vec3 av = a * v;
  double m00 = dot(u, au) - lambda;
  double m01 = dot(u, av);
  double m11 = dot(v, av) - lambda;
  const double a00 = std::abs(m00), a01 = std::abs(m01), a11 = std::abs(m11);
  if (a00 >= a11) {
    if (std::max(a00, a01) <= 0.0) return u;
    if (a00 >= a01) {
      m01 /= m00;
      m00 = 1.0 / std::sqrt(1.0 + m01 * m01);
      m01 *= m00;
    } else {
      m00 /= m01;
      m01 = 1.0 / std::sqrt(1.0 + m00 * m00);
      m00 *= m01;
    }
    return normalized(m01 * u - m00 * v);
  }
  if (std::max(a11, a01) <= 0.0) return u;
  if (a11 >= a01) {
    m01 /= m11;
    m11 = 1.0 / std::sqrt(1.0 + m01 * m01);
    m01 *= m11;
  } else {
    m11 /= m01;
    m01 = 1.0 / std::sqrt(1.0 + m11 * m11);
    m11 *= m01;
  }
  return normalized(m11 * u - m01 * v);
}

}  // namespace detail

/// Closed-form eigendecomposition of a symmetric 3x3 matrix.
///
/// Eigenvalues come from the trigonometric solution of the characteristic
/// cubic of the shifted, scaled matrix. The eigenvector of the best separated
/// eigenvalue is taken from row cross products, the second from a 2x2
/// problem in its orthogonal complement, and the third closes the frame, so
/// the returned basis is orthonormal by construction even for repeated
/// eigenvalues.
inline EigenDecomp3 eig3(const SymMat3& m) {
  EigenDecomp3 out;
  const double max_abs = std::max({std::abs(m.xx), std::abs(m.xy), std::abs(m.xz), std::abs(m.yy),
                                   std::abs(m.yz), std::abs(m.zz)});
  if (max_abs == 0.0) {
    out.eigenvectors = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    return out;
  }
  const double inv = 1.0 / max_abs;
  const SymMat3 a{m.xx * inv, m.xy * inv, m.xz * inv, m.yy * inv, m.yz * inv, m.zz * inv};

  const double off = a.xy * a.xy + a.xz * a.xz + a.yz * a.yz;
  const double q = (a.xx + a.yy + a.zz) / 3.0;
  const double b00 = a.xx - q, b11 = a.yy - q, b22 = a.zz - q;
  const double p = std::sqrt((b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * off) / 6.0);

  if (p == 0.0) {
    // Scaled matrix is a multiple of the identity.
    out.eigenvalues = {q * max_abs, q * max_abs, q * max_abs};
    out.eigenvectors = {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    return out;
  }

  const double c00 = b11 * b22 - a.yz * a.yz;
  const double c01 = a.xy * b22 - a.yz * a.xz;
  const double c02 = a.xy * a.yz - b11 * a.xz;
  const double det = (b00 * c00 - a.xy * c01 + a.xz * c02) / (p * p * p);
  const double half_det = std::clamp(0.5 * det, -1.0, 1.0);
  const double angle = std::acos(half_det) / 3.0;
  constexpr double two_thirds_pi = 2.0 * std::numbers::pi / 3.0;
  const double beta2 = 2.0 * std::cos(angle);
  const double beta0 = 2.0 * std::cos(angle + two_thirds_pi);
  const double beta1 = -(beta0 + beta2);

  std::array<double, 3> eval{q + p * beta0, q + p * beta1, q + p * beta2};
  std::array<Vec3, 3> evec;
  if (half_det >= 0.0) {
    evec[2] = detail::eigenvector_from_rows(a, eval[2]);
    evec[1] = detail::eigenvector_in_complement(a, evec[2], eval[1]);
    evec[0] = normalized(cross(evec[1], evec[2]));
  } else {
    evec[0] = detail::eigenvector_from_rows(a, eval[0]);
    evec[1] = detail::eigenvector_in_complement(a, evec[0], eval[1]);
    evec[2] = normalized(cross(evec[0], evec[1]));
  }

  // Rayleigh quotients are more accurate than the trigonometric roots once
  // the vectors are known, and keep the eigenvalues consistent with them.
  for (int i = 0; i < 3; ++i) eval[i] = dot(evec[i], a * evec[i]);
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int l, int r) { return eval[l] < eval[r]; });
  for (int i = 0; i < 3; ++i) {
    out.eigenvalues[i] = eval[order[i]] * max_abs;
    out.eigenvectors[i] = evec[order[i]];
  }
  return out;
}

}  // namespace curvadv
