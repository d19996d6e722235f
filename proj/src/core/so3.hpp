// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace orient {

using Vec3 = std::array<double, 3>;

/// Orthonormal 3x3 matrix with determinant +1, stored row-major.
///
/// Instances built through the factories below satisfy
/// ||M^T M - I||_F <= 1e-9 and |det M - 1| <= 1e-9.
class Rotation {
 public:
  Rotation();  // identity

  /// Accepts a row-major matrix. Matrices within 1e-9 of SO(3) are kept
  /// verbatim; matrices within 1e-6 are re-orthonormalized; anything else
  /// throws DegenerateInput.
  static Rotation from_matrix(const std::array<double, 9>& row_major);

  static Rotation about_axis(const Vec3& axis, double angle_rad);
  static Rotation about_z_degrees(double degrees);

  double operator()(std::size_t row, std::size_t col) const { return m_[row * 3 + col]; }
  const std::array<double, 9>& row_major() const { return m_; }
  Vec3 column(std::size_t c) const { return {m_[c], m_[3 + c], m_[6 + c]}; }

  Rotation operator*(const Rotation& rhs) const;
  Rotation transposed() const;
  Vec3 apply(const Vec3& v) const;

  double orthonormality_error() const;  // ||M^T M - I||_F
  double determinant() const;

  bool operator==(const Rotation& rhs) const = default;

 private:
  explicit Rotation(const std::array<double, 9>& m) : m_(m) {}
  std::array<double, 9> m_;
};

/// Raw two-vector rotation parameterization mapped through Gram-Schmidt.
struct SixDRep {
  Vec3 a;
  Vec3 b;
};

/// Angle of r1^T r2 over pi, in [0, 1]; equal to arccos(clamp((tr - 1) / 2)) / pi
/// but evaluated with atan2 so near-identical rotations give ~1e-16, not ~1e-8.
double geodesic_distance(const Rotation& r1, const Rotation& r2);

/// Columns (c1, c2, c1 x c2) with c1 = a/|a|, c2 = normalized residual of b.
/// Throws DegenerateInput when either norm falls below 1e-12.
Rotation from_sixd(const SixDRep& v);

/// count rotations from six i.i.d. standard normals each; reproducible per seed.
std::vector<Rotation> sample_rotations(std::size_t count, std::uint64_t seed);

/// Greedy farthest point sampling under geodesic distance. The first pick is
/// `start`; ties go to the lowest index. Throws InvalidK unless 1 <= k <= |pool|.
std::vector<std::size_t> fps_select(std::span<const Rotation> pool, std::size_t k, std::size_t start = 0);

/// Same as fps_select, also reporting the max-min distance achieved at each
/// pick after the first (size k - 1).
std::vector<std::size_t> fps_select_traced(std::span<const Rotation> pool, std::size_t k, std::size_t start,
                                           std::vector<double>& step_distances);

}  // namespace orient
