// SPDX-License-Identifier: Apache-2.0
#include "so3.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "error.hpp"

namespace orient {
namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

constexpr double kDegenerateNorm = 1e-12;

}  // namespace

Rotation::Rotation() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Rotation Rotation::from_matrix(const std::array<double, 9>& row_major) {
  for (double v : row_major) {
    if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateInput, "rotation has non-finite entries");
  }
  Rotation r(row_major);
  const double ortho = r.orthonormality_error();
  const double det = r.determinant();
  if (ortho <= 1e-9 && std::abs(det - 1.0) <= 1e-9) return r;
  if (ortho <= 1e-6 && std::abs(det - 1.0) <= 1e-6) return from_sixd({r.column(0), r.column(1)});
  throw Error(ErrorCode::DegenerateInput,
              "matrix is not a rotation (orthonormality error " + std::to_string(ortho) + ", det " +
                  std::to_string(det) + ")");
}

Rotation Rotation::about_axis(const Vec3& axis, double angle_rad) {
  const double n = norm(axis);
  if (n < kDegenerateNorm) throw Error(ErrorCode::DegenerateInput, "rotation axis has zero length");
  const double x = axis[0] / n, y = axis[1] / n, z = axis[2] / n;
  const double c = std::cos(angle_rad), s = std::sin(angle_rad), t = 1.0 - c;
  return Rotation({t * x * x + c, t * x * y - s * z, t * x * z + s * y,
                   t * x * y + s * z, t * y * y + c, t * y * z - s * x,
                   t * x * z - s * y, t * y * z + s * x, t * z * z + c});
}

Rotation Rotation::about_z_degrees(double degrees) {
  // Exact entries at multiples of 90 degrees keep the analytic test cases exact.
  const double turns = degrees / 90.0;
  if (turns == std::floor(turns)) {
    static constexpr double kCos[4] = {1, 0, -1, 0};
    static constexpr double kSin[4] = {0, 1, 0, -1};
    const long q = ((static_cast<long>(turns) % 4) + 4) % 4;
    return Rotation({kCos[q], -kSin[q], 0, kSin[q], kCos[q], 0, 0, 0, 1});
  }
  return about_axis({0, 0, 1}, degrees * std::numbers::pi / 180.0);
}

Rotation Rotation::operator*(const Rotation& rhs) const {
  std::array<double, 9> out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      out[i * 3 + j] = m_[i * 3] * rhs.m_[j] + m_[i * 3 + 1] * rhs.m_[3 + j] + m_[i * 3 + 2] * rhs.m_[6 + j];
    }
  }
  return Rotation(out);
}

Rotation Rotation::transposed() const {
  return Rotation({m_[0], m_[3], m_[6], m_[1], m_[4], m_[7], m_[2], m_[5], m_[8]});
}

Vec3 Rotation::apply(const Vec3& v) const {
  return {m_[0] * v[0] + m_[1] * v[1] + m_[2] * v[2], m_[3] * v[0] + m_[4] * v[1] + m_[5] * v[2],
          m_[6] * v[0] + m_[7] * v[1] + m_[8] * v[2]};
}

double Rotation::orthonormality_error() const {
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double g = m_[i] * m_[j] + m_[3 + i] * m_[3 + j] + m_[6 + i] * m_[6 + j];
      if (i == j) g -= 1.0;
      sum += g * g;
    }
  }
  return std::sqrt(sum);
}

double Rotation::determinant() const {
  return m_[0] * (m_[4] * m_[8] - m_[5] * m_[7]) - m_[1] * (m_[3] * m_[8] - m_[5] * m_[6]) +
         m_[2] * (m_[3] * m_[7] - m_[4] * m_[6]);
}

double geodesic_distance(const Rotation& r1, const Rotation& r2) {
  // Angle of m = r1^T r2 from cos = (tr m - 1) / 2 and sin = |vee(m - m^T)| / 2.
  // atan2 keeps full precision near 0 and pi where arccos of a clamped cosine
  // would round small angles up to ~1e-8.
  const auto& a = r1.row_major();
  const auto& b = r2.row_major();
  std::array<double, 9> m{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) m[i * 3 + j] += a[k * 3 + i] * b[k * 3 + j];
  const double c = std::clamp((m[0] + m[4] + m[8] - 1.0) / 2.0, -1.0, 1.0);
  const double x = m[7] - m[5], y = m[2] - m[6], z = m[3] - m[1];
  const double s = 0.5 * std::sqrt(x * x + y * y + z * z);
  return std::atan2(s, c) / std::numbers::pi;
}

Rotation from_sixd(const SixDRep& v) {
  const double na = norm(v.a);
  if (na < kDegenerateNorm) throw Error(ErrorCode::DegenerateInput, "6D representation: first vector is zero");
  const Vec3 c1{v.a[0] / na, v.a[1] / na, v.a[2] / na};
  const double proj = dot(c1, v.b);
  const Vec3 resid{v.b[0] - proj * c1[0], v.b[1] - proj * c1[1], v.b[2] - proj * c1[2]};
  const double nr = norm(resid);
  if (nr < kDegenerateNorm) {
    throw Error(ErrorCode::DegenerateInput, "6D representation: second vector is parallel to the first");
  }
  const Vec3 c2{resid[0] / nr, resid[1] / nr, resid[2] / nr};
  const Vec3 c3 = cross(c1, c2);
  return Rotation::from_matrix({c1[0], c2[0], c3[0], c1[1], c2[1], c3[1], c1[2], c2[2], c3[2]});
}

std::vector<Rotation> sample_rotations(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Rotation> out;
  out.reserve(count);
  while (out.size() < count) {
    SixDRep rep;
    for (double& x : rep.a) x = normal(rng);
    for (double& x : rep.b) x = normal(rng);
    try {
      out.push_back(from_sixd(rep));
    } catch (const Error&) {
      // measure-zero degenerate draw: resample
    }
  }
  return out;
}

std::vector<std::size_t> fps_select_traced(std::span<const Rotation> pool, std::size_t k, std::size_t start,
                                           std::vector<double>& step_distances) {
  const std::size_t n = pool.size();
  if (k == 0 || k > n) {
    throw Error(ErrorCode::InvalidK, "k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
  if (start >= n) throw Error(ErrorCode::InvalidArgument, "FPS start index out of range");

  std::vector<std::size_t> picked{start};
  picked.reserve(k);
  step_distances.clear();
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  taken[start] = 1;
  std::size_t last = start;
  while (picked.size() < k) {
    std::size_t best = n;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      nearest[i] = std::min(nearest[i], geodesic_distance(pool[i], pool[last]));
      if (nearest[i] > best_dist) {  // strict: lowest index keeps ties
        best_dist = nearest[i];
        best = i;
      }
    }
    taken[best] = 1;
    picked.push_back(best);
    step_distances.push_back(best_dist);
    last = best;
  }
  return picked;
}

std::vector<std::size_t> fps_select(std::span<const Rotation> pool, std::size_t k, std::size_t start) {
  std::vector<double> unused;
  return fps_select_traced(pool, k, start, unused);
}

}  // namespace orient
