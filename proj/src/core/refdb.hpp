// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pyramid.hpp"
#include "so3.hpp"

namespace orient {

struct ReferenceEntry {
  Rotation rotation;
  std::shared_ptr<const FeaturePyramid> pyramid;
  std::uint32_t index = 0;
};

struct ObjectRefs {
  std::string category;
  std::vector<ReferenceEntry> entries;
  std::vector<std::uint32_t> anchor_ids;  // FPS order, first is entry 0
};

/// Input for one object: rotation-labeled pyramids in reference order.
struct ObjectSource {
  std::string category;
  std::vector<Rotation> rotations;
  std::vector<std::shared_ptr<const FeaturePyramid>> pyramids;
};

/// Rotation-labeled reference pyramids for N objects with precomputed FPS
/// anchors. Immutable once built or loaded; share it freely across threads.
class ReferenceDB {
 public:
  /// Selects k_ac anchors per object with fps_select (start 0). Throws
  /// ConfigMismatch when objects disagree on pyramid geometry or labels
  /// repeat, InsufficientReferences when an object has fewer than k_ac
  /// references.
  static ReferenceDB build(std::vector<ObjectSource> objects, std::size_t k_ac);

  /// "ORDB" format; load throws IoError, FormatError or VersionError and never
  /// returns a partially read database.
  static ReferenceDB load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t num_objects() const { return objects_.size(); }
  const ObjectRefs& object(std::size_t i) const { return objects_[i]; }
  const std::vector<ObjectRefs>& objects() const { return objects_; }
  const std::vector<ScaleDim>& scale_dims() const { return dims_; }
  std::uint32_t channels() const { return channels_; }
  std::size_t total_references() const;
  /// Index of the object with this label, or num_objects() if absent.
  std::size_t find_category(const std::string& label) const;

  /// Scale dims and channel count as one comparable string.
  std::string fingerprint() const;

  bool operator==(const ReferenceDB& other) const;

 private:
  ReferenceDB() = default;
  std::vector<ObjectRefs> objects_;
  std::vector<ScaleDim> dims_;
  std::uint32_t channels_ = 0;
};

/// CSV "index,r00,r01,...,r22" with rotations in row-major order. Rows are
/// returned sorted by index; indices must be 0..n-1 without gaps.
std::vector<Rotation> read_rotation_manifest(const std::string& path);
void write_rotation_manifest(const std::vector<Rotation>& rotations, const std::string& path);

}  // namespace orient
