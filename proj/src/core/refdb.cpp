// SPDX-License-Identifier: Apache-2.0
#include "refdb.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"

namespace orient {
namespace {

constexpr char kDbMagic[5] = "ORDB";
constexpr std::uint32_t kDbVersion = 1;

}  // namespace

ReferenceDB ReferenceDB::build(std::vector<ObjectSource> objects, std::size_t k_ac) {
  if (objects.empty()) throw Error(ErrorCode::InvalidArgument, "reference database needs at least one object");
  if (k_ac == 0) throw Error(ErrorCode::InvalidK, "k_ac must be >= 1");

  ReferenceDB db;
  std::set<std::string> labels;
  for (std::size_t o = 0; o < objects.size(); ++o) {
    auto& src = objects[o];
    if (!labels.insert(src.category).second) {
      throw Error(ErrorCode::ConfigMismatch, "duplicate category label '" + src.category + "'");
    }
    if (src.rotations.size() != src.pyramids.size()) {
      throw Error(ErrorCode::InvalidArgument, "object '" + src.category + "' has " +
                                                  std::to_string(src.rotations.size()) + " rotations but " +
                                                  std::to_string(src.pyramids.size()) + " pyramids");
    }
    if (src.rotations.size() < k_ac) {
      throw Error(ErrorCode::InsufficientReferences, "object '" + src.category + "' has " +
                                                         std::to_string(src.rotations.size()) +
                                                         " references, fewer than k_ac=" + std::to_string(k_ac));
    }
    ObjectRefs refs;
    refs.category = src.category;
    for (std::size_t i = 0; i < src.pyramids.size(); ++i) {
      const auto& p = src.pyramids[i];
      if (!p) throw Error(ErrorCode::InvalidArgument, "missing pyramid");
      if (db.dims_.empty()) {
        db.dims_ = p->dims();
        db.channels_ = p->channels();
      } else if (p->dims() != db.dims_ || p->channels() != db.channels_) {
        throw Error(ErrorCode::ConfigMismatch,
                    "object '" + src.category + "' reference " + std::to_string(i) + " has geometry " +
                        format_scale_dims(p->dims()) + " x" + std::to_string(p->channels()) + ", database uses " +
                        format_scale_dims(db.dims_) + " x" + std::to_string(db.channels_));
      }
      refs.entries.push_back({src.rotations[i], p, static_cast<std::uint32_t>(i)});
    }
    const auto anchors = fps_select(src.rotations, k_ac, 0);
    refs.anchor_ids.assign(anchors.begin(), anchors.end());
    db.objects_.push_back(std::move(refs));
  }
  return db;
}

std::size_t ReferenceDB::total_references() const {
  std::size_t n = 0;
  for (const auto& o : objects_) n += o.entries.size();
  return n;
}

std::size_t ReferenceDB::find_category(const std::string& label) const {
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    if (objects_[i].category == label) return i;
  }
  return objects_.size();
}

std::string ReferenceDB::fingerprint() const { return format_scale_dims(dims_) + "/c" + std::to_string(channels_); }

bool ReferenceDB::operator==(const ReferenceDB& other) const {
  if (dims_ != other.dims_ || channels_ != other.channels_ || objects_.size() != other.objects_.size()) return false;
  for (std::size_t o = 0; o < objects_.size(); ++o) {
    const auto& a = objects_[o];
    const auto& b = other.objects_[o];
    if (a.category != b.category || a.anchor_ids != b.anchor_ids || a.entries.size() != b.entries.size()) return false;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      if (a.entries[i].index != b.entries[i].index || !(a.entries[i].rotation == b.entries[i].rotation) ||
          !(*a.entries[i].pyramid == *b.entries[i].pyramid)) {
        return false;
      }
    }
  }
  return true;
}

void ReferenceDB::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write database '" + path + "'");
  binio::write_magic(out, kDbMagic);
  binio::write<std::uint32_t>(out, kDbVersion);
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(objects_.size()));
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(dims_.size()));
  binio::write<std::uint32_t>(out, channels_);
  for (const auto& d : dims_) {
    binio::write<std::uint32_t>(out, d.height);
    binio::write<std::uint32_t>(out, d.width);
  }
  for (const auto& obj : objects_) {
    binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(obj.category.size()));
    out.write(obj.category.data(), static_cast<std::streamsize>(obj.category.size()));
    binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(obj.entries.size()));
    binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(obj.anchor_ids.size()));
    binio::write_span<std::uint32_t>(out, obj.anchor_ids);
    for (const auto& e : obj.entries) {
      binio::write_span<double>(out, e.rotation.row_major());
      write_pyramid_body(out, *e.pyramid);
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

ReferenceDB ReferenceDB::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open database '" + path + "'");
  if (!binio::read_magic(in, kDbMagic)) throw Error(ErrorCode::FormatError, "'" + path + "' lacks ORDB magic");
  const auto version = binio::read<std::uint32_t>(in, "version");
  if (version != kDbVersion) {
    throw Error(ErrorCode::VersionError,
                "'" + path + "' has database version " + std::to_string(version) + " (supported versions: 1)");
  }
  ReferenceDB db;
  const auto n_objects = binio::read<std::uint32_t>(in, "object count");
  const auto n_scales = binio::read<std::uint32_t>(in, "scale count");
  db.channels_ = binio::read<std::uint32_t>(in, "channel count");
  if (n_scales == 0 || n_scales > 64) throw Error(ErrorCode::FormatError, "implausible scale count");
  db.dims_.resize(n_scales);
  for (auto& d : db.dims_) {
    d.height = binio::read<std::uint32_t>(in, "scale height");
    d.width = binio::read<std::uint32_t>(in, "scale width");
  }
  try {
    validate_geometry(db.dims_, db.channels_);
  } catch (const Error& e) {
    throw Error(ErrorCode::FormatError, std::string("database header: ") + e.what());
  }
  for (std::uint32_t o = 0; o < n_objects; ++o) {
    ObjectRefs obj;
    const auto label_len = binio::read<std::uint32_t>(in, "label length");
    if (label_len > 4096) throw Error(ErrorCode::FormatError, "implausible label length");
    obj.category.resize(label_len);
    in.read(obj.category.data(), label_len);
    if (in.gcount() != static_cast<std::streamsize>(label_len)) {
      throw Error(ErrorCode::FormatError, "truncated input while reading label");
    }
    const auto n_refs = binio::read<std::uint32_t>(in, "reference count");
    const auto k_ac = binio::read<std::uint32_t>(in, "anchor count");
    if (k_ac == 0 || k_ac > n_refs) throw Error(ErrorCode::FormatError, "anchor count out of range");
    obj.anchor_ids.resize(k_ac);
    binio::read_span<std::uint32_t>(in, obj.anchor_ids, "anchor ids");
    std::set<std::uint32_t> seen;
    for (auto id : obj.anchor_ids) {
      if (id >= n_refs || !seen.insert(id).second) throw Error(ErrorCode::FormatError, "invalid anchor id");
    }
    obj.entries.reserve(n_refs);
    for (std::uint32_t i = 0; i < n_refs; ++i) {
      std::array<double, 9> m{};
      binio::read_span<double>(in, m, "rotation");
      Rotation r;
      try {
        r = Rotation::from_matrix(m);
      } catch (const Error& e) {
        throw Error(ErrorCode::FormatError, std::string("stored rotation: ") + e.what());
      }
      auto pyr = std::make_shared<const FeaturePyramid>(read_pyramid_body(in, db.dims_, db.channels_));
      obj.entries.push_back({r, std::move(pyr), i});
    }
    db.objects_.push_back(std::move(obj));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::FormatError, "trailing bytes after database");
  return db;
}

std::vector<Rotation> read_rotation_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open rotation manifest '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::FormatError, "rotation manifest '" + path + "' is empty");
  if (line.rfind("index", 0) != 0) throw Error(ErrorCode::FormatError, "rotation manifest lacks header row");
  std::vector<std::pair<long, Rotation>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<double> values;
    try {
      while (std::getline(ls, field, ',')) values.push_back(std::stod(field));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::FormatError, path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (values.size() != 10) {
      throw Error(ErrorCode::FormatError, path + ":" + std::to_string(line_no) + ": expected 10 columns");
    }
    std::array<double, 9> m{};
    std::copy(values.begin() + 1, values.end(), m.begin());
    try {
      rows.emplace_back(static_cast<long>(values[0]), Rotation::from_matrix(m));
    } catch (const Error& e) {
      throw Error(ErrorCode::FormatError, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Rotation> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<long>(i)) {
      throw Error(ErrorCode::FormatError, "rotation manifest '" + path + "' indices must be 0..n-1");
    }
    out.push_back(rows[i].second);
  }
  return out;
}

void write_rotation_manifest(const std::vector<Rotation>& rotations, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write rotation manifest '" + path + "'");
  out << "index,r00,r01,r02,r10,r11,r12,r20,r21,r22\n";
  char buf[32];
  for (std::size_t i = 0; i < rotations.size(); ++i) {
    out << i;
    for (double v : rotations[i].row_major()) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

}  // namespace orient
