// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "image.hpp"

namespace orient {

struct ScaleDim {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  bool operator==(const ScaleDim&) const = default;
};

/// Multi-scale feature maps of one image. Scale i is an H_i x W_i x C block,
/// row-major with the channel index fastest; all scales share one contiguous
/// float buffer.
class FeaturePyramid {
 public:
  FeaturePyramid() = default;
  /// Zero-filled pyramid. Throws DimensionError on invalid geometry.
  FeaturePyramid(std::vector<ScaleDim> dims, std::uint32_t channels);
  FeaturePyramid(std::vector<ScaleDim> dims, std::uint32_t channels, std::vector<float> data);

  std::size_t num_scales() const { return dims_.size(); }
  std::uint32_t channels() const { return channels_; }
  const std::vector<ScaleDim>& dims() const { return dims_; }
  std::size_t locations(std::size_t scale) const { return std::size_t{dims_[scale].height} * dims_[scale].width; }

  std::span<const float> scale(std::size_t s) const;
  std::span<float> scale(std::size_t s);
  std::span<const float> cell(std::size_t s, std::size_t loc) const {
    return scale(s).subspan(loc * channels_, channels_);
  }
  std::span<float> cell(std::size_t s, std::size_t loc) { return scale(s).subspan(loc * channels_, channels_); }

  const std::vector<float>& data() const { return data_; }
  bool same_shape(const FeaturePyramid& other) const {
    return channels_ == other.channels_ && dims_ == other.dims_;
  }
  bool operator==(const FeaturePyramid& other) const = default;

 private:
  std::vector<ScaleDim> dims_;
  std::uint32_t channels_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<float> data_;
};

/// Throws DimensionError unless S >= 1, C >= 1 and both H and W strictly increase.
void validate_geometry(const std::vector<ScaleDim>& dims, std::uint32_t channels);

struct ExtractorConfig {
  std::vector<ScaleDim> scale_dims{{13, 13}, {26, 26}, {52, 52}};
  std::uint32_t channels = 8;  // unsigned orientation bins over [0, 180)

  void validate() const;  // dims in [2, 128], strictly increasing
  bool operator==(const ExtractorConfig&) const = default;
};

/// Produces a feature pyramid from a 128x128 image.
class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual FeaturePyramid extract(const GrayImage& img) const = 0;
};

/// Magnitude-weighted histograms of unsigned gradient orientation per cell,
/// L2-normalized with a 1e-8 floor.
class GradientHistogramExtractor final : public Extractor {
 public:
  explicit GradientHistogramExtractor(ExtractorConfig cfg = {});
  FeaturePyramid extract(const GrayImage& img) const override;
  const ExtractorConfig& config() const { return cfg_; }

 private:
  ExtractorConfig cfg_;
};

FeaturePyramid extract(const GrayImage& img, const ExtractorConfig& cfg = {});

/// "FPYR" files: magic, u32 version 1, u32 S, u32 C, S x (u32 H, u32 W), then
/// the f32 blocks in scale order.
FeaturePyramid load_pyramid(const std::string& path);
void save_pyramid(const FeaturePyramid& pyramid, const std::string& path);

// Stream-level body helpers reused by the database format.
void write_pyramid_body(std::ostream& out, const FeaturePyramid& pyramid);
FeaturePyramid read_pyramid_body(std::istream& in, const std::vector<ScaleDim>& dims, std::uint32_t channels);

std::string format_scale_dims(const std::vector<ScaleDim>& dims);  // "13x13,26x26"
std::vector<ScaleDim> parse_scale_dims(const std::string& text);

}  // namespace orient
