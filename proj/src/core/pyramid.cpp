// SPDX-License-Identifier: Apache-2.0
#include "pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"

namespace orient {
namespace {

constexpr char kPyramidMagic[5] = "FPYR";
constexpr std::uint32_t kPyramidVersion = 1;
constexpr double kCellNormFloor = 1e-8;

}  // namespace

void validate_geometry(const std::vector<ScaleDim>& dims, std::uint32_t channels) {
  if (dims.empty()) throw Error(ErrorCode::DimensionError, "pyramid needs at least one scale");
  if (channels == 0) throw Error(ErrorCode::DimensionError, "pyramid needs at least one channel");
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i].height == 0 || dims[i].width == 0) throw Error(ErrorCode::DimensionError, "empty scale");
    if (i > 0 && (dims[i].height <= dims[i - 1].height || dims[i].width <= dims[i - 1].width)) {
      throw Error(ErrorCode::DimensionError, "scale dims must strictly increase, got " + format_scale_dims(dims));
    }
  }
}

FeaturePyramid::FeaturePyramid(std::vector<ScaleDim> dims, std::uint32_t channels)
    : dims_(std::move(dims)), channels_(channels) {
  validate_geometry(dims_, channels_);
  std::size_t total = 0;
  for (const auto& d : dims_) {
    offsets_.push_back(total);
    total += std::size_t{d.height} * d.width * channels_;
  }
  offsets_.push_back(total);
  data_.assign(total, 0.0f);
}

FeaturePyramid::FeaturePyramid(std::vector<ScaleDim> dims, std::uint32_t channels, std::vector<float> data)
    : FeaturePyramid(std::move(dims), channels) {
  if (data.size() != data_.size()) {
    throw Error(ErrorCode::DimensionError, "pyramid payload has " + std::to_string(data.size()) + " values, expected " +
                                               std::to_string(data_.size()));
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::FormatError, "pyramid contains non-finite values");
  }
  data_ = std::move(data);
}

std::span<const float> FeaturePyramid::scale(std::size_t s) const {
  return std::span<const float>(data_).subspan(offsets_[s], offsets_[s + 1] - offsets_[s]);
}

std::span<float> FeaturePyramid::scale(std::size_t s) {
  return std::span<float>(data_).subspan(offsets_[s], offsets_[s + 1] - offsets_[s]);
}

void ExtractorConfig::validate() const {
  validate_geometry(scale_dims, channels);
  for (const auto& d : scale_dims) {
    if (d.height < 2 || d.width < 2 || d.height > kImageSize || d.width > kImageSize) {
      throw Error(ErrorCode::DimensionError, "scale dims must lie in [2, 128], got " + format_scale_dims(scale_dims));
    }
  }
}

GradientHistogramExtractor::GradientHistogramExtractor(ExtractorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

FeaturePyramid GradientHistogramExtractor::extract(const GrayImage& img) const {
  const std::size_t h = img.height(), w = img.width();
  if (h < 2 || w < 2) throw Error(ErrorCode::EmptyImage, "image too small for gradients");
  const std::uint32_t bins = cfg_.channels;

  // Per-pixel magnitude and hard orientation bin; central differences inside,
  // one-sided at the border.
  std::vector<double> magnitude(h * w);
  std::vector<std::uint32_t> bin(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double gx, gy;
      if (x == 0) {
        gx = img.at(y, 1) - img.at(y, 0);
      } else if (x == w - 1) {
        gx = img.at(y, x) - img.at(y, x - 1);
      } else {
        gx = 0.5 * (img.at(y, x + 1) - img.at(y, x - 1));
      }
      if (y == 0) {
        gy = img.at(1, x) - img.at(0, x);
      } else if (y == h - 1) {
        gy = img.at(y, x) - img.at(y - 1, x);
      } else {
        gy = 0.5 * (img.at(y + 1, x) - img.at(y - 1, x));
      }
      double theta = std::atan2(gy, gx);
      if (theta < 0) theta += std::numbers::pi;
      if (theta >= std::numbers::pi) theta -= std::numbers::pi;
      const auto b = static_cast<std::uint32_t>(theta / (std::numbers::pi / bins));
      magnitude[y * w + x] = std::hypot(gx, gy);
      bin[y * w + x] = std::min(b, bins - 1);
    }
  }

  FeaturePyramid out(cfg_.scale_dims, bins);
  std::vector<double> hist(bins);
  for (std::size_t s = 0; s < cfg_.scale_dims.size(); ++s) {
    const std::size_t rows = cfg_.scale_dims[s].height, cols = cfg_.scale_dims[s].width;
    for (std::size_t u = 0; u < rows; ++u) {
      const std::size_t y0 = h * u / rows, y1 = h * (u + 1) / rows;
      for (std::size_t v = 0; v < cols; ++v) {
        const std::size_t x0 = w * v / cols, x1 = w * (v + 1) / cols;
        std::fill(hist.begin(), hist.end(), 0.0);
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t x = x0; x < x1; ++x) hist[bin[y * w + x]] += magnitude[y * w + x];
        }
        double norm = 0.0;
        for (double c : hist) norm += c * c;
        norm = std::max(std::sqrt(norm), kCellNormFloor);
        auto cell = out.cell(s, u * cols + v);
        for (std::uint32_t c = 0; c < bins; ++c) cell[c] = static_cast<float>(hist[c] / norm);
      }
    }
  }
  return out;
}

FeaturePyramid extract(const GrayImage& img, const ExtractorConfig& cfg) {
  return GradientHistogramExtractor(cfg).extract(img);
}

void write_pyramid_body(std::ostream& out, const FeaturePyramid& pyramid) {
  binio::write_span<float>(out, pyramid.data());
}

FeaturePyramid read_pyramid_body(std::istream& in, const std::vector<ScaleDim>& dims, std::uint32_t channels) {
  FeaturePyramid shape(dims, channels);
  std::vector<float> data(shape.data().size());
  binio::read_span<float>(in, data, "pyramid payload");
  return FeaturePyramid(dims, channels, std::move(data));
}

FeaturePyramid load_pyramid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open pyramid file '" + path + "'");
  if (!binio::read_magic(in, kPyramidMagic)) throw Error(ErrorCode::FormatError, "'" + path + "' lacks FPYR magic");
  const auto version = binio::read<std::uint32_t>(in, "version");
  if (version != kPyramidVersion) {
    throw Error(ErrorCode::FormatError, "'" + path + "' has pyramid version " + std::to_string(version) +
                                            " (supported: 1)");
  }
  const auto scales = binio::read<std::uint32_t>(in, "scale count");
  const auto channels = binio::read<std::uint32_t>(in, "channel count");
  if (scales == 0 || scales > 64) throw Error(ErrorCode::DimensionError, "implausible scale count");
  std::vector<ScaleDim> dims(scales);
  for (auto& d : dims) {
    d.height = binio::read<std::uint32_t>(in, "scale height");
    d.width = binio::read<std::uint32_t>(in, "scale width");
    if (std::uint64_t{d.height} * d.width * channels > (std::uint64_t{1} << 31)) {
      throw Error(ErrorCode::DimensionError, "implausible scale size");
    }
  }
  validate_geometry(dims, channels);
  return read_pyramid_body(in, dims, channels);
}

void save_pyramid(const FeaturePyramid& pyramid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write pyramid file '" + path + "'");
  binio::write_magic(out, kPyramidMagic);
  binio::write<std::uint32_t>(out, kPyramidVersion);
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(pyramid.num_scales()));
  binio::write<std::uint32_t>(out, pyramid.channels());
  for (const auto& d : pyramid.dims()) {
    binio::write<std::uint32_t>(out, d.height);
    binio::write<std::uint32_t>(out, d.width);
  }
  write_pyramid_body(out, pyramid);
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

std::string format_scale_dims(const std::vector<ScaleDim>& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i].height << 'x' << dims[i].width;
  return os.str();
}

std::vector<ScaleDim> parse_scale_dims(const std::string& text) {
  std::vector<ScaleDim> dims;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto x = item.find('x');
    try {
      if (x == std::string::npos) {
        const auto n = static_cast<std::uint32_t>(std::stoul(item));
        dims.push_back({n, n});
      } else {
        dims.push_back({static_cast<std::uint32_t>(std::stoul(item.substr(0, x))),
                        static_cast<std::uint32_t>(std::stoul(item.substr(x + 1)))});
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::InvalidArgument, "cannot parse scale dims '" + text + "' (expected e.g. 13x13,26x26)");
    }
  }
  if (dims.empty()) throw Error(ErrorCode::InvalidArgument, "no scale dims given");
  return dims;
}

}  // namespace orient
