// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace orient {

inline constexpr std::size_t kImageSize = 128;

/// Interleaved 1- or 3-channel raster in arbitrary intensity units.
struct RawImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> data;  // height * width * channels, row-major
};

/// Single-channel image; pipeline stages expect 128x128.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t height, std::size_t width, double fill = 0.0)
      : height_(height), width_(width), pixels_(height * width, fill) {}
  GrayImage(std::size_t height, std::size_t width, std::vector<double> pixels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double& at(std::size_t row, std::size_t col) { return pixels_[row * width_ + col]; }
  double at(std::size_t row, std::size_t col) const { return pixels_[row * width_ + col]; }
  const std::vector<double>& pixels() const { return pixels_; }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> pixels_;
};

struct NormConfig {
  std::size_t window = 32;
  double sigma_floor = 1e-6;
};

/// Luminance (0.299/0.587/0.114 for RGB) followed by bilinear resampling to
/// 128x128 with pixel-center alignment. Throws EmptyImage.
GrayImage to_gray_resized(const RawImage& raw);

/// Box-window local normalization (p - mu) / max(sigma, floor). The window
/// spans [i - r/2, i - r/2 + r) in each axis, clipped to the image; mean and
/// variance use the in-bounds pixel count. Integral images keep it O(1) per
/// pixel.
GrayImage local_normalize(const GrayImage& img, const NormConfig& cfg = {});

/// Binary PGM (P5) or PPM (P6), 8-bit; intensities divided by 255.
RawImage read_pnm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& img);  // clamps to [0, 1]

}  // namespace orient
