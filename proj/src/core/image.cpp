// SPDX-License-Identifier: Apache-2.0
#include "image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "error.hpp"

namespace orient {

GrayImage::GrayImage(std::size_t height, std::size_t width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (pixels_.size() != height_ * width_) {
    throw Error(ErrorCode::InvalidArgument, "pixel buffer does not match image dimensions");
  }
}

GrayImage to_gray_resized(const RawImage& raw) {
  if (raw.height == 0 || raw.width == 0 || raw.data.empty()) throw Error(ErrorCode::EmptyImage, "image has no pixels");
  if (raw.channels != 1 && raw.channels != 3) {
    throw Error(ErrorCode::InvalidArgument, "expected 1 or 3 channels, got " + std::to_string(raw.channels));
  }
  if (raw.data.size() != raw.height * raw.width * raw.channels) {
    throw Error(ErrorCode::InvalidArgument, "pixel buffer does not match image dimensions");
  }

  std::vector<double> gray(raw.height * raw.width);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double* px = &raw.data[i * raw.channels];
    gray[i] = raw.channels == 1 ? px[0] : 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
  }

  auto source_coord = [](std::size_t dst, std::size_t src_len) {
    const double scale = static_cast<double>(src_len) / static_cast<double>(kImageSize);
    const double s = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(src_len - 1));
  };

  GrayImage out(kImageSize, kImageSize);
  for (std::size_t y = 0; y < kImageSize; ++y) {
    const double sy = source_coord(y, raw.height);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, raw.height - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < kImageSize; ++x) {
      const double sx = source_coord(x, raw.width);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, raw.width - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = fx == 0.0 ? gray[y0 * raw.width + x0]
                                   : (1 - fx) * gray[y0 * raw.width + x0] + fx * gray[y0 * raw.width + x1];
      const double bot = fx == 0.0 ? gray[y1 * raw.width + x0]
                                   : (1 - fx) * gray[y1 * raw.width + x0] + fx * gray[y1 * raw.width + x1];
      out.at(y, x) = fy == 0.0 ? top : (1 - fy) * top + fy * bot;
    }
  }
  return out;
}

GrayImage local_normalize(const GrayImage& img, const NormConfig& cfg) {
  if (cfg.window < 2) throw Error(ErrorCode::InvalidArgument, "normalization window must be >= 2");
  if (!(cfg.sigma_floor > 0)) throw Error(ErrorCode::InvalidArgument, "sigma floor must be positive");
  const std::size_t h = img.height(), w = img.width();
  if (h == 0 || w == 0) throw Error(ErrorCode::EmptyImage, "image has no pixels");

  // Centering before accumulation keeps the variance difference well conditioned.
  double offset = 0.0;
  for (double p : img.pixels()) offset += p;
  offset /= static_cast<double>(h * w);

  const std::size_t stride = w + 1;
  std::vector<double> sum((h + 1) * stride, 0.0), sum_sq((h + 1) * stride, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    double row = 0.0, row_sq = 0.0;
    for (std::size_t x = 0; x < w; ++x) {
      const double v = img.at(y, x) - offset;
      row += v;
      row_sq += v * v;
      sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
      sum_sq[(y + 1) * stride + x + 1] = sum_sq[y * stride + x + 1] + row_sq;
    }
  }
  auto box = [stride](const std::vector<double>& t, std::size_t y0, std::size_t x0, std::size_t y1, std::size_t x1) {
    return t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0];
  };

  const auto half = static_cast<std::ptrdiff_t>(cfg.window / 2);
  const auto r = static_cast<std::ptrdiff_t>(cfg.window);
  auto span = [&](std::size_t i, std::size_t len) {
    const std::ptrdiff_t lo = static_cast<std::ptrdiff_t>(i) - half;
    const std::ptrdiff_t hi = lo + r;
    return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(lo, 0)),
                                               static_cast<std::size_t>(std::min<std::ptrdiff_t>(hi, len)));
  };

  GrayImage out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const auto [y0, y1] = span(y, h);
    for (std::size_t x = 0; x < w; ++x) {
      const auto [x0, x1] = span(x, w);
      const double count = static_cast<double>((y1 - y0) * (x1 - x0));
      const double mean = box(sum, y0, x0, y1, x1) / count;
      const double var = std::max(0.0, box(sum_sq, y0, x0, y1, x1) / count - mean * mean);
      const double sigma = std::max(std::sqrt(var), cfg.sigma_floor);
      out.at(y, x) = (img.at(y, x) - offset - mean) / sigma;
    }
  }
  return out;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

RawImage read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open image '" + path + "'");
  const std::string magic = pnm_token(in);
  std::size_t channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw Error(ErrorCode::FormatError, "'" + path + "' is not a binary PGM/PPM file");
  }
  RawImage img;
  img.channels = channels;
  try {
    img.width = std::stoul(pnm_token(in));
    img.height = std::stoul(pnm_token(in));
    const unsigned long maxval = std::stoul(pnm_token(in));
    if (maxval != 255) throw Error(ErrorCode::FormatError, "only 8-bit PGM/PPM is supported");
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::FormatError, "malformed PGM/PPM header in '" + path + "'");
  }
  if (img.width == 0 || img.height == 0) throw Error(ErrorCode::EmptyImage, "'" + path + "' has no pixels");
  std::vector<unsigned char> bytes(img.width * img.height * channels);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw Error(ErrorCode::FormatError, "truncated pixel data in '" + path + "'");
  }
  img.data.resize(bytes.size());
  std::transform(bytes.begin(), bytes.end(), img.data.begin(), [](unsigned char b) { return b / 255.0; });
  return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (double p : img.pixels()) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0))));
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

}  // namespace orient
