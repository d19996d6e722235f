// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "error.hpp"
#include "helpers.hpp"
#include "image.hpp"
#include "pyramid.hpp"

using namespace orient;

namespace {

GrayImage textured_image(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayImage img(kImageSize, kImageSize);
  for (std::size_t y = 0; y < kImageSize; ++y)
    for (std::size_t x = 0; x < kImageSize; ++x) img.at(y, x) = u(rng);
  return local_normalize(img);
}

ErrorCode load_error(const std::string& path) {
  try {
    load_pyramid(path);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("load_pyramid accepted a malformed file");
  return ErrorCode::InvalidArgument;
}

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

TEST_CASE("constant image yields an all-zero pyramid") {
  const FeaturePyramid p = extract(GrayImage(kImageSize, kImageSize, 0.25));
  CHECK(p.num_scales() == 3);
  CHECK(p.channels() == 8);
  for (float v : p.data()) CHECK(v == 0.0f);
}

TEST_CASE("vertical step edge lights up only the cells next to it") {
  GrayImage img(kImageSize, kImageSize, 0.0);
  for (std::size_t y = 0; y < kImageSize; ++y)
    for (std::size_t x = 64; x < kImageSize; ++x) img.at(y, x) = 1.0;
  const FeaturePyramid p = extract(img);

  // Brute-force histogram of one cell at scale 13x13: gradient magnitude only
  // at columns 63 and 64 (central differences of 0.5), orientation 0.
  auto oracle_cell = [&](std::size_t u, std::size_t v) {
    std::vector<double> hist(8, 0.0);
    for (std::size_t y = 128 * u / 13; y < 128 * (u + 1) / 13; ++y)
      for (std::size_t x = 128 * v / 13; x < 128 * (v + 1) / 13; ++x) {
        const double gx = x == 0 ? img.at(y, 1) - img.at(y, 0)
                          : x == 127 ? img.at(y, 127) - img.at(y, 126)
                                     : 0.5 * (img.at(y, x + 1) - img.at(y, x - 1));
        hist[0] += std::abs(gx);  // gy is zero everywhere, so the angle is 0
      }
    double n = 0.0;
    for (double h : hist) n += h * h;
    n = std::max(std::sqrt(n), 1e-8);
    for (double& h : hist) h /= n;
    return hist;
  };

  for (std::size_t u = 0; u < 13; ++u) {
    for (std::size_t v = 0; v < 13; ++v) {
      const auto cell = p.cell(0, u * 13 + v);
      const auto want = oracle_cell(u, v);
      for (std::size_t c = 0; c < 8; ++c) CHECK(cell[c] == doctest::Approx(want[c]).epsilon(1e-6));
      double energy = 0.0;
      for (float c : cell) energy += c * c;
      const std::size_t lo = 128 * v / 13, hi = 128 * (v + 1) / 13;
      const bool adjacent = lo <= 64 && hi >= 64;
      CHECK((energy > 0.0) == adjacent);
      if (adjacent) CHECK(std::max_element(cell.begin(), cell.end()) == cell.begin());
    }
  }
}

TEST_CASE("extract is deterministic and cell norms are 0 or 1") {
  const GrayImage img = textured_image(1);
  const FeaturePyramid a = extract(img);
  const FeaturePyramid b = extract(img);
  CHECK(a.data() == b.data());
  for (std::size_t s = 0; s < a.num_scales(); ++s) {
    for (std::size_t loc = 0; loc < a.locations(s); ++loc) {
      double n = 0.0;
      for (float v : a.cell(s, loc)) n += double(v) * v;
      n = std::sqrt(n);
      CHECK((n == 0.0 || std::abs(n - 1.0) <= 1e-5));
    }
  }
}

TEST_CASE("shifting by one cell width shifts the 13x13 map by one column") {
  // Cells span [floor(128 v / 13), floor(128 (v + 1) / 13)), so widths are 9
  // or 10. A 10-pixel shift moves cell v exactly onto cell v + 1 wherever both
  // neighbouring boundaries advance by 10; those are the compared columns.
  const GrayImage img = textured_image(2);
  GrayImage shifted(kImageSize, kImageSize, 0.0);
  for (std::size_t y = 0; y < kImageSize; ++y)
    for (std::size_t x = 10; x < kImageSize; ++x) shifted.at(y, x) = img.at(y, x - 10);
  const FeaturePyramid a = extract(img), b = extract(shifted);

  auto bound = [](std::size_t v) { return 128 * v / 13; };
  std::size_t compared = 0;
  for (std::size_t v = 1; v + 2 < 13; ++v) {
    if (bound(v + 1) != bound(v) + 10 || bound(v + 2) != bound(v + 1) + 10) continue;
    ++compared;
    for (std::size_t u = 0; u < 13; ++u) {
      const auto ca = a.cell(0, u * 13 + v), cb = b.cell(0, u * 13 + v + 1);
      for (std::size_t c = 0; c < 8; ++c) CHECK(std::abs(ca[c] - cb[c]) <= 1e-5);
    }
  }
  CHECK(compared == 8);
}

TEST_CASE("pyramid file round trip") {
  testutil::TempDir dir("fpyr");
  const FeaturePyramid p = extract(textured_image(3));
  save_pyramid(p, dir.file("p.fpyr"));
  const FeaturePyramid q = load_pyramid(dir.file("p.fpyr"));
  CHECK(q == p);
  CHECK(testutil::read_bytes(dir.file("p.fpyr")).size() == 4 + 12 + 3 * 8 + p.data().size() * 4);
}

TEST_CASE("pyramid file errors") {
  testutil::TempDir dir("fpyr_bad");
  const FeaturePyramid p = extract(textured_image(4));
  save_pyramid(p, dir.file("p.fpyr"));
  const auto bytes = testutil::read_bytes(dir.file("p.fpyr"));

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  testutil::write_bytes(dir.file("magic.fpyr"), bad_magic);
  CHECK(load_error(dir.file("magic.fpyr")) == ErrorCode::FormatError);

  auto bad_version = bytes;
  bad_version[4] = 2;
  testutil::write_bytes(dir.file("version.fpyr"), bad_version);
  CHECK(load_error(dir.file("version.fpyr")) == ErrorCode::FormatError);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  testutil::write_bytes(dir.file("short.fpyr"), truncated);
  CHECK(load_error(dir.file("short.fpyr")) == ErrorCode::FormatError);

  {
    std::ofstream out(dir.file("order.fpyr"), std::ios::binary);
    out.write("FPYR", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, 2);
    put<std::uint32_t>(out, 8);
    for (std::uint32_t d : {26u, 26u, 13u, 13u}) put(out, d);
    for (std::size_t i = 0; i < (26 * 26 + 13 * 13) * 8; ++i) put(out, 0.0f);
  }
  CHECK(load_error(dir.file("order.fpyr")) == ErrorCode::DimensionError);
  CHECK(load_error(dir.file("absent.fpyr")) == ErrorCode::IoError);
}

TEST_CASE("extractor config validation") {
  CHECK_THROWS_AS(ExtractorConfig({{{13, 13}, {13, 13}}, 8}).validate(), Error);
  CHECK_THROWS_AS(ExtractorConfig({{{1, 1}}, 8}).validate(), Error);
  CHECK_THROWS_AS(ExtractorConfig({{{13, 13}, {200, 200}}, 8}).validate(), Error);
  CHECK_NOTHROW(ExtractorConfig{}.validate());
  CHECK(parse_scale_dims("13x13,26x26,52x52") == ExtractorConfig{}.scale_dims);
  CHECK(format_scale_dims(ExtractorConfig{}.scale_dims) == "13x13,26x26,52x52");
}
