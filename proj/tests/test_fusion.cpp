// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "error.hpp"
#include "fusion.hpp"
#include "helpers.hpp"

using namespace orient;

namespace {

const std::vector<ScaleDim> kSmallDims{{3, 3}, {5, 5}};
constexpr std::uint32_t kSmallC = 4;
constexpr FusionVariant kLearned[] = {FusionVariant::Adaptive, FusionVariant::SigmoidOnly, FusionVariant::SoftmaxOnly};
constexpr FusionVariant kAll[] = {FusionVariant::Adaptive, FusionVariant::Average, FusionVariant::SigmoidOnly,
                                  FusionVariant::SoftmaxOnly};

FeaturePyramid random_pyramid(std::uint64_t seed, std::vector<ScaleDim> dims = kSmallDims,
                              std::uint32_t channels = kSmallC, bool nonnegative = false) {
  FeaturePyramid p(std::move(dims), channels);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n01;
  std::vector<float> data(p.data().size());
  for (float& v : data) v = nonnegative ? std::abs(n01(rng)) : n01(rng);
  return FeaturePyramid(p.dims(), channels, std::move(data));
}

FeaturePyramid filled(std::vector<ScaleDim> dims, std::uint32_t channels,
                      const std::function<std::vector<float>(std::size_t, std::size_t)>& cell) {
  FeaturePyramid p(dims, channels);
  std::vector<float> data;
  for (std::size_t s = 0; s < dims.size(); ++s)
    for (std::size_t loc = 0; loc < p.locations(s); ++loc) {
      const auto v = cell(s, loc);
      data.insert(data.end(), v.begin(), v.end());
    }
  return FeaturePyramid(std::move(dims), channels, std::move(data));
}

std::vector<float> unit(std::uint32_t channels, std::size_t k, float value = 1.0f) {
  std::vector<float> v(channels, 0.0f);
  v[k] = value;
  return v;
}

double channel_sum(const SimilarityMaps& m, std::size_t s, std::size_t loc) {
  double sum = 0.0;
  for (std::uint32_t c = 0; c < m.channels; ++c) sum += m.maps[s][loc * m.channels + c];
  return sum;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace

TEST_CASE("similarity maps examples") {
  const FeaturePyramid p = random_pyramid(1);
  const SimilarityMaps self = similarity_maps(p, p);
  for (std::size_t s = 0; s < self.maps.size(); ++s)
    for (std::size_t loc = 0; loc < p.locations(s); ++loc) CHECK(channel_sum(self, s, loc) == doctest::Approx(1.0));

  const std::vector<ScaleDim> one{{2, 2}};
  const auto a = filled(one, 4, [](std::size_t, std::size_t) { return unit(4, 0); });
  const auto b = filled(one, 4, [](std::size_t, std::size_t) { return unit(4, 1); });
  const auto c = filled(one, 4, [](std::size_t, std::size_t) { return std::vector<float>{1, 1, 0, 0}; });
  CHECK(channel_sum(similarity_maps(a, b), 0, 0) == 0.0);
  CHECK(channel_sum(similarity_maps(a, c), 0, 3) == doctest::Approx(1.0 / std::sqrt(2.0)));

  const auto zero = filled(one, 4, [](std::size_t, std::size_t) { return std::vector<float>(4, 0.0f); });
  const SimilarityMaps with_zero = similarity_maps(a, zero);
  for (double v : with_zero.maps[0]) CHECK(v == 0.0);

  const FeaturePyramid other = random_pyramid(2, {{3, 3}}, kSmallC);
  try {
    similarity_maps(p, other);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("similarity channel sums stay within [-1, 1]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = similarity_maps(random_pyramid(seed), random_pyramid(seed + 100));
    for (std::size_t s = 0; s < m.maps.size(); ++s)
      for (std::size_t loc = 0; loc < m.maps[s].size() / m.channels; ++loc) {
        const double v = channel_sum(m, s, loc);
        CHECK((v >= -1 - 1e-5 && v <= 1 + 1e-5));
      }
  }
}

TEST_CASE("confidence map examples") {
  const std::vector<ScaleDim> dims{{13, 13}};
  const FeaturePyramid a = random_pyramid(3, dims, 8), b = random_pyramid(4, dims, 8);
  const SimilarityMaps m = similarity_maps(a, b);
  for (double w : confidence_map(m, 0, FusionParams(), FusionVariant::Average)) CHECK(w == doctest::Approx(1.0 / 169));
  const FusionParams zero(1, 8, 16);
  for (double w : confidence_map(m, 0, zero, FusionVariant::Adaptive)) CHECK(w == doctest::Approx(1.0 / 169));
}

TEST_CASE("confidence maps are non-negative and sum to one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = similarity_maps(random_pyramid(seed), random_pyramid(seed + 50));
    const auto params = FusionParams::random(2, kSmallC, 8, seed, 2.0);
    for (auto variant : kAll) {
      for (std::size_t s = 0; s < 2; ++s) {
        const auto w = confidence_map(m, s, params, variant);
        CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(*std::min_element(w.begin(), w.end()) >= 0.0);
      }
    }
  }
}

TEST_CASE("fuse examples") {
  const FeaturePyramid p = random_pyramid(5);
  CHECK(fuse(similarity_maps(p, p), FusionParams(), FusionVariant::Average) == doctest::Approx(1.0).epsilon(1e-5));

  const auto a = filled(kSmallDims, kSmallC, [](std::size_t, std::size_t loc) { return unit(kSmallC, loc % 2); });
  const auto b = filled(kSmallDims, kSmallC, [](std::size_t, std::size_t loc) { return unit(kSmallC, 1 - loc % 2); });
  CHECK(std::abs(fuse(similarity_maps(a, b), FusionParams(), FusionVariant::Average)) < 1e-5);

  const auto params = FusionParams::random(2, kSmallC, 8, 9);
  const auto m = similarity_maps(p, random_pyramid(6));
  for (auto variant : kLearned) CHECK(fuse(m, params, variant) == fuse(m, params, variant));
  CHECK(score_pair(p, random_pyramid(6), params, FusionVariant::Adaptive) == fuse(m, params, FusionVariant::Adaptive));
  CHECK(score_pair(p, random_pyramid(6), params, FusionVariant::Average) ==
        doctest::Approx(fuse(m, params, FusionVariant::Average)).epsilon(1e-12));
}

TEST_CASE("average fusion ignores the order of locations") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    SimilarityMaps m = similarity_maps(random_pyramid(10 + t), random_pyramid(40 + t));
    const double before = fuse(m, FusionParams(), FusionVariant::Average);
    for (std::size_t s = 0; s < m.maps.size(); ++s) {
      std::vector<std::size_t> order(m.maps[s].size() / m.channels);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<double> shuffled;
      for (auto loc : order)
        shuffled.insert(shuffled.end(), m.maps[s].begin() + loc * m.channels,
                        m.maps[s].begin() + (loc + 1) * m.channels);
      m.maps[s] = shuffled;
    }
    CHECK(fuse(m, FusionParams(), FusionVariant::Average) == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("average_init makes learned variants score like average") {
  const auto params = FusionParams::average_init(2, kSmallC, 16, 3);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto m = similarity_maps(random_pyramid(seed, kSmallDims, kSmallC, true),
                                   random_pyramid(seed + 9, kSmallDims, kSmallC, true));
    const double avg = fuse(m, params, FusionVariant::Average);
    for (auto variant : kLearned) CHECK(fuse(m, params, variant) == doctest::Approx(avg).epsilon(1e-12));
  }
}

TEST_CASE("fuse_backward trivial cases") {
  const auto m = similarity_maps(random_pyramid(11), random_pyramid(12));
  auto params = FusionParams::random(2, kSmallC, 8, 4);
  for (double g : fuse_backward(m, params, 0.0)) CHECK(g == 0.0);

  const std::size_t out_w = params.head_offset() + params.hidden() * (params.inputs() + 1);
  for (std::size_t i = 0; i < params.hidden(); ++i) params.values()[out_w + i] = 0.0;
  const auto grad = fuse_backward(m, params, 1.0);
  for (std::size_t i = params.head_offset(); i < out_w; ++i) CHECK(grad[i] == 0.0);
  CHECK(grad.back() == 1.0);  // output bias
}

TEST_CASE("fuse_backward matches central finite differences") {
  const double h = 1e-4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = similarity_maps(random_pyramid(200 + seed), random_pyramid(300 + seed));
    for (auto variant : kLearned) {
      FusionParams params = FusionParams::random(2, kSmallC, 8, seed);
      // Relu kinks break finite differences; perturb the hidden bias away from them.
      const auto pre = head_preactivations(m, params, variant);
      const std::size_t b1 = params.head_offset() + params.hidden() * params.inputs();
      for (std::size_t k = 0; k < pre.size(); ++k)
        if (std::abs(pre[k]) < 1e-2) params.values()[b1 + k] += pre[k] >= 0 ? 0.05 : -0.05;

      const double upstream = 0.7;
      const auto grad = fuse_backward(m, params, upstream, variant);
      double worst = 0.0;
      for (std::size_t i = 0; i < params.values().size(); ++i) {
        FusionParams plus = params, minus = params;
        plus.values()[i] += h;
        minus.values()[i] -= h;
        const double numeric = upstream * (fuse(m, plus, variant) - fuse(m, minus, variant)) / (2 * h);
        if (std::abs(numeric) < 1e-8 && std::abs(grad[i]) < 1e-8) continue;
        worst = std::max(worst, rel_err(grad[i], numeric));
      }
      CAPTURE(seed);
      CAPTURE(variant_name(variant));
      CHECK(worst < 1e-3);
    }
  }
}

TEST_CASE("confidence weighting can suppress adversarial locations") {
  // True match: cosine 1 except a quarter of cells at cosine -1. Distractor:
  // cosine 0.6 everywhere. Averaging prefers the distractor; a confidence conv
  // that favours high local similarity recovers the true match.
  const std::vector<ScaleDim> dims{{4, 4}, {8, 8}};
  const std::uint32_t c = 4;
  const auto query = filled(dims, c, [&](std::size_t, std::size_t) { return unit(c, 0); });
  const auto truth = filled(dims, c, [&](std::size_t s, std::size_t loc) {
    const std::size_t n = dims[s].height * dims[s].width;
    return unit(c, 0, loc < n / 4 ? -1.0f : 1.0f);
  });
  const auto distractor = filled(dims, c, [&](std::size_t, std::size_t) { return std::vector<float>{0.6f, 0.8f, 0, 0}; });
  const auto mt = similarity_maps(query, truth), md = similarity_maps(query, distractor);

  CHECK(fuse(mt, FusionParams(), FusionVariant::Average) < fuse(md, FusionParams(), FusionVariant::Average));

  FusionParams params = FusionParams::average_init(2, c, 8, 1);
  for (std::size_t s = 0; s < 2; ++s) params.values()[params.conf_offset(s) + 4 * c + 0] = 20.0;  // centre tap
  CHECK(fuse(mt, params, FusionVariant::Adaptive) > fuse(md, params, FusionVariant::Adaptive));
}

TEST_CASE("variant names") {
  for (auto v : kAll) CHECK(parse_variant(variant_name(v)) == v);
  try {
    parse_variant("median");
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
    CHECK(std::string(e.what()).find("adaptive") != std::string::npos);
  }
}

TEST_CASE("params file round trip and errors") {
  testutil::TempDir dir("fprm");
  FusionParams params = FusionParams::random(3, 8, 64, 2);
  params.quantize();
  save_params(params, dir.file("p.fprm"));
  CHECK(load_params(dir.file("p.fprm")) == params);
  const auto bytes = testutil::read_bytes(dir.file("p.fprm"));
  CHECK(bytes.size() == 20 + params.values().size() * 4);

  auto code_of = [&](std::vector<char> b) {
    testutil::write_bytes(dir.file("bad.fprm"), b);
    try {
      load_params(dir.file("bad.fprm"));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  auto magic = bytes;
  magic[1] = 'Q';
  CHECK(code_of(magic) == ErrorCode::FormatError);
  auto version = bytes;
  version[4] = 99;
  CHECK(code_of(version) == ErrorCode::VersionError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 1);
  CHECK(code_of(truncated) == ErrorCode::FormatError);
}
