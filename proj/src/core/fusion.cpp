// SPDX-License-Identifier: Apache-2.0
#include "fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "binary_io.hpp"
#include "error.hpp"

namespace orient {
namespace {

constexpr double kNormFloor = 1e-8;
constexpr char kParamsMagic[5] = "FPRM";
constexpr std::uint32_t kParamsVersion = 1;

bool uses_conf(FusionVariant v) { return v == FusionVariant::Adaptive || v == FusionVariant::SoftmaxOnly; }
bool uses_gate(FusionVariant v) { return v == FusionVariant::Adaptive || v == FusionVariant::SigmoidOnly; }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

// 3x3 zero-padded convolution of an H x W x C map down to one channel.
void conv3x3(std::span<const double> map, ScaleDim dim, std::uint32_t channels, std::span<const double> weights,
             double bias, std::vector<double>& out) {
  const std::size_t rows = dim.height, cols = dim.width;
  out.assign(rows * cols, bias);
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t x = 0; x < cols; ++x) {
      double acc = bias;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
        if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(rows)) continue;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x + kx) - 1;
          if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(cols)) continue;
          const double* f = &map[(static_cast<std::size_t>(yy) * cols + static_cast<std::size_t>(xx)) * channels];
          const double* k = &weights[(ky * 3 + kx) * channels];
          for (std::uint32_t c = 0; c < channels; ++c) acc += k[c] * f[c];
        }
      }
      out[y * cols + x] = acc;
    }
  }
}

// Adjoint of conv3x3 with respect to weights and bias.
void conv3x3_backward(std::span<const double> map, ScaleDim dim, std::uint32_t channels,
                      const std::vector<double>& dout, std::span<double> dweights, double& dbias) {
  const std::size_t rows = dim.height, cols = dim.width;
  for (std::size_t y = 0; y < rows; ++y) {
    for (std::size_t x = 0; x < cols; ++x) {
      const double g = dout[y * cols + x];
      if (g == 0.0) continue;
      dbias += g;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y + ky) - 1;
        if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(rows)) continue;
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x + kx) - 1;
          if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(cols)) continue;
          const double* f = &map[(static_cast<std::size_t>(yy) * cols + static_cast<std::size_t>(xx)) * channels];
          double* k = &dweights[(ky * 3 + kx) * channels];
          for (std::uint32_t c = 0; c < channels; ++c) k[c] += g * f[c];
        }
      }
    }
  }
}

// Intermediate values of one forward pass, kept for the backward pass.
struct Trace {
  std::vector<std::vector<double>> conf, gate, weights;
  std::vector<double> pooled;  // S * C
  std::vector<double> pre, act;
};

void check_params(const SimilarityMaps& maps, const FusionParams& params, FusionVariant variant) {
  if (variant == FusionVariant::Average) return;
  if (params.scales() != maps.maps.size() || params.channels() != maps.channels) {
    throw Error(ErrorCode::ShapeMismatch, "fusion params (S=" + std::to_string(params.scales()) + ", C=" +
                                              std::to_string(params.channels()) + ") do not match similarity maps (S=" +
                                              std::to_string(maps.maps.size()) + ", C=" +
                                              std::to_string(maps.channels) + ")");
  }
}

void scale_weights(const SimilarityMaps& maps, std::size_t s, const FusionParams& params, FusionVariant variant,
                   std::vector<double>& conf, std::vector<double>& gate, std::vector<double>& w) {
  const std::size_t n = std::size_t{maps.dims[s].height} * maps.dims[s].width;
  if (variant == FusionVariant::Average) {
    w.assign(n, 1.0 / static_cast<double>(n));
    return;
  }
  if (uses_conf(variant)) conv3x3(maps.maps[s], maps.dims[s], maps.channels, params.conf_weights(s),
                                  params.conf_bias(s), conf);
  if (uses_gate(variant)) conv3x3(maps.maps[s], maps.dims[s], maps.channels, params.gate_weights(s),
                                  params.gate_bias(s), gate);
  // Every learned variant is a softmax over a per-location logit:
  // exp(h) * sigmoid(q) -> h + log sigmoid(q), sigmoid(q) -> log sigmoid(q), exp(h) -> h.
  w.resize(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < n; ++p) {
    double logit = 0.0;
    if (uses_conf(variant)) logit += conf[p];
    if (uses_gate(variant)) logit += log_sigmoid(gate[p]);
    w[p] = logit;
    peak = std::max(peak, logit);
  }
  double total = 0.0;
  for (double& v : w) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : w) v /= total;
}

double forward(const SimilarityMaps& maps, const FusionParams& params, FusionVariant variant, Trace& t) {
  check_params(maps, params, variant);
  const std::size_t scales = maps.maps.size();
  const std::uint32_t channels = maps.channels;
  t.conf.resize(scales);
  t.gate.resize(scales);
  t.weights.resize(scales);
  t.pooled.assign(scales * channels, 0.0);
  for (std::size_t s = 0; s < scales; ++s) {
    scale_weights(maps, s, params, variant, t.conf[s], t.gate[s], t.weights[s]);
    const auto& w = t.weights[s];
    const auto& map = maps.maps[s];
    double* pooled = &t.pooled[s * channels];
    for (std::size_t p = 0; p < w.size(); ++p) {
      const double* f = &map[p * channels];
      for (std::uint32_t c = 0; c < channels; ++c) pooled[c] += w[p] * f[c];
    }
  }
  if (variant == FusionVariant::Average) {
    double total = 0.0;
    for (double v : t.pooled) total += v;
    return total / static_cast<double>(scales);
  }

  const std::size_t hidden = params.hidden(), inputs = params.inputs();
  const auto w1 = params.hidden_weights();
  const auto b1 = params.hidden_bias();
  const auto w2 = params.output_weights();
  t.pre.resize(hidden);
  t.act.resize(hidden);
  double score = params.output_bias();
  for (std::size_t h = 0; h < hidden; ++h) {
    double z = b1[h];
    for (std::size_t i = 0; i < inputs; ++i) z += w1[h * inputs + i] * t.pooled[i];
    t.pre[h] = z;
    t.act[h] = std::max(z, 0.0);
    score += w2[h] * t.act[h];
  }
  return score;
}

thread_local Trace tls_trace;
thread_local SimilarityMaps tls_maps;

}  // namespace

const char* variant_name(FusionVariant v) {
  switch (v) {
    case FusionVariant::Adaptive: return "adaptive";
    case FusionVariant::Average: return "average";
    case FusionVariant::SigmoidOnly: return "sigmoid";
    case FusionVariant::SoftmaxOnly: return "softmax";
  }
  return "?";
}

FusionVariant parse_variant(std::string_view name) {
  for (auto v : {FusionVariant::Adaptive, FusionVariant::Average, FusionVariant::SigmoidOnly,
                 FusionVariant::SoftmaxOnly}) {
    if (name == variant_name(v)) return v;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown fusion variant '" + std::string(name) + "' (valid: adaptive, average, sigmoid, softmax)");
}

FusionParams::FusionParams(std::size_t scales, std::uint32_t channels, std::size_t hidden)
    : scales_(scales), channels_(channels), hidden_(hidden) {
  if (scales == 0 || channels == 0 || hidden == 0) {
    throw Error(ErrorCode::InvalidArgument, "fusion params need S, C and hidden width >= 1");
  }
  values_.assign(head_offset() + hidden * (inputs() + 2) + 1, 0.0);
}

FusionParams FusionParams::average_init(std::size_t scales, std::uint32_t channels, std::size_t hidden,
                                        std::uint64_t seed) {
  FusionParams p(scales, channels, hidden);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.05);
  const std::size_t w1 = p.head_offset();
  const std::size_t in = p.inputs();
  for (std::size_t h = 0; h < hidden; ++h) {
    for (std::size_t i = 0; i < in; ++i) {
      p.values_[w1 + h * in + i] = h == 0 ? 1.0 / static_cast<double>(scales) : normal(rng);
    }
  }
  p.values_[w1 + hidden * (in + 1)] = 1.0;  // output weight of unit 0
  return p;
}

FusionParams FusionParams::random(std::size_t scales, std::uint32_t channels, std::size_t hidden,
                                  std::uint64_t seed, double stddev) {
  FusionParams p(scales, channels, hidden);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& v : p.values_) v = normal(rng);
  return p;
}

void FusionParams::quantize() {
  for (double& v : values_) v = static_cast<double>(static_cast<float>(v));
}

bool FusionParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void similarity_maps_into(const FeaturePyramid& src, const FeaturePyramid& ref, SimilarityMaps& out) {
  if (!src.same_shape(ref)) {
    throw Error(ErrorCode::ShapeMismatch, "pyramids differ in shape: " + format_scale_dims(src.dims()) + " x" +
                                              std::to_string(src.channels()) + " vs " +
                                              format_scale_dims(ref.dims()) + " x" + std::to_string(ref.channels()));
  }
  const std::uint32_t channels = src.channels();
  out.dims = src.dims();
  out.channels = channels;
  out.maps.resize(src.num_scales());
  for (std::size_t s = 0; s < src.num_scales(); ++s) {
    const std::size_t n = src.locations(s);
    auto& map = out.maps[s];
    map.resize(n * channels);
    const auto a = src.scale(s);
    const auto b = ref.scale(s);
    for (std::size_t p = 0; p < n; ++p) {
      const float* fa = &a[p * channels];
      const float* fb = &b[p * channels];
      double na = 0.0, nb = 0.0;
      for (std::uint32_t c = 0; c < channels; ++c) {
        na += double{fa[c]} * fa[c];
        nb += double{fb[c]} * fb[c];
      }
      const double inv = 1.0 / (std::max(std::sqrt(na), kNormFloor) * std::max(std::sqrt(nb), kNormFloor));
      for (std::uint32_t c = 0; c < channels; ++c) map[p * channels + c] = double{fa[c]} * fb[c] * inv;
    }
  }
}

SimilarityMaps similarity_maps(const FeaturePyramid& src, const FeaturePyramid& ref) {
  SimilarityMaps out;
  similarity_maps_into(src, ref, out);
  return out;
}

std::vector<double> confidence_map(const SimilarityMaps& maps, std::size_t s, const FusionParams& params,
                                   FusionVariant variant) {
  check_params(maps, params, variant);
  if (s >= maps.maps.size()) throw Error(ErrorCode::InvalidArgument, "scale index out of range");
  std::vector<double> conf, gate, w;
  scale_weights(maps, s, params, variant, conf, gate, w);
  return w;
}

double fuse(const SimilarityMaps& maps, const FusionParams& params, FusionVariant variant) {
  return forward(maps, params, variant, tls_trace);
}

double fuse_accumulate_gradient(const SimilarityMaps& maps, const FusionParams& params, FusionVariant variant,
                                double upstream, std::span<double> grad) {
  Trace& t = tls_trace;
  const double score = forward(maps, params, variant, t);
  if (variant == FusionVariant::Average || upstream == 0.0) return score;
  if (grad.size() != params.values().size()) throw Error(ErrorCode::ShapeMismatch, "gradient buffer size mismatch");

  const std::size_t hidden = params.hidden(), inputs = params.inputs();
  const std::size_t w1_off = params.head_offset();
  const std::size_t b1_off = w1_off + hidden * inputs;
  const std::size_t w2_off = b1_off + hidden;
  const auto w1 = params.hidden_weights();
  const auto w2 = params.output_weights();

  grad[grad.size() - 1] += upstream;
  std::vector<double> d_pooled(inputs, 0.0);
  for (std::size_t h = 0; h < hidden; ++h) {
    grad[w2_off + h] += upstream * t.act[h];
    if (t.pre[h] <= 0.0) continue;  // relu gate; subgradient 0 at the kink
    const double dz = upstream * w2[h];
    grad[b1_off + h] += dz;
    for (std::size_t i = 0; i < inputs; ++i) {
      grad[w1_off + h * inputs + i] += dz * t.pooled[i];
      d_pooled[i] += dz * w1[h * inputs + i];
    }
  }

  const std::uint32_t channels = maps.channels;
  const std::size_t conv = params.conv_size();
  std::vector<double> d_logit, d_gate;
  for (std::size_t s = 0; s < maps.maps.size(); ++s) {
    const auto& w = t.weights[s];
    const auto& map = maps.maps[s];
    const double* dv = &d_pooled[s * channels];
    const std::size_t n = w.size();
    // d score / d w[p], then through the softmax over logits.
    d_logit.resize(n);
    double mean = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      double g = 0.0;
      for (std::uint32_t c = 0; c < channels; ++c) g += dv[c] * map[p * channels + c];
      d_logit[p] = g;
      mean += w[p] * g;
    }
    for (std::size_t p = 0; p < n; ++p) d_logit[p] = w[p] * (d_logit[p] - mean);

    if (uses_conf(variant)) {
      const std::size_t off = params.conf_offset(s);
      conv3x3_backward(map, maps.dims[s], channels, d_logit, grad.subspan(off, conv), grad[off + conv]);
    }
    if (uses_gate(variant)) {
      d_gate.resize(n);
      for (std::size_t p = 0; p < n; ++p) d_gate[p] = d_logit[p] * (1.0 - sigmoid(t.gate[s][p]));
      const std::size_t off = params.gate_offset(s);
      conv3x3_backward(map, maps.dims[s], channels, d_gate, grad.subspan(off, conv), grad[off + conv]);
    }
  }
  return score;
}

std::vector<double> fuse_backward(const SimilarityMaps& maps, const FusionParams& params, double upstream,
                                  FusionVariant variant) {
  std::vector<double> grad(params.values().size(), 0.0);
  fuse_accumulate_gradient(maps, params, variant, upstream, grad);
  return grad;
}

std::vector<double> head_preactivations(const SimilarityMaps& maps, const FusionParams& params,
                                        FusionVariant variant) {
  Trace t;
  forward(maps, params, variant, t);
  return variant == FusionVariant::Average ? std::vector<double>{} : t.pre;
}

double score_pair(const FeaturePyramid& query, const FeaturePyramid& ref, const FusionParams& params,
                  FusionVariant variant) {
  if (variant != FusionVariant::Average) {
    similarity_maps_into(query, ref, tls_maps);
    return forward(tls_maps, params, variant, tls_trace);
  }
  if (!query.same_shape(ref)) throw Error(ErrorCode::ShapeMismatch, "query and reference pyramids differ in shape");
  const std::uint32_t channels = query.channels();
  double total = 0.0;
  for (std::size_t s = 0; s < query.num_scales(); ++s) {
    const std::size_t n = query.locations(s);
    const auto a = query.scale(s);
    const auto b = ref.scale(s);
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const float* fa = &a[p * channels];
      const float* fb = &b[p * channels];
      double na = 0.0, nb = 0.0, dot = 0.0;
      for (std::uint32_t c = 0; c < channels; ++c) {
        na += double{fa[c]} * fa[c];
        nb += double{fb[c]} * fb[c];
        dot += double{fa[c]} * fb[c];
      }
      acc += dot / (std::max(std::sqrt(na), kNormFloor) * std::max(std::sqrt(nb), kNormFloor));
    }
    total += acc / static_cast<double>(n);
  }
  return total / static_cast<double>(query.num_scales());
}

FusionParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open params file '" + path + "'");
  if (!binio::read_magic(in, kParamsMagic)) throw Error(ErrorCode::FormatError, "'" + path + "' lacks FPRM magic");
  const auto version = binio::read<std::uint32_t>(in, "version");
  if (version != kParamsVersion) {
    throw Error(ErrorCode::VersionError,
                "'" + path + "' has params version " + std::to_string(version) + " (supported: 1)");
  }
  const auto scales = binio::read<std::uint32_t>(in, "scale count");
  const auto channels = binio::read<std::uint32_t>(in, "channel count");
  const auto hidden = binio::read<std::uint32_t>(in, "hidden width");
  if (scales == 0 || scales > 64 || channels == 0 || channels > 4096 || hidden == 0 || hidden > 65536) {
    throw Error(ErrorCode::FormatError, "implausible params header in '" + path + "'");
  }
  FusionParams params(scales, channels, hidden);
  std::vector<float> raw(params.values().size());
  binio::read_span<float>(in, raw, "params payload");
  auto values = params.values();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i])) throw Error(ErrorCode::FormatError, "params contain non-finite values");
    values[i] = raw[i];
  }
  return params;
}

void save_params(const FusionParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write params file '" + path + "'");
  binio::write_magic(out, kParamsMagic);
  binio::write<std::uint32_t>(out, kParamsVersion);
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(params.scales()));
  binio::write<std::uint32_t>(out, params.channels());
  binio::write<std::uint32_t>(out, static_cast<std::uint32_t>(params.hidden()));
  std::vector<float> raw(params.values().begin(), params.values().end());
  binio::write_span<float>(out, raw);
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

}  // namespace orient
