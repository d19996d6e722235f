// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pyramid.hpp"

namespace orient {

enum class FusionVariant { Adaptive, Average, SigmoidOnly, SoftmaxOnly };

const char* variant_name(FusionVariant v);           // "adaptive", "average", "sigmoid", "softmax"
FusionVariant parse_variant(std::string_view name);  // throws InvalidArgument listing valid names

/// Per-scale local similarity: at each location the channelwise product of the
/// two L2-normalized feature vectors, so the channel sum is their cosine.
struct SimilarityMaps {
  std::vector<ScaleDim> dims;
  std::uint32_t channels = 0;
  std::vector<std::vector<double>> maps;  // maps[s] is H x W x C, channel fastest
};

/// Learnable parameters of the adaptive fusion, kept as one flat vector so the
/// fitter and the gradient checks can treat them uniformly. Layout (also the
/// on-disk order): for each scale the 3x3xC confidence-conv weights and bias,
/// then for each scale the 3x3xC gate-conv weights and bias, then the hidden
/// layer (hidden x S*C weights, hidden biases) and the output layer (hidden
/// weights, one bias). Conv weights are indexed [(ky * 3 + kx) * C + c].
class FusionParams {
 public:
  FusionParams() = default;
  FusionParams(std::size_t scales, std::uint32_t channels, std::size_t hidden = 64);  // all zero

  /// Zero conv parameters and a head whose first hidden unit averages the
  /// aggregated similarities; with these values every learned variant scores
  /// like Average on non-negative features. Other hidden units get small
  /// seeded random input weights and zero output weights.
  static FusionParams average_init(std::size_t scales, std::uint32_t channels, std::size_t hidden, std::uint64_t seed);
  /// Gaussian entries with the given standard deviation (test helper).
  static FusionParams random(std::size_t scales, std::uint32_t channels, std::size_t hidden, std::uint64_t seed,
                             double stddev = 0.3);

  std::size_t scales() const { return scales_; }
  std::uint32_t channels() const { return channels_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t conv_size() const { return 9 * std::size_t{channels_}; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<const double> conf_weights(std::size_t s) const { return block(conf_offset(s), conv_size()); }
  double conf_bias(std::size_t s) const { return values_[conf_offset(s) + conv_size()]; }
  std::span<const double> gate_weights(std::size_t s) const { return block(gate_offset(s), conv_size()); }
  double gate_bias(std::size_t s) const { return values_[gate_offset(s) + conv_size()]; }
  std::span<const double> hidden_weights() const { return block(head_offset(), hidden_ * inputs()); }
  std::span<const double> hidden_bias() const { return block(head_offset() + hidden_ * inputs(), hidden_); }
  std::span<const double> output_weights() const { return block(head_offset() + hidden_ * (inputs() + 1), hidden_); }
  double output_bias() const { return values_.back(); }

  std::size_t conf_offset(std::size_t s) const { return s * (conv_size() + 1); }
  std::size_t gate_offset(std::size_t s) const { return (scales_ + s) * (conv_size() + 1); }
  std::size_t head_offset() const { return 2 * scales_ * (conv_size() + 1); }
  std::size_t inputs() const { return scales_ * channels_; }

  /// Rounds every value to f32, matching what save/load preserves.
  void quantize();
  bool all_finite() const;
  bool operator==(const FusionParams&) const = default;

 private:
  std::span<const double> block(std::size_t offset, std::size_t n) const {
    return std::span<const double>(values_).subspan(offset, n);
  }

  std::size_t scales_ = 0;
  std::uint32_t channels_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> values_;
};

/// Throws ShapeMismatch unless both pyramids share scale dims and channels.
SimilarityMaps similarity_maps(const FeaturePyramid& src, const FeaturePyramid& ref);
void similarity_maps_into(const FeaturePyramid& src, const FeaturePyramid& ref, SimilarityMaps& out);

/// Spatial confidence weights for scale s: non-negative, summing to one.
std::vector<double> confidence_map(const SimilarityMaps& maps, std::size_t s, const FusionParams& params,
                                   FusionVariant variant);

/// Scalar image similarity. Average ignores params (they may be empty).
double fuse(const SimilarityMaps& maps, const FusionParams& params, FusionVariant variant);

/// Gradient of upstream * fuse(maps, params, variant) w.r.t. every entry of
/// params, in the params' flat layout. Inputs are constants. Average has no
/// parameters and yields zeros.
std::vector<double> fuse_backward(const SimilarityMaps& maps, const FusionParams& params, double upstream,
                                  FusionVariant variant = FusionVariant::Adaptive);

/// Adds upstream * d score / d params into grad; returns the forward score.
double fuse_accumulate_gradient(const SimilarityMaps& maps, const FusionParams& params, FusionVariant variant,
                                double upstream, std::span<double> grad);

/// Hidden-layer pre-activations of the score head (empty for Average); the
/// gradient checker uses them to avoid finite differences across relu kinks.
std::vector<double> head_preactivations(const SimilarityMaps& maps, const FusionParams& params, FusionVariant variant);

/// Convenience for retrieval: similarity maps plus fuse, reusing per-thread
/// scratch buffers. The Average variant takes a direct cosine path.
double score_pair(const FeaturePyramid& query, const FeaturePyramid& ref, const FusionParams& params,
                  FusionVariant variant);

/// "FPRM" files: magic, u32 version 1, u32 S, u32 C, u32 hidden, then the f32
/// values in the flat layout above.
FusionParams load_params(const std::string& path);
void save_params(const FusionParams& params, const std::string& path);

}  // namespace orient
