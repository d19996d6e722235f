// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fusion.hpp"
#include "so3.hpp"

namespace orient {

inline constexpr double kDefaultWeightFloor = 1e-3;
inline constexpr double kDefaultTemperature = 0.1;

/// Rotation-aware contrastive weight: geodesic distance (floored) for the
/// same category, 1 otherwise.
double pair_weight(const Rotation& ri, const Rotation& rj, std::uint32_t ci, std::uint32_t cj,
                   double floor = kDefaultWeightFloor);

/// Scores of one anchor against its candidates; index 0 is the positive pair.
struct AnchorScores {
  std::vector<double> scores;
  std::vector<double> weights;  // same length as scores
};

struct Batch {
  std::vector<AnchorScores> anchors;
  double temperature = kDefaultTemperature;
};

/// Mean over anchors of -log(exp(s_0/t) w_0 / sum_k exp(s_k/t) w_k), with the
/// max logit subtracted inside both exponentials.
double loss(const Batch& batch);

/// d loss / d score for every anchor and candidate, shaped like the batch.
std::vector<std::vector<double>> loss_grad(const Batch& batch);

/// One training source with its scored candidates (candidate 0 is the
/// positive). Pyramids are shared with the reference set.
struct TrainCandidate {
  std::shared_ptr<const FeaturePyramid> pyramid;
  Rotation rotation;
  std::uint32_t category = 0;
};

struct TrainSample {
  std::shared_ptr<const FeaturePyramid> source;
  Rotation rotation;
  std::uint32_t category = 0;
  std::vector<TrainCandidate> candidates;
};

struct FitConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  double temperature = kDefaultTemperature;
  double weight_floor = kDefaultWeightFloor;
  bool weighted = true;  // false: plain infoNCE (all weights 1)
  FusionVariant variant = FusionVariant::Adaptive;
};

struct FitResult {
  FusionParams params;
  std::vector<double> loss_history;  // per-epoch mean anchor loss
};

/// Mini-batch gradient descent on the learned fusion parameters. Samples are
/// reshuffled each epoch from the seed; per-sample gradients are summed in
/// sample order so results do not depend on the thread count. Throws
/// NonFiniteLoss if a batch loss or parameter turns non-finite.
FitResult fit_fusion(const std::vector<TrainSample>& train, const FitConfig& cfg, FusionParams init);

/// "epoch,mean_loss" with one row per epoch.
void write_loss_csv(const std::vector<double>& history, const std::string& path);

}  // namespace orient
