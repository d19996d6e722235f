// SPDX-License-Identifier: Apache-2.0
#include "nce.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "error.hpp"
#include "parallel.hpp"

namespace orient {
namespace {

void check_anchor(const AnchorScores& a) {
  if (a.scores.empty() || a.scores.size() != a.weights.size()) {
    throw Error(ErrorCode::InvalidArgument, "anchor needs matching, non-empty score and weight lists");
  }
}

// Per-anchor loss and, when probs is given, the softmax-with-weights
// probabilities p_k = exp(s_k/t) w_k / sum.
double anchor_loss(const AnchorScores& a, double temperature, std::vector<double>* probs) {
  check_anchor(a);
  double peak = -std::numeric_limits<double>::infinity();
  for (double s : a.scores) peak = std::max(peak, s / temperature);
  double denom = 0.0;
  for (std::size_t k = 0; k < a.scores.size(); ++k) denom += std::exp(a.scores[k] / temperature - peak) * a.weights[k];
  if (probs) {
    probs->resize(a.scores.size());
    for (std::size_t k = 0; k < a.scores.size(); ++k) {
      (*probs)[k] = std::exp(a.scores[k] / temperature - peak) * a.weights[k] / denom;
    }
  }
  return -(a.scores[0] / temperature - peak + std::log(a.weights[0])) + std::log(denom);
}

}  // namespace

double pair_weight(const Rotation& ri, const Rotation& rj, std::uint32_t ci, std::uint32_t cj, double floor) {
  if (ci != cj) return 1.0;
  return std::max(geodesic_distance(ri, rj), floor);
}

double loss(const Batch& batch) {
  if (batch.anchors.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  if (!(batch.temperature > 0)) throw Error(ErrorCode::InvalidArgument, "temperature must be positive");
  double total = 0.0;
  for (const auto& a : batch.anchors) total += anchor_loss(a, batch.temperature, nullptr);
  return total / static_cast<double>(batch.anchors.size());
}

std::vector<std::vector<double>> loss_grad(const Batch& batch) {
  if (batch.anchors.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  if (!(batch.temperature > 0)) throw Error(ErrorCode::InvalidArgument, "temperature must be positive");
  const double scale = 1.0 / (batch.temperature * static_cast<double>(batch.anchors.size()));
  std::vector<std::vector<double>> grad;
  grad.reserve(batch.anchors.size());
  std::vector<double> probs;
  for (const auto& a : batch.anchors) {
    anchor_loss(a, batch.temperature, &probs);
    std::vector<double> g(probs.size());
    for (std::size_t k = 0; k < probs.size(); ++k) g[k] = scale * (probs[k] - (k == 0 ? 1.0 : 0.0));
    grad.push_back(std::move(g));
  }
  return grad;
}

FitResult fit_fusion(const std::vector<TrainSample>& train, const FitConfig& cfg, FusionParams init) {
  if (train.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");
  if (!(cfg.learning_rate >= 0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be non-negative");
  if (cfg.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  if (cfg.variant == FusionVariant::Average) {
    throw Error(ErrorCode::InvalidArgument, "the average variant has no parameters to fit");
  }

  // Similarity maps and weights do not depend on the parameters; build them once.
  struct Prepared {
    std::vector<SimilarityMaps> maps;
    std::vector<double> weights;
  };
  std::vector<Prepared> prepared(train.size());
  parallel_for(train.size(), [&](std::size_t i) {
    const auto& sample = train[i];
    if (sample.candidates.empty()) throw Error(ErrorCode::InvalidArgument, "training sample has no candidates");
    auto& p = prepared[i];
    for (const auto& cand : sample.candidates) {
      p.maps.push_back(similarity_maps(*sample.source, *cand.pyramid));
      p.weights.push_back(cfg.weighted ? pair_weight(sample.rotation, cand.rotation, sample.category, cand.category,
                                                     cfg.weight_floor)
                                       : 1.0);
    }
  });

  FitResult result{std::move(init), {}};
  FusionParams& params = result.params;
  const std::size_t n_params = params.values().size();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::vector<double>> sample_grad;
  std::vector<double> sample_loss;
  std::vector<double> epoch_losses(train.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      sample_grad.assign(count, std::vector<double>(n_params, 0.0));
      sample_loss.assign(count, 0.0);
      parallel_for(count, [&](std::size_t b) {
        const Prepared& p = prepared[order[start + b]];
        AnchorScores anchor;
        anchor.weights = p.weights;
        anchor.scores.reserve(p.maps.size());
        for (const auto& m : p.maps) anchor.scores.push_back(fuse(m, params, cfg.variant));
        Batch single{{anchor}, cfg.temperature};
        sample_loss[b] = loss(single);
        // The batch loss is the mean over anchors, hence the 1/count factor.
        const auto dscore = loss_grad(single)[0];
        for (std::size_t k = 0; k < p.maps.size(); ++k) {
          fuse_accumulate_gradient(p.maps[k], params, cfg.variant, dscore[k] / static_cast<double>(count),
                                   sample_grad[b]);
        }
      });
      double batch_loss = 0.0;
      for (double l : sample_loss) batch_loss += l;
      batch_loss /= static_cast<double>(count);
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch) +
                                                  ", batch starting at " + std::to_string(start));
      }
      for (std::size_t b = 0; b < count; ++b) epoch_losses[order[start + b]] = sample_loss[b];
      auto values = params.values();
      for (const auto& g : sample_grad) {
        for (std::size_t i = 0; i < n_params; ++i) values[i] -= cfg.learning_rate * g[i];
      }
      if (!params.all_finite()) {
        throw Error(ErrorCode::NonFiniteLoss, "parameters became non-finite at epoch " + std::to_string(epoch));
      }
    }
    // Summed in sample order so the epoch mean does not depend on the shuffle.
    double epoch_loss = 0.0;
    for (double l : epoch_losses) epoch_loss += l;
    result.loss_history.push_back(epoch_loss / static_cast<double>(train.size()));
  }
  return result;
}

void write_loss_csv(const std::vector<double>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write loss history '" + path + "'");
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, history[e]);
    out << buf;
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

}  // namespace orient
