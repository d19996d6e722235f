// SPDX-License-Identifier: Apache-2.0
#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fusion.hpp"
#include "nce.hpp"

namespace orient {
namespace {

constexpr double kFusionStep = 1e-4;
constexpr double kLossStep = 1e-5;

SimilarityMaps random_maps(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<ScaleDim> dims{{3, 4}, {5, 6}, {7, 8}};
  const std::uint32_t channels = 4;
  FeaturePyramid a(dims, channels), b(dims, channels);
  for (auto* p : {&a, &b}) {
    for (std::size_t s = 0; s < dims.size(); ++s) {
      for (float& v : p->scale(s)) v = static_cast<float>(unit(rng) < 0.1 ? 0.0 : unit(rng));
    }
  }
  return similarity_maps(a, b);
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t instances) {
  GradCheckReport report;
  std::mt19937_64 rng(seed);
  const FusionVariant variants[] = {FusionVariant::Adaptive, FusionVariant::SigmoidOnly, FusionVariant::SoftmaxOnly};

  for (std::size_t inst = 0; inst < instances; ++inst) {
    const FusionVariant variant = variants[inst % 3];
    const SimilarityMaps maps = random_maps(rng);
    // Redraw until no hidden unit sits near its relu kink, where central
    // differences are not meaningful.
    FusionParams params;
    for (std::uint64_t attempt = 0;; ++attempt) {
      params = FusionParams::random(maps.maps.size(), maps.channels, 16, rng() + attempt, 0.4);
      const auto pre = head_preactivations(maps, params, variant);
      if (std::all_of(pre.begin(), pre.end(), [](double z) { return std::abs(z) > 1e-2; })) break;
    }
    std::uniform_real_distribution<double> upstream_dist(-2.0, 2.0);
    const double upstream = upstream_dist(rng);
    const auto analytic = fuse_backward(maps, params, upstream, variant);
    auto values = params.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + kFusionStep;
      const double up = fuse(maps, params, variant);
      values[i] = saved - kFusionStep;
      const double down = fuse(maps, params, variant);
      values[i] = saved;
      const double numeric = upstream * (up - down) / (2 * kFusionStep);
      const double err = relative_error(analytic[i], numeric);
      ++report.fusion_checked;
      if (err > report.fusion_max_rel_err) {
        report.fusion_max_rel_err = err;
        report.worst = std::string("fusion/") + variant_name(variant) + " instance " + std::to_string(inst) +
                       " param " + std::to_string(i);
      }
    }
  }

  std::uniform_real_distribution<double> score_dist(-1.0, 1.0);
  std::uniform_real_distribution<double> weight_dist(1e-3, 1.0);
  std::uniform_int_distribution<std::size_t> batch_dist(1, 4);
  for (std::size_t inst = 0; inst < instances; ++inst) {
    Batch batch;
    const std::size_t b = batch_dist(rng);
    batch.anchors.resize(b);
    for (auto& a : batch.anchors) {
      for (std::size_t k = 0; k < 3 * b; ++k) {
        a.scores.push_back(score_dist(rng));
        a.weights.push_back(weight_dist(rng));
      }
    }
    const auto analytic = loss_grad(batch);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t k = 0; k < 3 * b; ++k) {
        double& s = batch.anchors[i].scores[k];
        const double saved = s;
        s = saved + kLossStep;
        const double up = loss(batch);
        s = saved - kLossStep;
        const double down = loss(batch);
        s = saved;
        const double err = relative_error(analytic[i][k], (up - down) / (2 * kLossStep));
        ++report.loss_checked;
        if (err > report.loss_max_rel_err) {
          report.loss_max_rel_err = err;
          if (report.loss_max_rel_err > report.fusion_max_rel_err) {
            report.worst = "loss instance " + std::to_string(inst) + " anchor " + std::to_string(i) + " score " +
                           std::to_string(k);
          }
        }
      }
    }
  }
  return report;
}

}  // namespace orient
