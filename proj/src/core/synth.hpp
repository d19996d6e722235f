// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "image.hpp"
#include "nce.hpp"
#include "pyramid.hpp"
#include "refdb.hpp"

namespace orient {

/// Parameters of a procedurally generated retrieval task. Each object is a
/// shaded cluster of ellipsoids carrying a smooth random texture; a reference or query is the object
/// rendered orthographically under a rotation, locally normalized and passed
/// through the gradient-histogram extractor, so features vary smoothly with
/// rotation.
struct SynthTask {
  std::uint64_t seed = 1;
  std::size_t objects = 4;
  std::size_t refs = 2000;
  std::size_t queries = 200;
  /// Noise level in [0, 1]: queries are rendered at a rotation perturbed by up
  /// to noise * max_rotation_noise_deg and get Gaussian feature noise with
  /// standard deviation noise * max_feature_noise.
  double noise = 0.0;
  double outlier_fraction = 0.0;  // per-scale fraction of query cells replaced by background
  bool local_norm = true;
  ExtractorConfig extractor{{{4, 4}, {8, 8}, {16, 16}}, 8};
  NormConfig norm{64, 1e-3};
  std::size_t k_ac = 0;  // 0: max(1, refs / 8)
  std::size_t train_samples = 64;
  std::size_t batch_size = 16;
  double max_rotation_noise_deg = 20.0;
  double max_feature_noise = 0.2;
  std::size_t lobes_per_object = 16;
  double lobe_concentration_min = 4.0;
  double lobe_concentration_max = 12.0;
  double texture_contrast = 4.0;
  double texture_weight = 0.5;
  double min_aspect = 0.35;
  std::size_t parts_per_object = 6;
  double extent_min = 0.6;
  double extent_max = 0.95;

  std::size_t anchors() const { return k_ac ? k_ac : std::max<std::size_t>(1, refs / 8); }
  void validate() const;
};

struct SynthQuery {
  std::size_t id = 0;
  std::size_t object = 0;
  std::string category;
  Rotation rotation;
  std::size_t base_ref = 0;  // reference the query was derived from
  std::shared_ptr<const FeaturePyramid> pyramid;
};

struct SynthData {
  std::vector<ObjectSource> sources;  // one per object, refs entries each
  std::vector<SynthQuery> queries;
};

/// Deterministic for a fixed task.
SynthData gen_task(const SynthTask& task);

/// Training sources drawn like the task's queries (from an independent
/// stream), each with candidate 0 = the closest reference of its object, then
/// batch_size references among the 64 nearest same-object neighbours and
/// 2 * batch_size - 1 uniformly random references from any object.
std::vector<TrainSample> gen_train_set(const SynthTask& task, const SynthData& data);

/// Renders object `object` of the task under `rotation` (before local
/// normalization); exposed for tests and image export.
GrayImage render_object(const SynthTask& task, std::size_t object, const Rotation& rotation);

/// First `refs` references of every object, reusing the pyramids.
std::vector<ObjectSource> truncate_sources(const std::vector<ObjectSource>& sources, std::size_t refs);

std::string object_label(std::size_t object);  // "obj00", "obj01", ...

}  // namespace orient
