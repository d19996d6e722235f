// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fusion.hpp"
#include "refdb.hpp"

namespace orient {

struct RetrievalResult {
  std::size_t object = 0;  // index into the database
  std::string category;
  std::size_t ref_index = 0;
  Rotation rotation;
  double score = 0.0;
  std::size_t comparisons = 0;  // fuse evaluations issued
  double elapsed_s = 0.0;
  std::size_t iterations = 0;   // refinement rounds (fast retrieval only)
};

/// Scores one (object, reference) pair. Retrieval only ever calls this, which
/// lets tests substitute synthetic score fields.
using PairScorer = std::function<double(std::size_t object, std::size_t ref)>;

/// The production scorer: score_pair(query, reference pyramid, params, variant).
PairScorer fusion_scorer(const FeaturePyramid& query, const ReferenceDB& db, const FusionParams& params,
                         FusionVariant variant);

struct FastConfig {
  std::size_t k_local = 32;
  std::size_t max_iters = 0;  // 0: ceil(log2 R) of the recognized object
  /// Stop as soon as an iteration leaves the estimate unchanged, even when the
  /// search space was only sampled. The default stops on an unchanged estimate
  /// only once the whole space was scored, since a sampled space can still
  /// hide a better reference at the next, denser radius.
  bool stop_on_any_unchanged = false;
};

struct CategoryResult {
  std::size_t object = 0;
  std::size_t anchor_ref = 0;  // entry index of the best anchor
  double score = 0.0;
  std::vector<std::vector<double>> anchor_scores;  // [object][anchor position]
  std::size_t comparisons = 0;
};

/// Exhaustive search over all N * R references; ties go to the lowest object,
/// then the lowest reference index.
RetrievalResult greedy_search(const ReferenceDB& db, const PairScorer& score);
RetrievalResult greedy_search(const FeaturePyramid& query, const ReferenceDB& db, const FusionParams& params,
                              FusionVariant variant);

/// Scores the precomputed anchors of every object (exactly N * k_ac calls) and
/// returns the object owning the best anchor.
CategoryResult recognize_category(const ReferenceDB& db, const PairScorer& score);
CategoryResult recognize_category(const FeaturePyramid& query, const ReferenceDB& db, const FusionParams& params,
                                  FusionVariant variant);

/// Anchor-initialized coarse-to-fine search within the recognized object.
/// Iteration j considers the floor(R / 2^j) references nearest (geodesic) to
/// the current estimate, scores min(k_local, space) of them picked by FPS from
/// the estimate, and keeps the best reference seen. Scores are cached per
/// query, so comparisons counts distinct references scored.
RetrievalResult fast_retrieve(const ReferenceDB& db, const PairScorer& score, const FastConfig& cfg = {});
RetrievalResult fast_retrieve(const FeaturePyramid& query, const ReferenceDB& db, const FusionParams& params,
                              FusionVariant variant, const FastConfig& cfg = {});

}  // namespace orient
