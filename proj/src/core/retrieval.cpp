// SPDX-License-Identifier: Apache-2.0
#include "retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "error.hpp"

namespace orient {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void check_query(const FeaturePyramid& query, const ReferenceDB& db) {
  if (query.dims() != db.scale_dims() || query.channels() != db.channels()) {
    throw Error(ErrorCode::ShapeMismatch, "query geometry " + format_scale_dims(query.dims()) + " x" +
                                              std::to_string(query.channels()) + " does not match database " +
                                              db.fingerprint());
  }
}

// A strictly higher score wins; equal scores go to the lower index.
bool better(double score, std::size_t idx, double best_score, std::size_t best_idx) {
  return score > best_score || (score == best_score && idx < best_idx);
}

}  // namespace

PairScorer fusion_scorer(const FeaturePyramid& query, const ReferenceDB& db, const FusionParams& params,
                         FusionVariant variant) {
  check_query(query, db);
  return [&query, &db, &params, variant](std::size_t o, std::size_t r) {
    return score_pair(query, *db.object(o).entries[r].pyramid, params, variant);
  };
}

RetrievalResult greedy_search(const ReferenceDB& db, const PairScorer& score) {
  const auto t0 = Clock::now();
  RetrievalResult best;
  bool have = false;
  for (std::size_t o = 0; o < db.num_objects(); ++o) {
    const auto& obj = db.object(o);
    for (std::size_t r = 0; r < obj.entries.size(); ++r) {
      const double s = score(o, r);
      ++best.comparisons;
      if (!have || s > best.score) {  // iteration order already breaks ties low
        have = true;
        best.score = s;
        best.object = o;
        best.ref_index = r;
      }
    }
  }
  if (!have) throw Error(ErrorCode::InvalidArgument, "database has no references");
  best.category = db.object(best.object).category;
  best.rotation = db.object(best.object).entries[best.ref_index].rotation;
  best.elapsed_s = seconds_since(t0);
  return best;
}

RetrievalResult greedy_search(const FeaturePyramid& query, const ReferenceDB& db, const FusionParams& params,
                              FusionVariant variant) {
  return greedy_search(db, fusion_scorer(query, db, params, variant));
}

CategoryResult recognize_category(const ReferenceDB& db, const PairScorer& score) {
  CategoryResult out;
  bool have = false;
  out.anchor_scores.resize(db.num_objects());
  for (std::size_t o = 0; o < db.num_objects(); ++o) {
    const auto& obj = db.object(o);
    for (std::uint32_t id : obj.anchor_ids) {
      const double s = score(o, id);
      ++out.comparisons;
      out.anchor_scores[o].push_back(s);
      if (!have || s > out.score || (s == out.score && o == out.object && id < out.anchor_ref)) {
        have = true;
        out.score = s;
        out.object = o;
        out.anchor_ref = id;
      }
    }
  }
  if (!have) throw Error(ErrorCode::InvalidArgument, "database has no anchors");
  return out;
}

CategoryResult recognize_category(const FeaturePyramid& query, const ReferenceDB& db, const FusionParams& params,
                                  FusionVariant variant) {
  return recognize_category(db, fusion_scorer(query, db, params, variant));
}

RetrievalResult fast_retrieve(const ReferenceDB& db, const PairScorer& score, const FastConfig& cfg) {
  if (cfg.k_local < 2) throw Error(ErrorCode::InvalidArgument, "k_local must be >= 2");
  const auto t0 = Clock::now();
  const CategoryResult cat = recognize_category(db, score);

  const std::size_t o = cat.object;
  const auto& obj = db.object(o);
  const std::size_t n_refs = obj.entries.size();
  std::unordered_map<std::size_t, double> cache;
  for (std::size_t a = 0; a < obj.anchor_ids.size(); ++a) cache.emplace(obj.anchor_ids[a], cat.anchor_scores[o][a]);

  RetrievalResult res;
  res.object = o;
  res.category = obj.category;
  res.ref_index = cat.anchor_ref;
  res.score = cat.score;
  res.comparisons = cat.comparisons;

  const std::size_t max_iters =
      cfg.max_iters ? cfg.max_iters
                    : static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(n_refs, 2)))));

  std::vector<std::pair<double, std::size_t>> by_distance(n_refs);
  std::vector<Rotation> space_rotations;
  for (std::size_t j = 1; j <= max_iters; ++j) {
    const std::size_t space = j < 64 ? (n_refs >> j) : 0;
    if (space == 0) break;
    ++res.iterations;

    // Rank window: the `space` references nearest the current estimate.
    const Rotation& center = obj.entries[res.ref_index].rotation;
    for (std::size_t r = 0; r < n_refs; ++r) by_distance[r] = {geodesic_distance(center, obj.entries[r].rotation), r};
    std::partial_sort(by_distance.begin(), by_distance.begin() + static_cast<std::ptrdiff_t>(space), by_distance.end());
    space_rotations.clear();
    for (std::size_t i = 0; i < space; ++i) space_rotations.push_back(obj.entries[by_distance[i].second].rotation);

    const std::size_t picks = std::min(cfg.k_local, space);
    const auto local = fps_select(space_rotations, picks, 0);
    const std::size_t before = res.ref_index;
    for (std::size_t pos : local) {
      const std::size_t r = by_distance[pos].second;
      auto it = cache.find(r);
      if (it == cache.end()) {
        it = cache.emplace(r, score(o, r)).first;
        ++res.comparisons;
      }
      if (better(it->second, r, res.score, res.ref_index)) {
        res.score = it->second;
        res.ref_index = r;
      }
    }
    const bool unchanged = res.ref_index == before;
    if (space < cfg.k_local) break;
    if (unchanged && (cfg.stop_on_any_unchanged || picks == space)) break;
  }
  res.rotation = obj.entries[res.ref_index].rotation;
  res.elapsed_s = seconds_since(t0);
  return res;
}

RetrievalResult fast_retrieve(const FeaturePyramid& query, const ReferenceDB& db, const FusionParams& params,
                              FusionVariant variant, const FastConfig& cfg) {
  return fast_retrieve(db, fusion_scorer(query, db, params, variant), cfg);
}

}  // namespace orient
