// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "bench.hpp"
#include "error.hpp"
#include "retrieval.hpp"
#include "synth.hpp"

using namespace orient;

namespace {

// Database whose pyramids are irrelevant placeholders; tests score it through
// synthetic PairScorers that only look at the stored rotations.
ReferenceDB rotation_db(std::size_t objects, std::size_t refs, std::size_t k_ac, std::uint64_t seed) {
  auto placeholder = std::make_shared<const FeaturePyramid>(std::vector<ScaleDim>{{2, 2}}, 1);
  std::vector<ObjectSource> sources;
  for (std::size_t o = 0; o < objects; ++o) {
    ObjectSource src{"obj" + std::to_string(o), sample_rotations(refs, seed * 100 + o), {}};
    src.pyramids.assign(refs, placeholder);
    sources.push_back(std::move(src));
  }
  return ReferenceDB::build(std::move(sources), k_ac);
}

// Score decreasing in geodesic distance to `target`, with the true object lifted.
PairScorer unimodal_field(const ReferenceDB& db, std::size_t true_object, const Rotation& target,
                          std::size_t* calls = nullptr) {
  return [&db, true_object, target, calls](std::size_t o, std::size_t r) {
    if (calls) ++*calls;
    const double lift = o == true_object ? 1.0 : 0.5;
    return lift - geodesic_distance(db.object(o).entries[r].rotation, target);
  };
}

RetrievalResult greedy_within(const ReferenceDB& db, std::size_t object, const PairScorer& score) {
  RetrievalResult best;
  best.score = -1e300;
  for (std::size_t r = 0; r < db.object(object).entries.size(); ++r) {
    const double s = score(object, r);
    if (s > best.score) {
      best.score = s;
      best.ref_index = r;
    }
  }
  best.object = object;
  return best;
}

FeaturePyramid random_pyramid(std::uint64_t seed) {
  FeaturePyramid shape({{2, 2}, {4, 4}}, 4);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> data(shape.data().size());
  for (float& v : data) v = u(rng);
  return FeaturePyramid(shape.dims(), 4, std::move(data));
}

ReferenceDB random_db(std::size_t objects, std::size_t refs, std::size_t k_ac) {
  std::vector<ObjectSource> sources;
  for (std::size_t o = 0; o < objects; ++o) {
    ObjectSource src{"obj" + std::to_string(o), sample_rotations(refs, 40 + o), {}};
    for (std::size_t i = 0; i < refs; ++i)
      src.pyramids.push_back(std::make_shared<const FeaturePyramid>(random_pyramid(1000 * o + i)));
    sources.push_back(std::move(src));
  }
  return ReferenceDB::build(std::move(sources), k_ac);
}

}  // namespace

TEST_CASE("greedy search finds an exact copy") {
  const ReferenceDB db = random_db(3, 20, 4);
  const FeaturePyramid query = *db.object(1).entries[7].pyramid;
  const RetrievalResult r = greedy_search(query, db, FusionParams(), FusionVariant::Average);
  CHECK(r.object == 1);
  CHECK(r.category == "obj1");
  CHECK(r.ref_index == 7);
  CHECK(r.score == doctest::Approx(1.0));
  CHECK(r.comparisons == 60);
  CHECK(r.rotation == db.object(1).entries[7].rotation);
}

TEST_CASE("greedy search over a single reference") {
  const ReferenceDB db = random_db(1, 1, 1);
  const RetrievalResult r = greedy_search(random_pyramid(5), db, FusionParams(), FusionVariant::Average);
  CHECK(r.ref_index == 0);
  CHECK(r.comparisons == 1);
}

TEST_CASE("greedy ties go to the lowest object and reference") {
  const ReferenceDB db = rotation_db(3, 10, 2, 1);
  const RetrievalResult r = greedy_search(db, [](std::size_t o, std::size_t ref) { return o >= 1 && ref >= 4 ? 1.0 : 0.0; });
  CHECK(r.object == 1);
  CHECK(r.ref_index == 4);
}

TEST_CASE("retrieval rejects mismatched queries") {
  const ReferenceDB db = random_db(1, 4, 2);
  const FeaturePyramid wrong({{3, 3}}, 4);
  for (int which = 0; which < 3; ++which) {
    try {
      if (which == 0) greedy_search(wrong, db, FusionParams(), FusionVariant::Average);
      if (which == 1) recognize_category(wrong, db, FusionParams(), FusionVariant::Average);
      if (which == 2) fast_retrieve(wrong, db, FusionParams(), FusionVariant::Average);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
  }
}

TEST_CASE("category recognition examples") {
  const ReferenceDB one = rotation_db(1, 50, 8, 2);
  std::size_t calls = 0;
  const CategoryResult r1 = recognize_category(one, unimodal_field(one, 0, Rotation(), &calls));
  CHECK(r1.object == 0);
  CHECK(r1.comparisons == 8);
  CHECK(calls == 8);

  const ReferenceDB db = random_db(4, 30, 6);
  const std::size_t anchor = db.object(2).anchor_ids[3];
  const CategoryResult r2 =
      recognize_category(*db.object(2).entries[anchor].pyramid, db, FusionParams(), FusionVariant::Average);
  CHECK(r2.object == 2);
  CHECK(r2.anchor_ref == anchor);
  CHECK(r2.comparisons == 4 * 6);
  CHECK(r2.anchor_scores.size() == 4);
}

TEST_CASE("recognition issues exactly N * k_ac evaluations") {
  std::mt19937_64 rng(3);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 4, refs = 20 + rng() % 50, k = 1 + rng() % refs;
    const ReferenceDB db = rotation_db(n, refs, k, trial);
    std::size_t calls = 0;
    const auto target = sample_rotations(1, 700 + trial)[0];
    const CategoryResult r = recognize_category(db, unimodal_field(db, rng() % n, target, &calls));
    CHECK(r.comparisons == n * k);
    CHECK(calls == n * k);
  }
}

TEST_CASE("fast retrieval degenerates to greedy when every reference is an anchor") {
  const ReferenceDB db = rotation_db(3, 40, 40, 4);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  std::vector<double> noise(3 * 40);
  for (double& v : noise) v = n01(rng);
  const PairScorer score = [&](std::size_t o, std::size_t r) { return noise[o * 40 + r]; };
  const RetrievalResult fast = fast_retrieve(db, score);
  const RetrievalResult greedy = greedy_search(db, score);
  CHECK(fast.object == greedy.object);
  CHECK(fast.ref_index == greedy.ref_index);
  CHECK(fast.comparisons == 3 * 40);
}

TEST_CASE("fast retrieval equals greedy on unimodal fields") {
  const std::size_t n = 4, refs = 2000, k_ac = 128;
  const ReferenceDB db = rotation_db(n, refs, k_ac, 6);
  std::mt19937_64 rng(11);
  for (std::size_t trial = 0; trial < 50; ++trial) {
    const std::size_t truth = rng() % n;
    const Rotation target = sample_rotations(1, 5000 + trial)[0];
    std::size_t calls = 0;
    const PairScorer score = unimodal_field(db, truth, target, &calls);
    const RetrievalResult fast = fast_retrieve(db, score);
    const RetrievalResult oracle = greedy_within(db, truth, score);
    CAPTURE(trial);
    CHECK(fast.object == truth);
    CHECK(fast.ref_index == oracle.ref_index);
    const std::size_t max_iters = static_cast<std::size_t>(std::ceil(std::log2(double(refs))));
    CHECK(fast.iterations <= max_iters);
    CHECK(fast.comparisons <= n * k_ac + max_iters * 32);
    CHECK(fast.comparisons * 4 <= n * refs);
  }
}

TEST_CASE("fast retrieval returns the best reference it scored") {
  const ReferenceDB db = rotation_db(2, 500, 32, 8);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    std::map<std::pair<std::size_t, std::size_t>, double> seen;
    const Rotation target = sample_rotations(1, seed + 90)[0];
    const PairScorer score = [&](std::size_t o, std::size_t r) {
      // Rugged field: unimodal trend plus deterministic per-reference noise.
      const double v = -geodesic_distance(db.object(o).entries[r].rotation, target) +
                       0.05 * std::sin(double(r * 7919 + o * 104729 + seed));
      CHECK(seen.emplace(std::pair{o, r}, v).second);  // cached: never scored twice
      return v;
    };
    FastConfig cfg;
    cfg.max_iters = 4;
    const RetrievalResult r = fast_retrieve(db, score, cfg);
    double best = -1e300;
    for (const auto& [key, v] : seen)
      if (key.first == r.object) best = std::max(best, v);
    CHECK(r.score == best);
    CHECK(r.comparisons == seen.size());
    CHECK(r.iterations <= 4);
  }
}

TEST_CASE("fast retrieval configuration checks") {
  const ReferenceDB db = rotation_db(1, 50, 4, 9);
  FastConfig cfg;
  cfg.k_local = 1;
  CHECK_THROWS_AS(fast_retrieve(db, unimodal_field(db, 0, Rotation()), cfg), Error);
}

TEST_CASE("noiseless synthetic queries are retrieved exactly by greedy search") {
  SynthTask task;
  task.refs = 300;
  task.queries = 100;
  const SynthData data = gen_task(task);
  const ReferenceDB db = ReferenceDB::build(data.sources, task.anchors());
  BenchOptions opts;
  opts.method = Method::Greedy;
  const BenchReport report = run_benchmark(db, labeled_queries(data), FusionParams(), opts);
  CHECK(report.summary.class_acc == 1.0);
  CHECK(report.summary.rota_acc == 1.0);
  for (std::size_t i = 0; i < data.queries.size(); ++i) CHECK(report.records[i].predicted_ref == data.queries[i].base_ref);
}
