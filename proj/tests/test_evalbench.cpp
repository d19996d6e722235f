// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <random>

#include "bench.hpp"
#include "error.hpp"
#include "helpers.hpp"
#include "metrics.hpp"
#include "synth.hpp"
#include "task_io.hpp"

using namespace orient;

namespace {

EvalRecord rec(const std::string& truth, const std::string& pred, double err_deg) {
  const Rotation r = sample_rotations(1, 17)[0];
  return make_record(0, truth, r, pred, Rotation::about_axis({0, 0, 1}, err_deg * 3.14159265358979323846 / 180.0) * r,
                     1, 0.0);
}

SynthTask small_task() {
  SynthTask t;
  t.objects = 2;
  t.refs = 64;
  t.queries = 12;
  t.train_samples = 8;
  t.batch_size = 4;
  return t;
}

}  // namespace

TEST_CASE("class accuracy") {
  std::vector<EvalRecord> all_right{rec("a", "a", 0), rec("b", "b", 50)};
  std::vector<EvalRecord> all_wrong{rec("a", "b", 0), rec("b", "a", 0)};
  std::vector<EvalRecord> three{rec("a", "a", 0), rec("a", "a", 0), rec("b", "b", 0), rec("b", "a", 0)};
  CHECK(class_acc(all_right) == 1.0);
  CHECK(class_acc(all_wrong) == 0.0);
  CHECK(class_acc(three) == 0.75);
  try {
    class_acc(std::vector<EvalRecord>{});
    FAIL("expected EmptyEval");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyEval);
  }
  CHECK_THROWS_AS(rota_acc(std::vector<EvalRecord>{}), Error);
}

TEST_CASE("rotation accuracy") {
  CHECK(rota_acc(std::vector<EvalRecord>{rec("a", "a", 0)}) == 1.0);
  const EvalRecord ninety = rec("a", "a", 90);
  CHECK(ninety.geodesic_error == doctest::Approx(0.5));
  CHECK(rota_acc(std::vector<EvalRecord>{ninety}) == 0.0);
  CHECK(rota_acc(std::vector<EvalRecord>{rec("a", "b", 0)}) == 0.0);
  CHECK(rota_acc(std::vector<EvalRecord>{rec("a", "a", 29.9)}) == 1.0);
  CHECK(rota_acc(std::vector<EvalRecord>{rec("a", "a", 30.1)}) == 0.0);
  CHECK(rota_acc(std::vector<EvalRecord>{rec("a", "a", 40)}, 45.0) == 1.0);
}

TEST_CASE("metric properties on random record sets") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> err(0.0, 180.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<EvalRecord> records;
    for (int i = 0; i < 20; ++i) records.push_back(rec(rng() % 2 ? "a" : "b", rng() % 2 ? "a" : "b", err(rng)));
    const double c = class_acc(records), r = rota_acc(records);
    CHECK(c >= r);
    for (const auto& x : records) CHECK((x.geodesic_error >= 0.0 && x.geodesic_error <= 1.0));
    std::shuffle(records.begin(), records.end(), rng);
    CHECK(class_acc(records) == c);
    CHECK(rota_acc(records) == r);
  }
}

TEST_CASE("records csv") {
  testutil::TempDir dir("records");
  std::vector<EvalRecord> records{rec("a", "a", 90)};
  write_records_csv(records, dir.file("r.csv"));
  std::ifstream in(dir.file("r.csv"));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "query_id,true_category,predicted_category,geodesic_error_deg,comparisons,elapsed_s");
  CHECK(row.rfind("0,a,a,90", 0) == 0);
}

TEST_CASE("task generation is deterministic") {
  const SynthTask task = small_task();
  const SynthData a = gen_task(task), b = gen_task(task);
  REQUIRE(a.sources.size() == 2);
  for (std::size_t o = 0; o < 2; ++o) {
    CHECK(a.sources[o].rotations == b.sources[o].rotations);
    for (std::size_t i = 0; i < task.refs; ++i) CHECK(*a.sources[o].pyramids[i] == *b.sources[o].pyramids[i]);
  }
  for (std::size_t q = 0; q < task.queries; ++q) {
    CHECK(a.queries[q].base_ref == b.queries[q].base_ref);
    CHECK(*a.queries[q].pyramid == *b.queries[q].pyramid);
  }
  SynthTask other = task;
  other.seed = 2;
  CHECK(gen_task(other).sources[0].rotations != a.sources[0].rotations);
}

TEST_CASE("noiseless queries copy references") {
  const SynthTask task = small_task();
  const SynthData data = gen_task(task);
  for (const auto& q : data.queries) {
    CHECK(*q.pyramid == *data.sources[q.object].pyramids[q.base_ref]);
    CHECK(q.rotation == data.sources[q.object].rotations[q.base_ref]);
  }
}

TEST_CASE("outliers overwrite floor(f * H * W) cells per scale") {
  SynthTask clean = small_task();
  SynthTask dirty = clean;
  dirty.outlier_fraction = 0.25;
  const SynthData a = gen_task(clean), b = gen_task(dirty);
  for (std::size_t q = 0; q < clean.queries; ++q) {
    const auto& pa = *a.queries[q].pyramid;
    const auto& pb = *b.queries[q].pyramid;
    for (std::size_t s = 0; s < pa.num_scales(); ++s) {
      std::size_t changed = 0;
      for (std::size_t loc = 0; loc < pa.locations(s); ++loc) {
        const auto ca = pa.cell(s, loc), cb = pb.cell(s, loc);
        if (!std::equal(ca.begin(), ca.end(), cb.begin())) ++changed;
      }
      CHECK(changed == pa.locations(s) / 4);
    }
  }
}

TEST_CASE("synthetic task validation") {
  SynthTask t = small_task();
  t.outlier_fraction = 1.0;
  CHECK_THROWS_AS(t.validate(), Error);
  t = small_task();
  t.noise = 1.5;
  CHECK_THROWS_AS(t.validate(), Error);
  t = small_task();
  t.k_ac = t.refs + 1;
  try {
    t.validate();
    FAIL("expected InsufficientReferences");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientReferences);
  }
}

TEST_CASE("benchmark determinism and method comparison") {
  SynthTask task = small_task();
  task.noise = 0.5;
  const SynthData data = gen_task(task);
  const ReferenceDB db = ReferenceDB::build(data.sources, task.anchors());
  const auto queries = labeled_queries(data);
  BenchOptions opts;
  const BenchReport a = run_benchmark(db, queries, FusionParams(), opts);
  const BenchReport b = run_benchmark(db, queries, FusionParams(), opts);
  CHECK(a.summary.class_acc == b.summary.class_acc);
  CHECK(a.summary.rota_acc == b.summary.rota_acc);
  CHECK(a.summary.mean_comparisons == b.summary.mean_comparisons);
  CHECK(a.summary.queries == task.queries);

  const MethodComparison cmp = compare_methods(db, queries, FusionParams(), FusionVariant::Average, FastConfig{});
  CHECK(cmp.greedy.summary.mean_comparisons == double(2 * task.refs));
  CHECK(cmp.fast.summary.mean_comparisons < cmp.greedy.summary.mean_comparisons);
  CHECK((cmp.agreement >= 0.0 && cmp.agreement <= 1.0));

  CHECK_THROWS_AS(run_benchmark(db, {}, FusionParams(), opts), Error);
  CHECK(parse_method("greedy") == Method::Greedy);
  CHECK_THROWS_AS(parse_method("beam"), Error);
}

TEST_CASE("reference sweep on a small noiseless task") {
  SynthTask task = small_task();
  task.refs = 400;
  task.queries = 40;
  const auto rows = sweep_refs(task, BenchOptions{});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].refs == 50);
  CHECK(rows[3].refs == 400);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].summary.rota_acc >= rows[i - 1].summary.rota_acc);
    CHECK(rows[i].summary.mean_comparisons > rows[i - 1].summary.mean_comparisons);
  }
}

TEST_CASE("ablation emits the full grid") {
  AblationOptions opts;
  opts.fit.epochs = 2;
  opts.fit.learning_rate = 1e-2;
  const auto rows = run_ablation(small_task(), opts);
  CHECK(rows.size() == 2 * (1 + 3 * 2));
  std::size_t unweighted = 0, no_norm = 0;
  for (const auto& r : rows) {
    if (r.variant == "average") {
      CHECK(!r.fitted);
    } else {
      CHECK(r.fitted);
      CHECK(r.initial_loss > 0.0);
    }
    unweighted += !r.weighted;
    no_norm += !r.local_norm;
    CHECK((r.summary.rota_acc >= 0.0 && r.summary.rota_acc <= r.summary.class_acc));
  }
  CHECK(unweighted == 6);
  CHECK(no_norm == 7);
}

TEST_CASE("summary json fields") {
  BenchSummary s;
  s.method = "fast";
  s.variant = "average";
  s.rota_acc = 0.5;
  const auto j = nlohmann::json::parse(summary_json(s, R"({"seed": 3})"));
  for (const char* key : {"method", "variant", "class_acc", "rota_acc", "mean_comparisons", "mean_elapsed_s", "config"})
    CHECK(j.contains(key));
  CHECK(j["config"]["seed"] == 3);
  CHECK(j["rota_acc"] == 0.5);
}

TEST_CASE("task files round trip") {
  testutil::TempDir dir("taskio");
  SynthTask task = small_task();
  task.noise = 0.25;
  task.k_ac = 7;
  const SynthTask back = task_from_json(task_to_json(task));
  CHECK(task_to_json(back) == task_to_json(task));
  CHECK(back.k_ac == 7);
  CHECK(back.extractor == task.extractor);

  try {
    task_from_json(R"({"seed": 1, "colour": 3})");
    FAIL("expected FormatError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormatError);
  }
  CHECK_THROWS_AS(task_from_json(R"({"seed": "x"})"), Error);
  CHECK_THROWS_AS(task_from_json("[1]"), Error);
  CHECK_THROWS_AS(task_from_json(R"({"noise": 3})"), Error);

  const SynthData data = write_task_dir(task, dir.path().string());
  const TaskPaths paths = task_paths(dir.path().string());
  CHECK(task_to_json(load_task(paths.task_json)) == task_to_json(task));
  const ReferenceDB db = ReferenceDB::load(paths.db);
  CHECK(db.object(0).anchor_ids.size() == 7);
  const auto queries = read_query_manifest(paths.queries_csv);
  REQUIRE(queries.size() == task.queries);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    CHECK(queries[i].category == data.queries[i].category);
    CHECK(*queries[i].pyramid == *data.queries[i].pyramid);
    CHECK(geodesic_distance(queries[i].rotation, data.queries[i].rotation) < 1e-12);
  }
}
