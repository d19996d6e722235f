// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusion.hpp"
#include "metrics.hpp"
#include "refdb.hpp"
#include "retrieval.hpp"
#include "synth.hpp"

namespace orient {

enum class Method { Greedy, Fast };
const char* method_name(Method m);
Method parse_method(std::string_view name);  // "greedy" | "fast"

/// A labeled query pyramid, as stored by the synthetic task or a query manifest.
struct LabeledQuery {
  std::size_t id = 0;
  std::string category;
  Rotation rotation;
  std::shared_ptr<const FeaturePyramid> pyramid;
};

std::vector<LabeledQuery> labeled_queries(const SynthData& data);

struct BenchSummary {
  std::string method;
  std::string variant;
  double class_acc = 0.0;
  double rota_acc = 0.0;
  double mean_comparisons = 0.0;
  double mean_elapsed_s = 0.0;
  double threshold_deg = 30.0;
  std::size_t queries = 0;
};

struct BenchReport {
  std::vector<EvalRecord> records;  // in query order
  BenchSummary summary;
};

struct BenchOptions {
  Method method = Method::Fast;
  FusionVariant variant = FusionVariant::Average;
  FastConfig fast;
  double threshold_deg = 30.0;
};

/// Runs every query (concurrently) and aggregates the metrics. Accuracy and
/// comparison counts are deterministic; only the timings vary.
BenchReport run_benchmark(const ReferenceDB& db, const std::vector<LabeledQuery>& queries,
                          const FusionParams& params, const BenchOptions& opts);

/// Reference-count sweep on the noiseless version of the task: the database
/// holds the first R/8, R/4, R/2 and R references of every object while the
/// queries stay copies of references from the full set.
struct SweepRow {
  std::size_t refs = 0;
  std::size_t k_ac = 0;
  BenchSummary summary;
};
std::vector<SweepRow> sweep_refs(const SynthTask& task, const BenchOptions& opts);

/// Greedy and fast retrieval on the same task plus their per-query agreement.
struct MethodComparison {
  BenchReport greedy;
  BenchReport fast;
  double agreement = 0.0;          // fraction retrieving the same (object, ref)
  double max_comparison_ratio = 0.0;  // max over queries of fast / greedy comparisons
};
MethodComparison compare_methods(const ReferenceDB& db, const std::vector<LabeledQuery>& queries,
                                 const FusionParams& params, FusionVariant variant, const FastConfig& fast);

struct AblationRow {
  std::string variant;
  bool local_norm = true;
  bool weighted = true;
  bool fitted = false;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  BenchSummary summary;
};

struct AblationOptions {
  FitConfig fit;  // variant, weighted are set per row
  Method method = Method::Fast;
  FastConfig fast;
  double threshold_deg = 30.0;
  bool vary_local_norm = true;
  bool vary_weighting = true;
  std::vector<FusionVariant> variants{FusionVariant::Adaptive, FusionVariant::Average, FusionVariant::SigmoidOnly,
                                      FusionVariant::SoftmaxOnly};
};

/// Fits each learned variant on the task's training set and evaluates it
/// next to Average, across local normalization on/off and weighted vs plain
/// infoNCE. Average rows appear once per normalization setting.
std::vector<AblationRow> run_ablation(const SynthTask& task, const AblationOptions& opts);

std::string summary_json(const BenchSummary& s, const std::string& config_json = "{}");

}  // namespace orient
