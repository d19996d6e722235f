// SPDX-License-Identifier: Apache-2.0
#include "bench.hpp"

#include <algorithm>
#include <json.hpp>

#include "error.hpp"
#include "parallel.hpp"

namespace orient {

const char* method_name(Method m) { return m == Method::Greedy ? "greedy" : "fast"; }

Method parse_method(std::string_view name) {
  if (name == "greedy") return Method::Greedy;
  if (name == "fast") return Method::Fast;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "' (valid: greedy, fast)");
}

std::vector<LabeledQuery> labeled_queries(const SynthData& data) {
  std::vector<LabeledQuery> out;
  out.reserve(data.queries.size());
  for (const auto& q : data.queries) out.push_back({q.id, q.category, q.rotation, q.pyramid});
  return out;
}

BenchReport run_benchmark(const ReferenceDB& db, const std::vector<LabeledQuery>& queries,
                          const FusionParams& params, const BenchOptions& opts) {
  if (queries.empty()) throw Error(ErrorCode::EmptyEval, "no queries to evaluate");
  BenchReport report;
  report.records.resize(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) {
    const auto& q = queries[i];
    const RetrievalResult r = opts.method == Method::Greedy
                                  ? greedy_search(*q.pyramid, db, params, opts.variant)
                                  : fast_retrieve(*q.pyramid, db, params, opts.variant, opts.fast);
    report.records[i] = make_record(q.id, q.category, q.rotation, r.category, r.rotation, r.comparisons,
                                    r.elapsed_s, r.ref_index);
  });
  auto& s = report.summary;
  s.method = method_name(opts.method);
  s.variant = variant_name(opts.variant);
  s.threshold_deg = opts.threshold_deg;
  s.queries = queries.size();
  s.class_acc = class_acc(report.records);
  s.rota_acc = rota_acc(report.records, opts.threshold_deg);
  for (const auto& r : report.records) {
    s.mean_comparisons += static_cast<double>(r.comparisons);
    s.mean_elapsed_s += r.elapsed_s;
  }
  s.mean_comparisons /= static_cast<double>(queries.size());
  s.mean_elapsed_s /= static_cast<double>(queries.size());
  return report;
}

std::vector<SweepRow> sweep_refs(const SynthTask& task, const BenchOptions& opts) {
  SynthTask clean = task;
  clean.noise = 0.0;
  clean.outlier_fraction = 0.0;
  const SynthData data = gen_task(clean);
  const auto queries = labeled_queries(data);
  const FusionParams unused;
  std::vector<SweepRow> rows;
  for (std::size_t div : {8, 4, 2, 1}) {
    const std::size_t refs = std::max<std::size_t>(1, task.refs / div);
    // k_ac keeps the task's anchor density (refs / 8 by default).
    const std::size_t k_ac =
        std::clamp<std::size_t>(task.anchors() * refs / task.refs, std::min<std::size_t>(2, refs), refs);
    const auto db = ReferenceDB::build(truncate_sources(data.sources, refs), k_ac);
    if (opts.variant != FusionVariant::Average) {
      throw Error(ErrorCode::InvalidArgument, "reference sweep runs without learned parameters; use average");
    }
    rows.push_back({refs, k_ac, run_benchmark(db, queries, unused, opts).summary});
  }
  return rows;
}

MethodComparison compare_methods(const ReferenceDB& db, const std::vector<LabeledQuery>& queries,
                                 const FusionParams& params, FusionVariant variant, const FastConfig& fast) {
  MethodComparison out;
  BenchOptions opts;
  opts.variant = variant;
  opts.fast = fast;
  opts.method = Method::Greedy;
  out.greedy = run_benchmark(db, queries, params, opts);
  opts.method = Method::Fast;
  out.fast = run_benchmark(db, queries, params, opts);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& g = out.greedy.records[i];
    const auto& f = out.fast.records[i];
    agree += g.predicted_category == f.predicted_category && g.predicted_ref == f.predicted_ref;
    out.max_comparison_ratio = std::max(out.max_comparison_ratio, static_cast<double>(f.comparisons) /
                                                                      static_cast<double>(g.comparisons));
  }
  out.agreement = static_cast<double>(agree) / static_cast<double>(queries.size());
  return out;
}

std::vector<AblationRow> run_ablation(const SynthTask& task, const AblationOptions& opts) {
  std::vector<AblationRow> rows;
  const std::vector<bool> norms = opts.vary_local_norm ? std::vector<bool>{true, false} : std::vector<bool>{task.local_norm};
  const std::vector<bool> weightings = opts.vary_weighting ? std::vector<bool>{true, false} : std::vector<bool>{true};
  for (bool norm : norms) {
    SynthTask t = task;
    t.local_norm = norm;
    const SynthData data = gen_task(t);
    const auto db = ReferenceDB::build(data.sources, t.anchors());
    const auto queries = labeled_queries(data);
    const auto train = gen_train_set(t, data);
    BenchOptions bench;
    bench.method = opts.method;
    bench.fast = opts.fast;
    bench.threshold_deg = opts.threshold_deg;
    for (FusionVariant v : opts.variants) {
      bench.variant = v;
      if (v == FusionVariant::Average) {
        AblationRow row;
        row.variant = variant_name(v);
        row.local_norm = norm;
        row.summary = run_benchmark(db, queries, FusionParams(), bench).summary;
        rows.push_back(row);
        continue;
      }
      for (bool weighted : weightings) {
        FitConfig fit = opts.fit;
        fit.variant = v;
        fit.weighted = weighted;
        fit.batch_size = t.batch_size;
        const auto init = FusionParams::average_init(t.extractor.scale_dims.size(), t.extractor.channels, 64,
                                                     fit.seed);
        const FitResult fitted = fit_fusion(train, fit, init);
        AblationRow row;
        row.variant = variant_name(v);
        row.local_norm = norm;
        row.weighted = weighted;
        row.fitted = true;
        if (!fitted.loss_history.empty()) {
          row.initial_loss = fitted.loss_history.front();
          row.final_loss = fitted.loss_history.back();
        }
        row.summary = run_benchmark(db, queries, fitted.params, bench).summary;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string summary_json(const BenchSummary& s, const std::string& config_json) {
  nlohmann::ordered_json j;
  j["method"] = s.method;
  j["variant"] = s.variant;
  j["class_acc"] = s.class_acc;
  j["rota_acc"] = s.rota_acc;
  j["mean_comparisons"] = s.mean_comparisons;
  j["mean_elapsed_s"] = s.mean_elapsed_s;
  j["config"] = nlohmann::ordered_json::parse(config_json);
  j["config"]["threshold_deg"] = s.threshold_deg;
  j["config"]["queries"] = s.queries;
  return j.dump(2);
}

}  // namespace orient
