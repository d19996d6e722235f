// SPDX-License-Identifier: Apache-2.0
// orient: command-line front end over the C API.
#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "orient/orient.h"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kCheck = 3 };

int exit_for(orient_status s) {
  switch (s) {
    case ORIENT_OK: return kOk;
    case ORIENT_ERR_INVALID_ARGUMENT:
    case ORIENT_ERR_INVALID_K: return kUsage;
    default: return kData;
  }
}

// Reports a failed call and returns the matching exit code.
int report(orient_status s) {
  std::fprintf(stderr, "error: %s\n", orient_last_error());
  return exit_for(s);
}

struct Guard {
  orient_db* db = nullptr;
  orient_pyramid* query = nullptr;
  orient_params* params = nullptr;
  ~Guard() {
    orient_db_free(db);
    orient_pyramid_free(query);
    orient_params_free(params);
  }
};

bool has_extension(const fs::path& p, std::initializer_list<const char*> exts) {
  const std::string e = p.extension().string();
  return std::any_of(exts.begin(), exts.end(), [&](const char* x) { return e == x; });
}

bool is_image(const fs::path& p) { return has_extension(p, {".pgm", ".ppm", ".pnm"}); }

std::vector<std::string> list_inputs(const std::string& dir, bool images) {
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    if (images ? is_image(entry.path()) : has_extension(entry.path(), {".fpyr"})) files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

void print_config(const char* command, const std::vector<std::pair<std::string, std::string>>& items) {
  std::printf("config %s:", command);
  for (const auto& [k, v] : items) std::printf(" %s=%s", k.c_str(), v.c_str());
  std::printf("\n");
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string num(std::size_t v) { return std::to_string(v); }

bool write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text << "\n";
  return static_cast<bool>(out);
}

// ---- build-db ----
struct BuildDbArgs {
  std::vector<std::string> images, pyramids, rotations;
  std::string out;
  std::size_t kac = 128;
  std::string scales = "13x13,26x26,52x52";
  std::uint32_t channels = 8;
};

int run_build_db(const BuildDbArgs& a) {
  const bool images = !a.images.empty();
  const auto& dirs = images ? a.images : a.pyramids;
  print_config("build-db", {{"inputs", images ? "images" : "pyramids"},
                            {"objects", num(dirs.size())},
                            {"out", a.out},
                            {"kac", num(a.kac)},
                            {"scales", a.scales},
                            {"channels", num(std::size_t{a.channels})}});
  if (dirs.size() != a.rotations.size()) {
    std::fprintf(stderr, "error: %zu object directories but %zu rotation manifests\n", dirs.size(), a.rotations.size());
    return kUsage;
  }
  std::vector<std::vector<std::string>> files(dirs.size());
  std::vector<std::vector<const char*>> file_ptrs(dirs.size());
  std::vector<std::string> labels(dirs.size());
  std::vector<orient_object_source> sources(dirs.size());
  for (std::size_t o = 0; o < dirs.size(); ++o) {
    if (!fs::is_directory(dirs[o])) {
      std::fprintf(stderr, "error: IoError: '%s' is not a directory\n", dirs[o].c_str());
      return kData;
    }
    if (!fs::exists(a.rotations[o])) {
      std::fprintf(stderr, "error: IoError: rotation manifest '%s' not found\n", a.rotations[o].c_str());
      return kData;
    }
    files[o] = list_inputs(dirs[o], images);
    for (const auto& f : files[o]) file_ptrs[o].push_back(f.c_str());
    labels[o] = fs::path(dirs[o]).lexically_normal().filename().string();
    if (labels[o].empty()) labels[o] = fs::path(dirs[o]).lexically_normal().parent_path().filename().string();
    sources[o] = {labels[o].c_str(), a.rotations[o].c_str(), file_ptrs[o].data(), file_ptrs[o].size()};
  }
  orient_extract_config cfg;
  orient_extract_config_default(&cfg);
  cfg.scales = a.scales.c_str();
  cfg.channels = a.channels;
  Guard g;
  if (auto s = orient_db_build(sources.data(), sources.size(), images ? 1 : 0, &cfg, a.kac, &g.db)) return report(s);
  if (auto s = orient_db_save(g.db, a.out.c_str())) return report(s);
  std::size_t total = 0;
  for (std::size_t o = 0; o < orient_db_num_objects(g.db); ++o) {
    char label[128];
    std::size_t refs = 0, kac = 0;
    orient_db_object_info(g.db, o, label, sizeof label, &refs, &kac);
    std::printf("object %s: R=%zu k_ac=%zu\n", label, refs, kac);
    total += refs;
  }
  std::printf("wrote %s: N=%zu R=%zu k_ac=%zu\n", a.out.c_str(), orient_db_num_objects(g.db), total, a.kac);
  return kOk;
}

// ---- retrieve ----
struct RetrieveArgs {
  std::string db, query, method = "fast", variant = "average", params, json;
  std::size_t klocal = 32;
};

int run_retrieve(const RetrieveArgs& a) {
  print_config("retrieve", {{"db", a.db},
                            {"query", a.query},
                            {"method", a.method},
                            {"variant", a.variant},
                            {"params", a.params.empty() ? "none" : a.params},
                            {"klocal", num(a.klocal)}});
  Guard g;
  if (auto s = orient_db_load(a.db.c_str(), &g.db)) return report(s);
  if (is_image(a.query)) {
    // Images are extracted with the database's geometry.
    char* scales_c = nullptr;
    orient_extract_config cfg;
    orient_extract_config_default(&cfg);
    if (auto s = orient_db_geometry(g.db, &scales_c, &cfg.channels)) return report(s);
    const std::string scales = scales_c;
    orient_string_free(scales_c);
    cfg.scales = scales.c_str();
    if (auto s = orient_pyramid_from_image(a.query.c_str(), &cfg, &g.query)) return report(s);
  } else if (auto s = orient_pyramid_load(a.query.c_str(), &g.query)) {
    return report(s);
  }
  if (!a.params.empty()) {
    if (auto s = orient_params_load(a.params.c_str(), &g.params)) return report(s);
  }
  orient_retrieve_config cfg;
  orient_retrieve_config_default(&cfg);
  cfg.method = a.method.c_str();
  cfg.variant = a.variant.c_str();
  cfg.k_local = a.klocal;
  orient_result r;
  if (auto s = orient_retrieve(g.db, g.query, g.params, &cfg, &r)) return report(s);
  std::printf("category: %s\nreference: %zu\nrotation:\n", r.category, r.ref_index);
  for (int i = 0; i < 3; ++i) std::printf("  % .6f % .6f % .6f\n", r.rotation[3 * i], r.rotation[3 * i + 1], r.rotation[3 * i + 2]);
  std::printf("score: %.6f\ncomparisons: %zu\niterations: %zu\nelapsed_s: %.6f\n", r.score, r.comparisons, r.iterations,
              r.elapsed_s);
  if (!a.json.empty()) {
    std::string j = std::string("{\n  \"category\": \"") + r.category + "\",\n  \"ref_index\": " +
                    std::to_string(r.ref_index) + ",\n  \"rotation\": [";
    for (int i = 0; i < 9; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%.17g", i ? ", " : "", r.rotation[i]);
      j += buf;
    }
    char tail[160];
    std::snprintf(tail, sizeof tail, "],\n  \"score\": %.17g,\n  \"comparisons\": %zu,\n  \"iterations\": %zu\n}", r.score,
                  r.comparisons, r.iterations);
    j += tail;
    if (!write_text(a.json, j)) {
      std::fprintf(stderr, "error: IoError: cannot write '%s'\n", a.json.c_str());
      return kData;
    }
  }
  return kOk;
}

// ---- synth ----
int run_synth(const orient_task_config& c, const std::string& out_dir) {
  print_config("synth", {{"seed", num(static_cast<std::size_t>(c.seed))},
                         {"objects", num(c.objects)},
                         {"refs", num(c.refs)},
                         {"queries", num(c.queries)},
                         {"noise", num(c.noise)},
                         {"outliers", num(c.outliers)},
                         {"kac", c.k_ac ? num(c.k_ac) : num(std::max<std::size_t>(1, c.refs / 8))},
                         {"out_dir", out_dir}});
  if (auto s = orient_task_generate(&c, out_dir.c_str())) return report(s);
  std::printf("wrote %s/{task.json,db.ordb,queries.csv,queries/}\n", out_dir.c_str());
  return kOk;
}

// ---- train-fusion ----
struct TrainArgs {
  std::string task, out, variant = "adaptive";
  std::size_t epochs = 200;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
  const std::string loss_csv = a.out + ".loss.csv";
  print_config("train-fusion", {{"task", a.task},
                                {"variant", a.variant},
                                {"epochs", num(a.epochs)},
                                {"lr", num(a.lr)},
                                {"seed", num(static_cast<std::size_t>(a.seed))},
                                {"out", a.out},
                                {"loss_csv", loss_csv}});
  orient_train_config cfg;
  orient_train_config_default(&cfg);
  cfg.variant = a.variant.c_str();
  cfg.epochs = a.epochs;
  cfg.learning_rate = a.lr;
  cfg.seed = a.seed;
  Guard g;
  double first = 0.0, last = 0.0;
  if (auto s = orient_train_fusion(a.task.c_str(), &cfg, loss_csv.c_str(), &g.params, &first, &last)) return report(s);
  if (auto s = orient_params_save(g.params, a.out.c_str())) return report(s);
  std::printf("initial_loss: %.6f\nfinal_loss: %.6f\nwrote %s (%zu values)\n", first, last, a.out.c_str(),
              orient_params_size(g.params));
  return kOk;
}

// ---- eval ----
struct EvalArgs {
  std::string db, queries, method = "fast", variant = "average", params, out, records;
  double threshold_deg = 30.0;
  std::size_t klocal = 32;
};

int run_eval(const EvalArgs& a) {
  print_config("eval", {{"db", a.db},
                        {"queries", a.queries},
                        {"method", a.method},
                        {"variant", a.variant},
                        {"params", a.params.empty() ? "none" : a.params},
                        {"threshold_deg", num(a.threshold_deg)},
                        {"klocal", num(a.klocal)}});
  Guard g;
  if (auto s = orient_db_load(a.db.c_str(), &g.db)) return report(s);
  if (!a.params.empty()) {
    if (auto s = orient_params_load(a.params.c_str(), &g.params)) return report(s);
  }
  orient_retrieve_config cfg;
  orient_retrieve_config_default(&cfg);
  cfg.method = a.method.c_str();
  cfg.variant = a.variant.c_str();
  cfg.k_local = a.klocal;
  char* json = nullptr;
  if (auto s = orient_eval(g.db, a.queries.c_str(), g.params, &cfg, a.threshold_deg,
                           a.records.empty() ? nullptr : a.records.c_str(), &json)) {
    return report(s);
  }
  const std::string text = json;
  orient_string_free(json);
  std::printf("%s\n", text.c_str());
  if (!a.out.empty() && !write_text(a.out, text)) {
    std::fprintf(stderr, "error: IoError: cannot write '%s'\n", a.out.c_str());
    return kData;
  }
  return kOk;
}

// ---- bench ----
struct BenchArgs {
  std::string task, sweep, out_dir;
  std::size_t epochs = 200;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
  const std::string out_dir = a.out_dir.empty() ? (fs::path(a.task) / "bench").string() : a.out_dir;
  print_config("bench", {{"task", a.task},
                         {"sweep", a.sweep},
                         {"out_dir", out_dir},
                         {"epochs", num(a.epochs)},
                         {"lr", num(a.lr)},
                         {"seed", num(static_cast<std::size_t>(a.seed))}});
  orient_train_config cfg;
  orient_train_config_default(&cfg);
  cfg.epochs = a.epochs;
  cfg.learning_rate = a.lr;
  cfg.seed = a.seed;
  char* json = nullptr;
  if (auto s = orient_bench(a.task.c_str(), a.sweep.c_str(), &cfg, out_dir.c_str(), &json)) return report(s);
  std::printf("%s\nwrote %s/%s.{json,csv}\n", json, out_dir.c_str(), a.sweep.c_str());
  orient_string_free(json);
  return kOk;
}

// ---- gradcheck ----
int run_gradcheck(std::uint64_t seed) {
  print_config("gradcheck", {{"seed", num(static_cast<std::size_t>(seed))}, {"instances", "20"}});
  double fusion = 0.0, loss = 0.0;
  if (auto s = orient_gradcheck(seed, 20, &fusion, &loss)) return report(s);
  const double worst = std::max(fusion, loss);
  std::printf("fusion_max_rel_err: %.3e\nloss_max_rel_err: %.3e\n", fusion, loss);
  if (worst < 1e-3) {
    std::printf("max_rel_err < 1e-3 (%.3e)\n", worst);
    return kOk;
  }
  std::printf("max_rel_err >= 1e-3 (%.3e)\n", worst);
  return kCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orientation retrieval against rotation-labeled reference databases"};
  app.require_subcommand(1);
  app.set_version_flag("--version", orient_version());

  BuildDbArgs build;
  auto* c_build = app.add_subcommand("build-db", "Build a reference database from images or pyramids");
  auto* o_images = c_build->add_option("--images", build.images, "One image directory per object")->check(CLI::ExistingDirectory);
  auto* o_pyrs = c_build->add_option("--pyramids", build.pyramids, "One pyramid directory per object");
  o_images->excludes(o_pyrs);
  c_build->add_option("--rotations", build.rotations, "Rotation manifest per object (index,r00..r22)")->required();
  c_build->add_option("--out", build.out, "Output .ordb path")->required();
  c_build->add_option("--kac", build.kac, "Anchors per object")->capture_default_str();
  c_build->add_option("--scales", build.scales, "Scale dims, e.g. 13x13,26x26,52x52")->capture_default_str();
  c_build->add_option("--channels", build.channels, "Orientation bins")->capture_default_str();

  RetrieveArgs ret;
  auto* c_ret = app.add_subcommand("retrieve", "Estimate the orientation of one query");
  c_ret->add_option("--db", ret.db)->required();
  c_ret->add_option("--query", ret.query, "Query pyramid (.fpyr) or PGM/PPM image")->required();
  c_ret->add_option("--method", ret.method)->capture_default_str();
  c_ret->add_option("--variant", ret.variant)->capture_default_str();
  c_ret->add_option("--params", ret.params, "Fusion parameters (.fprm)");
  c_ret->add_option("--klocal", ret.klocal)->capture_default_str();
  c_ret->add_option("--json", ret.json, "Also write the result as JSON");

  orient_task_config synth;
  orient_task_config_default(&synth);
  std::string synth_out;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic task directory");
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--objects", synth.objects)->capture_default_str();
  c_synth->add_option("--refs", synth.refs)->capture_default_str();
  c_synth->add_option("--noise", synth.noise)->capture_default_str();
  c_synth->add_option("--outliers", synth.outliers)->capture_default_str();
  c_synth->add_option("--out-dir", synth_out)->required();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train-fusion", "Fit fusion parameters on a synthetic task");
  c_train->add_option("--task", train.task, "Task directory")->required();
  c_train->add_option("--epochs", train.epochs)->capture_default_str();
  c_train->add_option("--lr", train.lr)->capture_default_str();
  c_train->add_option("--seed", train.seed)->capture_default_str();
  c_train->add_option("--variant", train.variant)->capture_default_str();
  c_train->add_option("--out", train.out, "Output .fprm path")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a query manifest against a database");
  c_eval->add_option("--db", ev.db)->required();
  c_eval->add_option("--queries", ev.queries, "Query manifest CSV")->required();
  c_eval->add_option("--method", ev.method)->capture_default_str();
  c_eval->add_option("--variant", ev.variant)->capture_default_str();
  c_eval->add_option("--params", ev.params);
  c_eval->add_option("--threshold-deg", ev.threshold_deg)->capture_default_str();
  c_eval->add_option("--klocal", ev.klocal)->capture_default_str();
  c_eval->add_option("--out", ev.out, "Write the metrics JSON here");
  c_eval->add_option("--records", ev.records, "Write per-query records CSV here");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Run a benchmark sweep on a task");
  c_bench->add_option("--task", bench.task)->required();
  c_bench->add_option("--sweep", bench.sweep)->required()->check(CLI::IsMember({"refs", "variant", "method"}));
  c_bench->add_option("--out-dir", bench.out_dir, "Defaults to <task>/bench");
  c_bench->add_option("--epochs", bench.epochs, "Training epochs for the variant sweep")->capture_default_str();
  c_bench->add_option("--lr", bench.lr)->capture_default_str();
  c_bench->add_option("--seed", bench.seed)->capture_default_str();

  std::uint64_t gc_seed = 1;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of all analytic gradients");
  c_gc->add_option("--seed", gc_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*c_build) {
    if (build.images.empty() && build.pyramids.empty()) {
      std::fprintf(stderr, "error: one of --images or --pyramids is required\n");
      return kUsage;
    }
    return run_build_db(build);
  }
  if (*c_ret) return run_retrieve(ret);
  if (*c_synth) return run_synth(synth, synth_out);
  if (*c_train) return run_train(train);
  if (*c_eval) return run_eval(ev);
  if (*c_bench) return run_bench(bench);
  if (*c_gc) return run_gradcheck(gc_seed);
  return kUsage;
}
