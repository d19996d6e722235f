// SPDX-License-Identifier: Apache-2.0
#include "orient/orient.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "bench.hpp"
#include "error.hpp"
#include "fusion.hpp"
#include "gradcheck.hpp"
#include "image.hpp"
#include "metrics.hpp"
#include "nce.hpp"
#include "pyramid.hpp"
#include "refdb.hpp"
#include "retrieval.hpp"
#include "synth.hpp"
#include "task_io.hpp"

struct orient_pyramid {
  orient::FeaturePyramid value;
};

struct orient_db {
  orient::ReferenceDB value;
};

struct orient_params {
  orient::FusionParams value;
};

namespace {

using Json = nlohmann::ordered_json;

thread_local std::string g_last_error;

orient_status to_status(orient::ErrorCode code) {
  using orient::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return ORIENT_ERR_INVALID_ARGUMENT;
    case ErrorCode::DegenerateInput: return ORIENT_ERR_DEGENERATE_INPUT;
    case ErrorCode::InvalidK: return ORIENT_ERR_INVALID_K;
    case ErrorCode::EmptyImage: return ORIENT_ERR_EMPTY_IMAGE;
    case ErrorCode::IoError: return ORIENT_ERR_IO;
    case ErrorCode::FormatError: return ORIENT_ERR_FORMAT;
    case ErrorCode::VersionError: return ORIENT_ERR_VERSION;
    case ErrorCode::DimensionError: return ORIENT_ERR_DIMENSION;
    case ErrorCode::ShapeMismatch: return ORIENT_ERR_SHAPE_MISMATCH;
    case ErrorCode::ConfigMismatch: return ORIENT_ERR_CONFIG_MISMATCH;
    case ErrorCode::InsufficientReferences: return ORIENT_ERR_INSUFFICIENT_REFERENCES;
    case ErrorCode::NonFiniteLoss: return ORIENT_ERR_NON_FINITE_LOSS;
    case ErrorCode::EmptyEval: return ORIENT_ERR_EMPTY_EVAL;
  }
  return ORIENT_ERR_INTERNAL;
}

orient_status fail(orient_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs body, translating every exception into a status and the thread's last
// error message.
template <typename F>
orient_status guarded(F&& body) {
  try {
    body();
    return ORIENT_OK;
  } catch (const orient::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(ORIENT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ORIENT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(ORIENT_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw orient::Error(orient::ErrorCode::InvalidArgument, what);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

struct ExtractSettings {
  orient::ExtractorConfig extractor;
  bool local_norm = true;
  orient::NormConfig norm;
};

ExtractSettings settings_from(const orient_extract_config* cfg) {
  ExtractSettings s;
  if (cfg) {
    if (cfg->scales && *cfg->scales) s.extractor.scale_dims = orient::parse_scale_dims(cfg->scales);
    if (cfg->channels) s.extractor.channels = cfg->channels;
    s.local_norm = cfg->norm_window > 0;
    if (cfg->norm_window) s.norm.window = cfg->norm_window;
    if (cfg->sigma_floor > 0.0) s.norm.sigma_floor = cfg->sigma_floor;
  }
  s.extractor.validate();
  return s;
}

orient::FeaturePyramid pyramid_from_image(const std::string& path, const ExtractSettings& s) {
  const orient::GrayImage gray = orient::to_gray_resized(orient::read_pnm(path));
  return orient::extract(s.local_norm ? orient::local_normalize(gray, s.norm) : gray, s.extractor);
}

orient::BenchOptions bench_options(const orient_retrieve_config* cfg) {
  orient_retrieve_config defaults;
  orient_retrieve_config_default(&defaults);
  if (!cfg) cfg = &defaults;
  orient::BenchOptions opts;
  opts.method = orient::parse_method(cfg->method ? cfg->method : defaults.method);
  opts.variant = orient::parse_variant(cfg->variant ? cfg->variant : defaults.variant);
  opts.fast.k_local = cfg->k_local ? cfg->k_local : defaults.k_local;
  opts.fast.max_iters = cfg->max_iters;
  return opts;
}

const orient::FusionParams& params_or_empty(const orient_params* params, orient::FusionVariant variant) {
  static const orient::FusionParams empty;
  if (params) return params->value;
  if (variant != orient::FusionVariant::Average) {
    throw orient::Error(orient::ErrorCode::InvalidArgument,
                        std::string("variant '") + orient::variant_name(variant) + "' needs fusion parameters");
  }
  return empty;
}

orient::FitConfig fit_config(const orient_train_config* cfg, std::size_t batch_size) {
  orient_train_config defaults;
  orient_train_config_default(&defaults);
  if (!cfg) cfg = &defaults;
  orient::FitConfig fit;
  fit.variant = orient::parse_variant(cfg->variant ? cfg->variant : defaults.variant);
  fit.epochs = cfg->epochs;
  fit.learning_rate = cfg->learning_rate;
  fit.seed = cfg->seed;
  fit.weighted = cfg->weighted != 0;
  fit.batch_size = batch_size;
  return fit;
}

Json summary_object(const orient::BenchSummary& s) {
  Json j;
  j["method"] = s.method;
  j["variant"] = s.variant;
  j["class_acc"] = s.class_acc;
  j["rota_acc"] = s.rota_acc;
  j["mean_comparisons"] = s.mean_comparisons;
  j["mean_elapsed_s"] = s.mean_elapsed_s;
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw orient::Error(orient::ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << text;
}

// Renders rows of flat JSON objects as CSV with the first row's keys as header.
std::string rows_to_csv(const Json& rows) {
  std::string csv;
  if (rows.empty()) return csv;
  bool first = true;
  for (const auto& [key, value] : rows.front().items()) {
    (void)value;
    csv += (first ? "" : ",") + key;
    first = false;
  }
  csv += "\n";
  for (const auto& row : rows) {
    first = true;
    for (const auto& [key, value] : row.items()) {
      (void)key;
      csv += first ? "" : ",";
      csv += value.is_string() ? value.get<std::string>() : value.dump();
      first = false;
    }
    csv += "\n";
  }
  return csv;
}

}  // namespace

extern "C" {

const char* orient_version(void) { return "0.1.0"; }

const char* orient_status_name(orient_status status) {
  switch (status) {
    case ORIENT_OK: return "OK";
    case ORIENT_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case ORIENT_ERR_DEGENERATE_INPUT: return "DegenerateInput";
    case ORIENT_ERR_INVALID_K: return "InvalidK";
    case ORIENT_ERR_EMPTY_IMAGE: return "EmptyImage";
    case ORIENT_ERR_IO: return "IoError";
    case ORIENT_ERR_FORMAT: return "FormatError";
    case ORIENT_ERR_VERSION: return "VersionError";
    case ORIENT_ERR_DIMENSION: return "DimensionError";
    case ORIENT_ERR_SHAPE_MISMATCH: return "ShapeMismatch";
    case ORIENT_ERR_CONFIG_MISMATCH: return "ConfigMismatch";
    case ORIENT_ERR_INSUFFICIENT_REFERENCES: return "InsufficientReferences";
    case ORIENT_ERR_NON_FINITE_LOSS: return "NonFiniteLoss";
    case ORIENT_ERR_EMPTY_EVAL: return "EmptyEval";
    case ORIENT_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

const char* orient_last_error(void) { return g_last_error.c_str(); }

void orient_string_free(char* s) { std::free(s); }

void orient_extract_config_default(orient_extract_config* cfg) {
  if (!cfg) return;
  cfg->scales = nullptr;
  cfg->channels = 8;
  cfg->norm_window = 32;
  cfg->sigma_floor = 1e-6;
}

orient_status orient_pyramid_from_image(const char* path, const orient_extract_config* cfg, orient_pyramid** out) {
  return guarded([&] {
    require(path && out, "path and out must be non-null");
    auto p = std::make_unique<orient_pyramid>();
    p->value = pyramid_from_image(path, settings_from(cfg));
    *out = p.release();
  });
}

orient_status orient_pyramid_load(const char* path, orient_pyramid** out) {
  return guarded([&] {
    require(path && out, "path and out must be non-null");
    *out = new orient_pyramid{orient::load_pyramid(path)};
  });
}

orient_status orient_pyramid_save(const orient_pyramid* pyramid, const char* path) {
  return guarded([&] {
    require(pyramid && path, "pyramid and path must be non-null");
    orient::save_pyramid(pyramid->value, path);
  });
}

size_t orient_pyramid_num_scales(const orient_pyramid* pyramid) { return pyramid ? pyramid->value.num_scales() : 0; }

uint32_t orient_pyramid_channels(const orient_pyramid* pyramid) { return pyramid ? pyramid->value.channels() : 0; }

void orient_pyramid_free(orient_pyramid* pyramid) { delete pyramid; }

orient_status orient_db_build(const orient_object_source* objects, size_t num_objects, int inputs_are_images,
                              const orient_extract_config* cfg, size_t k_ac, orient_db** out) {
  return guarded([&] {
    require(objects && num_objects > 0 && out, "at least one object and a non-null out are required");
    const ExtractSettings settings = settings_from(cfg);
    std::vector<orient::ObjectSource> sources;
    for (size_t o = 0; o < num_objects; ++o) {
      const orient_object_source& obj = objects[o];
      require(obj.label && obj.rotations_path, "object label and rotations path must be non-null");
      require(obj.files || obj.num_files == 0, "object files must be non-null");
      orient::ObjectSource src;
      src.category = obj.label;
      src.rotations = orient::read_rotation_manifest(obj.rotations_path);
      if (src.rotations.size() != obj.num_files) {
        throw orient::Error(orient::ErrorCode::ConfigMismatch,
                            "object '" + src.category + "': manifest '" + obj.rotations_path + "' lists " +
                                std::to_string(src.rotations.size()) + " rotations for " +
                                std::to_string(obj.num_files) + " files");
      }
      src.pyramids.resize(obj.num_files);
      for (size_t i = 0; i < obj.num_files; ++i) {
        require(obj.files[i] != nullptr, "file path must be non-null");
        auto pyr = inputs_are_images ? pyramid_from_image(obj.files[i], settings) : orient::load_pyramid(obj.files[i]);
        src.pyramids[i] = std::make_shared<const orient::FeaturePyramid>(std::move(pyr));
      }
      sources.push_back(std::move(src));
    }
    *out = new orient_db{orient::ReferenceDB::build(std::move(sources), k_ac)};
  });
}

orient_status orient_db_load(const char* path, orient_db** out) {
  return guarded([&] {
    require(path && out, "path and out must be non-null");
    *out = new orient_db{orient::ReferenceDB::load(path)};
  });
}

orient_status orient_db_save(const orient_db* db, const char* path) {
  return guarded([&] {
    require(db && path, "db and path must be non-null");
    db->value.save(path);
  });
}

size_t orient_db_num_objects(const orient_db* db) { return db ? db->value.num_objects() : 0; }

orient_status orient_db_object_info(const orient_db* db, size_t object, char* label_buf, size_t buf_size, size_t* refs,
                                    size_t* k_ac) {
  return guarded([&] {
    require(db != nullptr, "db must be non-null");
    require(object < db->value.num_objects(), "object index out of range");
    const auto& obj = db->value.object(object);
    if (label_buf && buf_size > 0) {
      const size_t n = std::min(buf_size - 1, obj.category.size());
      std::memcpy(label_buf, obj.category.data(), n);
      label_buf[n] = '\0';
    }
    if (refs) *refs = obj.entries.size();
    if (k_ac) *k_ac = obj.anchor_ids.size();
  });
}

orient_status orient_db_fingerprint(const orient_db* db, char** out) {
  return guarded([&] {
    require(db && out, "db and out must be non-null");
    *out = copy_string(db->value.fingerprint());
  });
}

orient_status orient_db_geometry(const orient_db* db, char** scales, uint32_t* channels) {
  return guarded([&] {
    require(db && scales && channels, "db, scales and channels must be non-null");
    *scales = copy_string(orient::format_scale_dims(db->value.scale_dims()));
    *channels = db->value.channels();
  });
}

void orient_db_free(orient_db* db) { delete db; }

orient_status orient_params_load(const char* path, orient_params** out) {
  return guarded([&] {
    require(path && out, "path and out must be non-null");
    *out = new orient_params{orient::load_params(path)};
  });
}

orient_status orient_params_save(const orient_params* params, const char* path) {
  return guarded([&] {
    require(params && path, "params and path must be non-null");
    orient::save_params(params->value, path);
  });
}

orient_status orient_params_init(size_t scales, uint32_t channels, size_t hidden, uint64_t seed, orient_params** out) {
  return guarded([&] {
    require(out != nullptr, "out must be non-null");
    require(scales > 0 && channels > 0 && hidden > 0, "scales, channels and hidden must be positive");
    *out = new orient_params{orient::FusionParams::average_init(scales, channels, hidden, seed)};
  });
}

size_t orient_params_size(const orient_params* params) { return params ? params->value.values().size() : 0; }

void orient_params_free(orient_params* params) { delete params; }

void orient_retrieve_config_default(orient_retrieve_config* cfg) {
  if (!cfg) return;
  cfg->method = "fast";
  cfg->variant = "average";
  cfg->k_local = 32;
  cfg->max_iters = 0;
}

orient_status orient_retrieve(const orient_db* db, const orient_pyramid* query, const orient_params* params,
                              const orient_retrieve_config* cfg, orient_result* out) {
  return guarded([&] {
    require(db && query && out, "db, query and out must be non-null");
    const orient::BenchOptions opts = bench_options(cfg);
    const auto& p = params_or_empty(params, opts.variant);
    const orient::RetrievalResult r =
        opts.method == orient::Method::Greedy ? orient::greedy_search(query->value, db->value, p, opts.variant)
                                              : orient::fast_retrieve(query->value, db->value, p, opts.variant, opts.fast);
    orient_result res{};
    const size_t n = std::min(sizeof res.category - 1, r.category.size());
    std::memcpy(res.category, r.category.data(), n);
    res.object = r.object;
    res.ref_index = r.ref_index;
    const auto m = r.rotation.row_major();
    std::copy(m.begin(), m.end(), res.rotation);
    res.score = r.score;
    res.comparisons = r.comparisons;
    res.iterations = r.iterations;
    res.elapsed_s = r.elapsed_s;
    *out = res;
  });
}

void orient_task_config_default(orient_task_config* cfg) {
  if (!cfg) return;
  const orient::SynthTask t;
  cfg->seed = t.seed;
  cfg->objects = t.objects;
  cfg->refs = t.refs;
  cfg->queries = t.queries;
  cfg->noise = t.noise;
  cfg->outliers = t.outlier_fraction;
  cfg->k_ac = t.k_ac;
}

orient_status orient_task_generate(const orient_task_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg && out_dir, "config and out_dir must be non-null");
    orient::SynthTask t;
    t.seed = cfg->seed;
    t.objects = cfg->objects;
    t.refs = cfg->refs;
    t.queries = cfg->queries;
    t.noise = cfg->noise;
    t.outlier_fraction = cfg->outliers;
    t.k_ac = cfg->k_ac;
    orient::write_task_dir(t, out_dir);
  });
}

void orient_train_config_default(orient_train_config* cfg) {
  if (!cfg) return;
  const orient::FitConfig f;
  cfg->variant = "adaptive";
  cfg->epochs = f.epochs;
  cfg->learning_rate = f.learning_rate;
  cfg->seed = f.seed;
  cfg->weighted = f.weighted ? 1 : 0;
  cfg->hidden = 64;
}

orient_status orient_train_fusion(const char* task_dir, const orient_train_config* cfg, const char* loss_csv_path,
                                  orient_params** out, double* initial_loss, double* final_loss) {
  return guarded([&] {
    require(task_dir && out, "task_dir and out must be non-null");
    const orient::SynthTask task = orient::load_task(orient::task_paths(task_dir).task_json);
    const orient::FitConfig fit = fit_config(cfg, task.batch_size);
    const size_t hidden = cfg && cfg->hidden ? cfg->hidden : 64;
    const orient::SynthData data = orient::gen_task(task);
    const auto train = orient::gen_train_set(task, data);
    const auto init =
        orient::FusionParams::average_init(task.extractor.scale_dims.size(), task.extractor.channels, hidden, fit.seed);
    orient::FitResult result = orient::fit_fusion(train, fit, init);
    if (loss_csv_path) orient::write_loss_csv(result.loss_history, loss_csv_path);
    if (initial_loss) *initial_loss = result.loss_history.empty() ? 0.0 : result.loss_history.front();
    if (final_loss) *final_loss = result.loss_history.empty() ? 0.0 : result.loss_history.back();
    *out = new orient_params{std::move(result.params)};
  });
}

orient_status orient_eval(const orient_db* db, const char* queries_csv, const orient_params* params,
                          const orient_retrieve_config* cfg, double threshold_deg, const char* records_csv_path,
                          char** summary_json) {
  return guarded([&] {
    require(db && queries_csv && summary_json, "db, queries_csv and summary_json must be non-null");
    orient::BenchOptions opts = bench_options(cfg);
    opts.threshold_deg = threshold_deg;
    const auto queries = orient::read_query_manifest(queries_csv);
    const auto report = orient::run_benchmark(db->value, queries, params_or_empty(params, opts.variant), opts);
    if (records_csv_path) orient::write_records_csv(report.records, records_csv_path);
    Json config;
    config["k_local"] = opts.fast.k_local;
    config["db"] = db->value.fingerprint();
    *summary_json = copy_string(orient::summary_json(report.summary, config.dump()));
  });
}

orient_status orient_bench(const char* task_dir, const char* sweep, const orient_train_config* train,
                           const char* out_dir, char** table_json) {
  return guarded([&] {
    require(task_dir && sweep && table_json, "task_dir, sweep and table_json must be non-null");
    const std::string kind = sweep;
    const orient::SynthTask task = orient::load_task(orient::task_paths(task_dir).task_json);
    Json rows = Json::array();
    if (kind == "refs") {
      orient::BenchOptions opts;
      opts.method = orient::Method::Fast;
      for (const auto& row : orient::sweep_refs(task, opts)) {
        Json r;
        r["refs"] = row.refs;
        r["k_ac"] = row.k_ac;
        r.update(summary_object(row.summary));
        rows.push_back(r);
      }
    } else if (kind == "method") {
      const auto db = orient::ReferenceDB::load(orient::task_paths(task_dir).db);
      const auto queries = orient::read_query_manifest(orient::task_paths(task_dir).queries_csv);
      const auto cmp = orient::compare_methods(db, queries, orient::FusionParams(), orient::FusionVariant::Average, {});
      for (const auto* report : {&cmp.greedy, &cmp.fast}) {
        Json r = summary_object(report->summary);
        r["agreement"] = cmp.agreement;
        r["max_comparison_ratio"] = cmp.max_comparison_ratio;
        rows.push_back(r);
      }
    } else if (kind == "variant") {
      orient::AblationOptions opts;
      opts.fit = fit_config(train, task.batch_size);
      for (const auto& row : orient::run_ablation(task, opts)) {
        Json r;
        r["variant"] = row.variant;
        r["local_norm"] = row.local_norm;
        r["weighted"] = row.weighted;
        r["fitted"] = row.fitted;
        r["initial_loss"] = row.initial_loss;
        r["final_loss"] = row.final_loss;
        r.update(summary_object(row.summary));
        rows.push_back(r);
      }
    } else {
      throw orient::Error(orient::ErrorCode::InvalidArgument,
                          "unknown sweep '" + kind + "' (valid: refs, variant, method)");
    }
    if (out_dir) {
      std::filesystem::create_directories(out_dir);
      write_file(std::filesystem::path(out_dir) / (kind + ".json"), rows.dump(2) + "\n");
      write_file(std::filesystem::path(out_dir) / (kind + ".csv"), rows_to_csv(rows));
    }
    *table_json = copy_string(rows.dump(2));
  });
}

orient_status orient_gradcheck(uint64_t seed, size_t instances, double* fusion_max_rel_err, double* loss_max_rel_err) {
  return guarded([&] {
    require(instances > 0, "instances must be positive");
    const auto report = orient::run_gradcheck(seed, instances);
    if (fusion_max_rel_err) *fusion_max_rel_err = report.fusion_max_rel_err;
    if (loss_max_rel_err) *loss_max_rel_err = report.loss_max_rel_err;
  });
}

}  // extern "C"
