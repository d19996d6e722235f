// SPDX-License-Identifier: Apache-2.0
#include "task_io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "error.hpp"

namespace orient {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

// Field table shared by the writer and the reader so they cannot drift apart.
using Setter = std::function<void(SynthTask&, const Json&)>;
using Getter = std::function<Json(const SynthTask&)>;

template <typename T>
std::pair<Getter, Setter> field(T SynthTask::*member) {
  return {[member](const SynthTask& t) { return Json(t.*member); },
          [member](SynthTask& t, const Json& j) { t.*member = j.get<T>(); }};
}

const std::vector<std::pair<std::string, std::pair<Getter, Setter>>>& fields() {
  static const std::vector<std::pair<std::string, std::pair<Getter, Setter>>> table = {
      {"seed", field(&SynthTask::seed)},
      {"objects", field(&SynthTask::objects)},
      {"refs", field(&SynthTask::refs)},
      {"queries", field(&SynthTask::queries)},
      {"noise", field(&SynthTask::noise)},
      {"outlier_fraction", field(&SynthTask::outlier_fraction)},
      {"local_norm", field(&SynthTask::local_norm)},
      {"scale_dims",
       {[](const SynthTask& t) { return Json(format_scale_dims(t.extractor.scale_dims)); },
        [](SynthTask& t, const Json& j) { t.extractor.scale_dims = parse_scale_dims(j.get<std::string>()); }}},
      {"channels",
       {[](const SynthTask& t) { return Json(t.extractor.channels); },
        [](SynthTask& t, const Json& j) { t.extractor.channels = j.get<std::uint32_t>(); }}},
      {"norm_window",
       {[](const SynthTask& t) { return Json(t.norm.window); },
        [](SynthTask& t, const Json& j) { t.norm.window = j.get<std::size_t>(); }}},
      {"sigma_floor",
       {[](const SynthTask& t) { return Json(t.norm.sigma_floor); },
        [](SynthTask& t, const Json& j) { t.norm.sigma_floor = j.get<double>(); }}},
      {"k_ac", field(&SynthTask::k_ac)},
      {"train_samples", field(&SynthTask::train_samples)},
      {"batch_size", field(&SynthTask::batch_size)},
      {"max_rotation_noise_deg", field(&SynthTask::max_rotation_noise_deg)},
      {"max_feature_noise", field(&SynthTask::max_feature_noise)},
      {"lobes_per_object", field(&SynthTask::lobes_per_object)},
      {"lobe_concentration_min", field(&SynthTask::lobe_concentration_min)},
      {"lobe_concentration_max", field(&SynthTask::lobe_concentration_max)},
      {"texture_contrast", field(&SynthTask::texture_contrast)},
      {"texture_weight", field(&SynthTask::texture_weight)},
      {"min_aspect", field(&SynthTask::min_aspect)},
      {"parts_per_object", field(&SynthTask::parts_per_object)},
      {"extent_min", field(&SynthTask::extent_min)},
      {"extent_max", field(&SynthTask::extent_max)},
  };
  return table;
}

std::string format_rotation_fields(const Rotation& r) {
  std::string out;
  char buf[32];
  for (double v : r.row_major()) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out += buf;
  }
  return out;
}

}  // namespace

std::string task_to_json(const SynthTask& task) {
  Json j = Json::object();
  for (const auto& [name, accessors] : fields()) j[name] = accessors.first(task);
  return j.dump(2) + "\n";
}

SynthTask task_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::FormatError, std::string("task JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::FormatError, "task JSON must be an object");
  SynthTask task;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& table = fields();
    const auto match = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == it.key(); });
    if (match == table.end()) throw Error(ErrorCode::FormatError, "task JSON: unknown field '" + it.key() + "'");
    try {
      match->second.second(task, it.value());
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::FormatError, "task JSON: field '" + it.key() + "': " + e.what());
    }
  }
  task.validate();
  return task;
}

SynthTask load_task(const std::string& path) { return task_from_json(read_text(path)); }

void save_task(const SynthTask& task, const std::string& path) { write_text(path, task_to_json(task)); }

std::vector<LabeledQuery> read_query_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open query manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,category,file", 0) != 0) {
    throw Error(ErrorCode::FormatError, "query manifest '" + path + "' lacks the id,category,file header");
  }
  std::vector<LabeledQuery> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + ":" + std::to_string(line_no);
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    if (cols.size() != 12) throw Error(ErrorCode::FormatError, where + ": expected 12 columns");
    LabeledQuery q;
    std::array<double, 9> m{};
    try {
      q.id = std::stoul(cols[0]);
      for (std::size_t i = 0; i < 9; ++i) m[i] = std::stod(cols[3 + i]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::FormatError, where + ": non-numeric field");
    }
    q.category = cols[1];
    try {
      q.rotation = Rotation::from_matrix(m);
    } catch (const Error& e) {
      throw Error(ErrorCode::FormatError, where + ": " + e.what());
    }
    q.pyramid = std::make_shared<const FeaturePyramid>(load_pyramid((base / cols[2]).string()));
    out.push_back(std::move(q));
  }
  return out;
}

void write_query_manifest(const std::vector<LabeledQuery>& queries, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "queries", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + (root / "queries").string() + "': " + ec.message());
  std::string csv = "id,category,file,r00,r01,r02,r10,r11,r12,r20,r21,r22\n";
  char name[48];
  for (const auto& q : queries) {
    std::snprintf(name, sizeof name, "queries/%06zu.fpyr", q.id);
    save_pyramid(*q.pyramid, (root / name).string());
    csv += std::to_string(q.id) + "," + q.category + "," + name + format_rotation_fields(q.rotation) + "\n";
  }
  write_text((root / "queries.csv").string(), csv);
}

TaskPaths task_paths(const std::string& dir) {
  const fs::path root(dir);
  return {(root / "task.json").string(), (root / "db.ordb").string(), (root / "queries.csv").string()};
}

SynthData write_task_dir(const SynthTask& task, const std::string& dir) {
  task.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir + "': " + ec.message());
  SynthData data = gen_task(task);
  const TaskPaths paths = task_paths(dir);
  save_task(task, paths.task_json);
  ReferenceDB::build(data.sources, task.anchors()).save(paths.db);
  write_query_manifest(labeled_queries(data), dir);
  return data;
}

}  // namespace orient
