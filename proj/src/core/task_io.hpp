// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "bench.hpp"
#include "synth.hpp"

namespace orient {

/// Every SynthTask field as a JSON object (pretty-printed).
std::string task_to_json(const SynthTask& task);
/// Missing fields keep their defaults; unknown fields and wrong types throw
/// FormatError. The result is validated.
SynthTask task_from_json(const std::string& text);

SynthTask load_task(const std::string& path);
void save_task(const SynthTask& task, const std::string& path);

/// Query manifest: "id,category,file,r00,...,r22" with files relative to the
/// manifest's directory.
std::vector<LabeledQuery> read_query_manifest(const std::string& path);
/// Writes <dir>/queries/<id>.fpyr and <dir>/queries.csv.
void write_query_manifest(const std::vector<LabeledQuery>& queries, const std::string& dir);

/// Task directory layout: task.json, db.ordb, queries.csv, queries/.
struct TaskPaths {
  std::string task_json;
  std::string db;
  std::string queries_csv;
};
TaskPaths task_paths(const std::string& dir);

/// Generates the task and writes the whole directory; returns the data so
/// callers can keep using it.
SynthData write_task_dir(const SynthTask& task, const std::string& dir);

}  // namespace orient
