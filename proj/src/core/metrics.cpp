// SPDX-License-Identifier: Apache-2.0
#include "metrics.hpp"

#include <cstdio>
#include <fstream>

#include "error.hpp"

namespace orient {

EvalRecord make_record(std::size_t query_id, std::string true_category, const Rotation& true_rotation,
                       std::string predicted_category, const Rotation& predicted_rotation, std::size_t comparisons,
                       double elapsed_s, std::size_t predicted_ref) {
  EvalRecord r;
  r.query_id = query_id;
  r.true_category = std::move(true_category);
  r.true_rotation = true_rotation;
  r.predicted_category = std::move(predicted_category);
  r.predicted_rotation = predicted_rotation;
  r.geodesic_error = geodesic_distance(predicted_rotation, true_rotation);
  r.comparisons = comparisons;
  r.elapsed_s = elapsed_s;
  r.predicted_ref = predicted_ref;
  return r;
}

double class_acc(std::span<const EvalRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyEval, "no evaluation records");
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.predicted_category == r.true_category;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double rota_acc(std::span<const EvalRecord> records, double threshold_degrees) {
  if (records.empty()) throw Error(ErrorCode::EmptyEval, "no evaluation records");
  const double threshold = threshold_degrees / 180.0;
  std::size_t hits = 0;
  for (const auto& r : records) hits += r.predicted_category == r.true_category && r.geodesic_error < threshold;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

void write_records_csv(std::span<const EvalRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write records '" + path + "'");
  out << "query_id,true_category,predicted_category,geodesic_error_deg,comparisons,elapsed_s\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, ",%.6f,%zu,%.6g\n", r.geodesic_error * 180.0, r.comparisons, r.elapsed_s);
    out << r.query_id << ',' << r.true_category << ',' << r.predicted_category << buf;
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

}  // namespace orient
