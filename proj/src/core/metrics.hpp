// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "so3.hpp"

namespace orient {

struct EvalRecord {
  std::size_t query_id = 0;
  std::string true_category;
  Rotation true_rotation;
  std::string predicted_category;
  Rotation predicted_rotation;
  double geodesic_error = 0.0;  // normalized to [0, 1]
  std::size_t comparisons = 0;
  double elapsed_s = 0.0;
  std::size_t predicted_ref = 0;
};

EvalRecord make_record(std::size_t query_id, std::string true_category, const Rotation& true_rotation,
                       std::string predicted_category, const Rotation& predicted_rotation, std::size_t comparisons,
                       double elapsed_s, std::size_t predicted_ref = 0);

/// Fraction of records with the right category. Throws EmptyEval.
double class_acc(std::span<const EvalRecord> records);

/// Fraction with the right category and geodesic error strictly below
/// threshold_degrees / 180 (normalized units). Throws EmptyEval.
double rota_acc(std::span<const EvalRecord> records, double threshold_degrees = 30.0);

/// "query_id,true_category,predicted_category,geodesic_error_deg,comparisons,elapsed_s"
void write_records_csv(std::span<const EvalRecord> records, const std::string& path);

}  // namespace orient
