// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace orient {

struct GradCheckReport {
  double fusion_max_rel_err = 0.0;
  double loss_max_rel_err = 0.0;
  std::size_t fusion_checked = 0;  // parameter entries compared
  std::size_t loss_checked = 0;    // score entries compared
  std::string worst;               // where the largest error occurred

  double max_rel_err() const { return fusion_max_rel_err > loss_max_rel_err ? fusion_max_rel_err : loss_max_rel_err; }
};

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compares fuse_backward (all learned variants) and loss_grad with central
/// finite differences over `instances` random problems derived from seed.
/// Fusion uses step 1e-4 on parameters; the loss uses step 1e-5 on scores.
GradCheckReport run_gradcheck(std::uint64_t seed, std::size_t instances = 20);

}  // namespace orient
