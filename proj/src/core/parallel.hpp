// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace orient {

/// Worker count: ORIENT_THREADS when set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) across worker threads. Each index runs exactly
/// once; callers write results into per-index slots so output order never
/// depends on scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace orient
