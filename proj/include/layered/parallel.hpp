// Copyright 2026 The layered-garments Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace layered {

/// Number of workers used by parallel_for. Defaults to the LAYERED_THREADS
/// environment variable, else 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n). Iterations are split into contiguous
/// blocks, so any body that writes only slot i is thread-count independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace layered
