#pragma once

namespace salengine {

/// Caps worker threads used by kernels and batch prediction. n <= 0 restores
/// the host default (one per core).
void set_num_threads(int n);
int num_threads();

/// SALENGINE_THREADS when set to a positive integer, otherwise `fallback`.
int threads_from_env(int fallback);

}  // namespace salengine
