#pragma once

namespace prnet {

/// Threads used by the matrix kernels. Results are bitwise reproducible for
/// a fixed count.
void set_num_threads(int threads);
int num_threads();

}  // namespace prnet
