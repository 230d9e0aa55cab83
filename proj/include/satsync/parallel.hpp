#pragma once

namespace satsync {

/// Selects between an OpenMP kernel and its serial reference. Both produce
/// bit-identical results; the serial path exists for testing and benchmarking.
enum class Execution { kSerial, kParallel };

/// Number of OpenMP threads available to parallel kernels (1 without OpenMP).
int max_threads();

}  // namespace satsync
