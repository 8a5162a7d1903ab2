#pragma once

namespace otsep {

// Caps the number of OpenMP threads used by the parallel kernels
// (cost-matrix batches, restarts, sweep trials). 0 restores the runtime
// default. All kernels produce bit-identical results for any thread count.
void set_max_threads(int n);
int max_threads();
bool openmp_enabled();

}  // namespace otsep
