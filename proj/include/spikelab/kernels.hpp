// Dense inner-loop kernels with runtime-dispatched implementations.
//
// Tensor contractions in this codebase reduce to four primitives on
// contiguous doubles: dot products, axpy updates, batched row-dots (trailing
// index contraction), and batched axpy over slabs (leading index
// contraction).  A scalar reference implementation always exists;
// SIMD variants (AVX2+FMA where compiled in and supported by the CPU) are
// selected once at startup.  Selection can be forced with the environment
// variable SPIKELAB_KERNELS=scalar|avx2, or from code via set_kernel_backend
// (used by the equivalence tests).
//
// SIMD and scalar variants may differ in floating-point summation order, so
// agreement is contracted up to relative tolerance, not bitwise.  Within one
// process configuration results are bit-reproducible.
#pragma once

#include <cstddef>
#include <string>

namespace spikelab {

struct KernelOps {
  const char* name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
  // out[r] = sum_j T[r*n + j] * x[j], r = 0..rows-1
  void (*rows_dot)(const double* T, std::size_t rows, std::size_t n, const double* x, double* out);
  // out[c] += sum_i x[i] * T[i*slab + c], c = 0..slab-1
  void (*slabs_axpy)(const double* T, std::size_t nslabs, std::size_t slab, const double* x,
                     double* out);
};

extern const KernelOps kScalarKernels;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelOps kAvx2Kernels;
#endif

// Active ops table (env override honored on first call).
const KernelOps& kernels();

// Force a backend by name ("scalar", "avx2"); throws if unavailable on this
// machine/build.  Intended for tests and benchmarking.
void set_kernel_backend(const std::string& name);

// Names of all backends usable in this process.
std::string available_kernel_backends();

}  // namespace spikelab
