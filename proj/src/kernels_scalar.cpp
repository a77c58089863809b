// Reference kernels: plain loops, no explicit vectorization pragmas.  These
// define the semantics the SIMD variants are tested against.
#include "spikelab/kernels.hpp"

namespace spikelab {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void rows_dot_scalar(const double* T, std::size_t rows, std::size_t n, const double* x,
                     double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot_scalar(T + r * n, x, n);
}

void slabs_axpy_scalar(const double* T, std::size_t nslabs, std::size_t slab, const double* x,
                       double* out) {
  for (std::size_t i = 0; i < nslabs; ++i) axpy_scalar(out, x[i], T + i * slab, slab);
}

}  // namespace

const KernelOps kScalarKernels = {"scalar", dot_scalar, axpy_scalar, rows_dot_scalar,
                                  slabs_axpy_scalar};

}  // namespace spikelab
