// Backend selection: AVX2 if compiled in and the CPU reports support, else
// scalar.  SPIKELAB_KERNELS=scalar|avx2 overrides (useful for A/B timing and
// for exercising the reference path on AVX2 hardware).
#include "spikelab/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>

namespace spikelab {
namespace {

bool avx2_usable() {
#if defined(SPIKELAB_HAVE_X86_INTRIN) && (defined(__x86_64__) || defined(_M_X64))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelOps* resolve(const std::string& name) {
  if (name == "scalar") return &kScalarKernels;
#if defined(SPIKELAB_HAVE_X86_INTRIN) && (defined(__x86_64__) || defined(_M_X64))
  if (name == "avx2") {
    if (!avx2_usable()) throw std::runtime_error("kernel backend 'avx2': CPU lacks AVX2/FMA");
    return &kAvx2Kernels;
  }
#endif
  throw std::runtime_error("unknown kernel backend '" + name + "' (available: " +
                           available_kernel_backends() + ")");
}

std::atomic<const KernelOps*> g_active{nullptr};

const KernelOps* select_default() {
  if (const char* env = std::getenv("SPIKELAB_KERNELS")) return resolve(env);
  return avx2_usable() ? resolve("avx2") : &kScalarKernels;
}

}  // namespace

const KernelOps& kernels() {
  const KernelOps* ops = g_active.load(std::memory_order_acquire);
  if (!ops) {
    ops = select_default();
    g_active.store(ops, std::memory_order_release);
  }
  return *ops;
}

void set_kernel_backend(const std::string& name) {
  g_active.store(resolve(name), std::memory_order_release);
}

std::string available_kernel_backends() {
  std::string s = "scalar";
  if (avx2_usable()) s += ",avx2";
  return s;
}

}  // namespace spikelab
