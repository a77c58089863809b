#include "spikelab/baselines.hpp"

#include <cmath>
#include <cstring>

#include "spikelab/kernels.hpp"
#include "spikelab/rng.hpp"

namespace spikelab {
namespace {

void check_spiked_args(int k, int N, double lambda) {
  if (k < 2) fail("spiked tensor: k must be an integer >= 2");
  if (N < 2) fail("spiked tensor: N must be >= 2");
  if (lambda < 0) fail("spiked tensor: lambda must be >= 0");
}

std::uint64_t checked_entries(int N, int k, std::uint64_t budget) {
  std::uint64_t entries = 1;
  for (int i = 0; i < k; ++i) {
    if (entries > budget / static_cast<std::uint64_t>(N))
      fail("spiked tensor: N^k exceeds the entry budget (raise it explicitly to proceed)");
    entries *= static_cast<std::uint64_t>(N);
  }
  return entries;
}

}  // namespace

SpikedTensor make_spiked_tensor(int k, int N, double lambda, std::uint64_t seed,
                                std::uint64_t entry_budget) {
  check_spiked_args(k, N, lambda);
  checked_entries(N, k, entry_budget);
  SpikedTensor s;
  s.k = k;
  s.N = N;
  s.lambda = lambda;
  s.seed = seed;
  s.y = sample_tensor(k, N, seed);
  // v = e_1, so v^{tensor k} has a single nonzero entry at index (0,...,0).
  s.y.w[0] += std::sqrt(static_cast<double>(N)) * lambda;
  return s;
}

SpikedTensor make_spiked_tensor_average(int k, int N, double lambda, int M, std::uint64_t seed,
                                        std::uint64_t entry_budget) {
  check_spiked_args(k, N, lambda);
  if (M < 1) fail("spiked tensor: M must be >= 1");
  checked_entries(N, k, entry_budget);
  SpikedTensor s;
  s.k = k;
  s.N = N;
  s.lambda = lambda;
  s.seed = seed;
  s.y = sample_tensor(k, N, derive_seed(seed, {0x6d6f62ULL, 0}));
  for (int l = 1; l < M; ++l) {
    Tensor w = sample_tensor(k, N, derive_seed(seed, {0x6d6f62ULL, static_cast<std::uint64_t>(l)}));
    for (std::size_t i = 0; i < s.y.w.size(); ++i) s.y.w[i] += w.w[i];
  }
  const double inv = 1.0 / M;
  for (double& e : s.y.w) e *= inv;
  s.y.w[0] += std::sqrt(static_cast<double>(N)) * lambda;
  return s;
}

PowerIterationResult tensor_power_iteration(const SpikedTensor& spiked, Vec x0, int iters,
                                            std::uint64_t seed) {
  const int N = spiked.N, k = spiked.k;
  if (static_cast<int>(x0.size()) != N) fail("tensor_power_iteration: x0 dimension mismatch");
  if (iters < 1) fail("tensor_power_iteration: iters must be >= 1");
  const double n0 = std::sqrt(kernels().dot(x0.data(), x0.data(), x0.size()));
  if (std::abs(n0 - 1.0) > 1e-8) fail("tensor_power_iteration: x0 must be a unit vector");

  PowerIterationResult res;
  res.x = std::move(x0);
  Rng restart_rng(derive_seed(seed, {0x7069ULL}));
  Vec buf_a(spiked.y.w.size() / N), buf_b;

  for (int it = 0; it < iters; ++it) {
    // z_i = Y[., x, ..., x]_i: contract the trailing slot k-1 times.
    const double* cur = spiked.y.w.data();
    std::size_t rows = spiked.y.w.size() / N;
    double* dst = buf_a.data();
    for (int c = 0; c < k - 1; ++c) {
      kernels().rows_dot(cur, rows, N, res.x.data(), dst);
      cur = dst;
      rows /= N;
      if (dst == buf_a.data()) {
        if (buf_b.empty()) buf_b.resize(buf_a.size() / N + 1);
        dst = buf_b.data();
      } else {
        dst = buf_a.data();
      }
    }
    const double* z = cur;
    const double zn = std::sqrt(kernels().dot(z, z, static_cast<std::size_t>(N)));
    if (zn == 0) {
      // Degenerate contraction: restart from a fresh uniform unit vector.
      res.restarted = true;
      double s = 0;
      do {
        restart_rng.fill_gaussian(res.x.data(), res.x.size());
        s = kernels().dot(res.x.data(), res.x.data(), res.x.size());
      } while (s == 0);
      const double inv = 1.0 / std::sqrt(s);
      for (double& xi : res.x) xi *= inv;
    } else {
      for (int i = 0; i < N; ++i) res.x[i] = z[i] / zn;
    }
    res.overlap.push_back(res.x[0]);
  }
  return res;
}

}  // namespace spikelab
