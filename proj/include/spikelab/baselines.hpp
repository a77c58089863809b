// Spiked-tensor observation in the original unit-sphere normalization and
// tensor power iteration, for threshold comparison against the dynamics.
//
//   Y = sqrt(N) * lambda * v^{tensor k} + W,   v = e_1 (unit vector),
//
// W i.i.d. standard Gaussian (unsymmetrized).  Power iteration contracts the
// first slot: x <- normalize(Y[., x, ..., x]); slot choice is a convention
// for unsymmetrized W and does not change the law.
//
// M independent observations reduce to M = 1 via lambda -> sqrt(M) lambda
// (averaging the Y's rescales the noise by 1/sqrt(M)).
#pragma once

#include <cstdint>

#include "spikelab/landscape.hpp"

namespace spikelab {

struct SpikedTensor {
  int k = 0;          // integer order >= 2
  int N = 0;
  double lambda = 0;  // spike strength in the unit-sphere normalization
  std::uint64_t seed = 0;
  Tensor y;  // dense N^k entries
};

SpikedTensor make_spiked_tensor(int k, int N, double lambda, std::uint64_t seed,
                                std::uint64_t entry_budget = kDefaultEntryBudget);

// Average of M independent observations sharing the spike: the noise part
// shrinks to W/sqrt(M) in law.
SpikedTensor make_spiked_tensor_average(int k, int N, double lambda, int M, std::uint64_t seed,
                                        std::uint64_t entry_budget = kDefaultEntryBudget);

inline double effective_lambda(double lambda, int M) { return std::sqrt(double(M)) * lambda; }

struct PowerIterationResult {
  Vec x;                // final unit vector
  Vec overlap;          // x_t . e_1 after each iteration (iters entries)
  bool restarted = false;  // hit a zero contraction and redrew x0
};

// x0 must be a unit vector; restarts (zero contraction) draw a fresh uniform
// unit vector from `seed`.
PowerIterationResult tensor_power_iteration(const SpikedTensor& spiked, Vec x0, int iters,
                                            std::uint64_t seed = 0);

}  // namespace spikelab
