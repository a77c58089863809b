// Deterministic RNG streams.
//
// Every stochastic routine takes an explicit Rng (or a seed from which it
// builds one).  Stream seeds are derived from a master seed plus a list of
// integer labels via a SplitMix64-based mixing chain, so the set of streams an
// experiment uses is a pure function of (master seed, task structure) and is
// independent of scheduling/worker count.  Gaussians come from our own
// polar-method generator: std::normal_distribution is not bit-stable across
// standard library implementations, and reproducibility of trajectories is a
// contract here.
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "spikelab/common.hpp"

namespace spikelab {

struct SplitMix64 {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

// Mixes label into the running seed; order-sensitive and avalanching.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t label);

// derive_seed(master, {a,b,c}) = fold of mix_seed over the labels.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> labels);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t u64();
  // Uniform on the open interval (0,1); safe under log().
  double u01();
  // Standard normal via Marsaglia's polar method (cached spare deviate).
  double gaussian();
  void fill_gaussian(double* out, std::size_t n);

 private:
  // mt19937_64 is specified bit-exactly by the standard, so streams are
  // portable; it is seeded through SplitMix64 to decorrelate nearby seeds.
  std::mt19937_64 eng_;
  double spare_ = 0;
  bool has_spare_ = false;
};

}  // namespace spikelab
