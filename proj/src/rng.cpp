#include "spikelab/rng.hpp"

#include <cmath>

namespace spikelab {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t label) {
  SplitMix64 sm{seed ^ (label + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2))};
  return sm.next();
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t s = master;
  for (std::uint64_t l : labels) s = mix_seed(s, l);
  return s;
}

Rng::Rng(std::uint64_t seed) {
  SplitMix64 sm{seed};
  eng_.seed(sm.next());
}

std::uint64_t Rng::u64() { return eng_(); }

double Rng::u01() {
  // 53 random bits shifted into (0,1): never returns 0 or 1.
  return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * u01() - 1.0;
    v = 2.0 * u01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

void Rng::fill_gaussian(double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = gaussian();
}

}  // namespace spikelab
