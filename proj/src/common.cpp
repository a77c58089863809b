#include "spikelab/common.hpp"

#include <unordered_map>

namespace spikelab {

bool phi_uses_integer_power(double k) {
  return k == std::floor(k);
}

double phi(double k, double m) {
  if (phi_uses_integer_power(k)) return std::pow(m, k);
  return m > 0 ? std::pow(m, k) : 0.0;
}

double phi_d1(double k, double m) {
  if (phi_uses_integer_power(k)) {
    if (k == 0) return 0.0;
    return k * std::pow(m, k - 1);
  }
  return m > 0 ? k * std::pow(m, k - 1) : 0.0;
}

double phi_d2(double k, double m) {
  if (phi_uses_integer_power(k)) {
    if (k == 0 || k == 1) return 0.0;
    return k * (k - 1) * std::pow(m, k - 2);
  }
  // One-sided profile: second derivative vanishes on m <= 0.  For k in (1,2)
  // it diverges as m -> 0+; callers guard that regime.
  return m > 0 ? k * (k - 1) * std::pow(m, k - 2) : 0.0;
}

void project_tangent(const double* x, double* v, int N) {
  double xv = 0;
  for (int i = 0; i < N; ++i) xv += x[i] * v[i];
  const double c = xv / N;
  for (int i = 0; i < N; ++i) v[i] -= c * x[i];
}

void retract_sphere(double* x, int N) {
  double s = 0;
  for (int i = 0; i < N; ++i) s += x[i] * x[i];
  if (!std::isfinite(s))
    fail("retract_sphere: non-finite state (drift overflow?); aborting trajectory");
  if (s <= 0) fail("retract_sphere: zero vector");
  const double c = std::sqrt(static_cast<double>(N) / s);
  for (int i = 0; i < N; ++i) x[i] *= c;
}

Vec make_sphere_state(int N, Vec x) {
  if (static_cast<int>(x.size()) != N) fail("make_sphere_state: dimension mismatch");
  double s = 0;
  for (double xi : x) s += xi * xi;
  if (std::abs(s - N) > 1e-8 * N)
    fail("make_sphere_state: |x|^2 = " + std::to_string(s) + ", expected " + std::to_string(N));
  retract_sphere(x.data(), N);
  return x;
}

void fail(const std::string& what) { throw std::invalid_argument(what); }

namespace detail {

double* scratch(std::size_t n, int slot) {
  thread_local std::unordered_map<int, Vec> pool;
  Vec& buf = pool[slot];
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

}  // namespace detail
}  // namespace spikelab
