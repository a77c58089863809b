// Shared basic types and sphere geometry helpers.
//
// Convention used throughout: states live on the sphere of radius sqrt(N) in
// R^N, i.e. |x|^2 = N.  The overlap coordinate is m(x) = x_1 / sqrt(N) in
// [-1, 1].  Infinite inverse temperature (beta = inf) selects gradient
// descent; all routines that accept beta document whether they allow it.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace spikelab {

using Vec = std::vector<double>;

inline constexpr double kInfBeta = std::numeric_limits<double>::infinity();
inline constexpr double kPi = 3.14159265358979323846;

inline bool is_gradient_descent(double beta) { return std::isinf(beta); }

// Curvature constant of the overlap coordinate: the sphere Laplacian acts on
// m as  (Lap m)(x) = -kappa_N * m(x)  with kappa_N = (N-1)/N.
inline double kappa_curvature(int N) { return static_cast<double>(N - 1) / N; }

inline double sphere_radius(int N) { return std::sqrt(static_cast<double>(N)); }

inline double overlap_m(const double* x, int N) {
  return x[0] / std::sqrt(static_cast<double>(N));
}
inline double overlap_m(const Vec& x) { return overlap_m(x.data(), static_cast<int>(x.size())); }

// phi(m): signal profile.  Integer k: plain power m^k (defined on all of
// [-1,1]).  Non-integer k: max(m,0)^k, the one-sided continuation.
bool phi_uses_integer_power(double k);
double phi(double k, double m);
double phi_d1(double k, double m);
double phi_d2(double k, double m);

// In-place tangential projection at x (radius sqrt(N)): v <- v - (x.v/N) x.
void project_tangent(const double* x, double* v, int N);

// Rescale x to the sphere of radius sqrt(N).  Throws if |x| = 0.
void retract_sphere(double* x, int N);

// Validates |x|^2 = N up to rel. tol 1e-8, then retracts exactly.
Vec make_sphere_state(int N, Vec x);

[[noreturn]] void fail(const std::string& what);

namespace detail {
// Per-thread scratch buffers keyed by slot id; grow-only.  Evaluation chains
// request a handful of distinct slots so nested calls never alias.
double* scratch(std::size_t n, int slot);
}  // namespace detail

}  // namespace spikelab
