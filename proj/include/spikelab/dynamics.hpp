// Spherical Langevin dynamics and gradient descent.
//
// Finite beta (projected Euler-Maruyama with retraction):
//   v = x + sqrt(2h) P_x zeta - h beta grad H(x),   x' = sqrt(N) v / |v|,
// with zeta a standard Gaussian vector.  The noise is projected to the
// tangent space; the drift uses the ambient gradient, whose radial part is
// removed by the retraction at O(h).  The retraction also supplies the
// curvature drift of the sphere Laplacian: E[m(x')] - m = -h kappa_N m + O(h^2),
// matching the generator L = Lap - beta <grad H, grad .>.
//
// beta = inf is gradient flow dX/dt = -P_x grad H (Euler or classical RK4
// stages, each stage point retracted to the sphere).
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>

#include "spikelab/landscape.hpp"
#include "spikelab/rng.hpp"

namespace spikelab {

enum class Scheme { kEuler, kRk4 };

struct IntegratorConfig {
  double beta = 1;  // kInfBeta selects gradient descent
  double h = 0;     // 0: default_step_size(beta, lambda, k)
  double t_end = 1;
  double record_every = 0;         // time between records; 0: every step.
                                   // Must satisfy h <= record_every <= t_end.
  Scheme scheme = Scheme::kEuler;  // kRk4 only with beta = inf
  std::uint64_t seed = 0;          // noise stream; unused for beta = inf
  std::vector<double> hit_thresholds;  // fills Trajectory::hitting
  bool record_energy = true;
  bool record_l0m = true;
  bool record_gradnorm = false;
};

// min(1e-3, 1e-2 / (c+1)) with c = (finite beta ? beta : 1) * lambda * k:
// shrinks with the strength of the deterministic pull.
double default_step_size(double beta, double lambda, double k);

struct Trajectory {
  std::vector<double> t, m;
  std::vector<double> energy, l0m, gradnorm;  // empty unless recorded
  // First recorded time with m >= threshold (one-sided), per requested
  // threshold; nullopt when the overlap never got there.
  std::map<double, std::optional<double>> hitting;
  Vec x_final;
  std::size_t steps = 0;
};

// Single steps, exposed for direct testing.
void langevin_step(const Model& mdl, double* x, double h, double beta, Rng& rng);
void gd_step(const Model& mdl, double* x, double h, Scheme scheme);

// Called after every step with (step_index, t, m, state); return false to
// halt the run early (the trajectory keeps everything recorded up to that
// point).  The state pointer is only valid during the call.
using StepObserver = std::function<bool(std::size_t, double, double, const double*)>;

Trajectory run_trajectory(const Model& mdl, const Vec& x0, const IntegratorConfig& cfg,
                          const StepObserver& observer = nullptr);

// First recorded time with m >= threshold; scans the record (one-sided on m,
// not |m|).  nullopt when no recorded sample qualifies.
std::optional<double> hitting_time(const Trajectory& traj, double threshold);

}  // namespace spikelab
