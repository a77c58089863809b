// Closed-form layer: the overlap drift and effective potential of the
// pure-signal landscape, an adaptive ODE integrator with dense output for
// comparison curves, power-law upper-bound envelopes with their blow-up
// times, and the recovery-threshold table.
//
// Conventions (radius-sqrt(N) sphere, generator L = Lap - beta <grad H, grad .>):
//   pure signal H = -N lambda phi(m):
//     finite beta:  dm/dt = beta*lambda*phi'(m)*(1 - m^2) - kappa_N * m
//     beta = inf (gradient flow dX = -grad H dt):  dm/dt = lambda*phi'(m)*(1 - m^2)
//   effective potential (finite beta, N -> inf):
//     V(m) = beta*lambda*phi(m) + (1/2) log(1 - m^2),  |m| < 1.
#pragma once

#include <functional>

#include "spikelab/common.hpp"

namespace spikelab {

double drift_m(double k, double beta, double lambda, int N, double m);

// Requires finite beta and |m| < 1.
double effective_potential(double k, double beta, double lambda, double m);

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  // Stop (with dense-output crossing location) once y >= stop_above.
  double stop_above = std::numeric_limits<double>::infinity();
  double h_init = 0;  // 0: choose automatically
  std::size_t max_steps = 10'000'000;
};

struct OdePoint {
  double t, y, dy;
};

struct OdeSolution {
  std::vector<OdePoint> pts;  // accepted steps, including t0 and the endpoint
  bool stopped_early = false;
  double stop_time = 0;  // crossing time of stop_above when stopped_early
  double t_begin() const { return pts.front().t; }
  double t_end() const { return pts.back().t; }
  // Cubic-Hermite dense output on the accepted mesh.
  double value_at(double t) const;
};

// Adaptive Dormand-Prince RK45 for a scalar ODE y' = f(t, y).
OdeSolution integrate_ode(const std::function<double(double, double)>& f, double t0, double y0,
                          double t_end, const OdeOptions& opts = {});

// Overlap evolution of the pure-signal landscape from m(0) = m0.
OdeSolution solve_pure_signal_ode(double k, double beta, double lambda, int N, double m0,
                                  double t_end, const OdeOptions& opts = {});

// Envelope f(t) = a * (1 - (gamma-1) c a^{gamma-1} t)^{-1/(gamma-1)}, the
// solution of f' = c f^gamma, f(0) = a.  Requires gamma > 1, a > 0, c > 0 and
// t below the blow-up time.
double power_law_bound(double a, double c, double gamma, double t);

// Blow-up time of the envelope: ((gamma-1) c a^{gamma-1})^{-1}.
double power_law_blowup_time(double a, double c, double gamma);

// Critical exponents for lambda = N^{-alpha} scaling: alpha_c(n) with
// n = 1, 2, ... sidedness/moment order, n = inf allowed, and the companion
// k_c(n) = 2 - 1/n boundary in k.
double alpha_c_threshold(double k, double n);
double k_c_threshold(double n);

struct ThresholdRow {
  double n;  // may be +inf
  double alpha_c;
  double k_c;
};
std::vector<ThresholdRow> threshold_table(double k, const std::vector<double>& ns);

}  // namespace spikelab
