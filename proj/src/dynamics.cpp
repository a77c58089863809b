#include "spikelab/dynamics.hpp"

#include <cmath>
#include <cstring>

#include "spikelab/conditions.hpp"
#include "spikelab/kernels.hpp"

namespace spikelab {
namespace {

constexpr int kSlotGrad = 90, kSlotNoise = 91;
constexpr int kSlotRkK1 = 92, kSlotRkK2 = 93, kSlotRkK3 = 94, kSlotRkK4 = 95, kSlotRkY = 96;

void check_cfg(const IntegratorConfig& cfg, double h) {
  if (cfg.beta < 0) fail("dynamics: beta must be >= 0");
  if (cfg.t_end < 0) fail("dynamics: t_end must be >= 0");
  if (cfg.scheme == Scheme::kRk4 && !is_gradient_descent(cfg.beta))
    fail("dynamics: RK4 is only defined for gradient descent (beta = inf)");
  if (cfg.record_every > 0 && cfg.t_end > 0) {
    if (cfg.record_every < h - 1e-12 * h)
      fail("dynamics: record_every must be >= the step size");
    if (cfg.record_every > cfg.t_end * (1 + 1e-12))
      fail("dynamics: record_every must be <= t_end");
  }
}

// Non-integer k in (1, 2) makes the signal force m^{k-1} ill-posed on m <= 0
// (the descent ODE is not well-posed there), so GD must start on m > 0.
void check_gd_start(const Model& mdl, const double* x) {
  const double k = mdl.signal.k;
  if (mdl.signal.lambda > 0 && !phi_uses_integer_power(k) && k > 1 && k < 2 &&
      overlap_m(x, mdl.N) <= 0)
    fail("gd_step: ill-posed start (non-integer 1 < k < 2 requires m > 0)");
}

// -P_x grad H evaluated at retract(y); writes the retracted point into y.
void gd_field(const Model& mdl, double* y, double* out) {
  retract_sphere(y, mdl.N);
  covariant_gradient(mdl, y, out);
  for (int i = 0; i < mdl.N; ++i) out[i] = -out[i];
}

}  // namespace

double default_step_size(double beta, double lambda, double k) {
  const double strength = (is_gradient_descent(beta) ? 1.0 : beta) * lambda * k;
  return std::min(1e-3, 1e-2 / (strength + 1.0));
}

void langevin_step(const Model& mdl, double* x, double h, double beta, Rng& rng) {
  if (is_gradient_descent(beta)) fail("langevin_step: beta = inf is gd_step's job");
  const auto n = static_cast<std::size_t>(mdl.N);
  double* zeta = detail::scratch(n, kSlotNoise);
  rng.fill_gaussian(zeta, n);
  project_tangent(x, zeta, mdl.N);
  const double s = std::sqrt(2.0 * h);
  if (beta > 0) {
    double* g = detail::scratch(n, kSlotGrad);
    total_gradient(mdl, x, g);
    const double hb = h * beta;
    for (std::size_t i = 0; i < n; ++i) x[i] += s * zeta[i] - hb * g[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) x[i] += s * zeta[i];
  }
  retract_sphere(x, mdl.N);  // fails with a diagnostic on non-finite state
}

void gd_step(const Model& mdl, double* x, double h, Scheme scheme) {
  check_gd_start(mdl, x);
  const auto n = static_cast<std::size_t>(mdl.N);
  if (scheme == Scheme::kEuler) {
    double* g = detail::scratch(n, kSlotGrad);
    covariant_gradient(mdl, x, g);
    for (std::size_t i = 0; i < n; ++i) x[i] -= h * g[i];
    retract_sphere(x, mdl.N);
    return;
  }
  double* k1 = detail::scratch(n, kSlotRkK1);
  double* k2 = detail::scratch(n, kSlotRkK2);
  double* k3 = detail::scratch(n, kSlotRkK3);
  double* k4 = detail::scratch(n, kSlotRkK4);
  double* y = detail::scratch(n, kSlotRkY);
  const std::size_t bytes = n * sizeof(double);
  std::memcpy(y, x, bytes);
  gd_field(mdl, y, k1);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * h * k1[i];
  gd_field(mdl, y, k2);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * h * k2[i];
  gd_field(mdl, y, k3);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + h * k3[i];
  gd_field(mdl, y, k4);
  for (std::size_t i = 0; i < n; ++i)
    x[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  retract_sphere(x, mdl.N);
}

Trajectory run_trajectory(const Model& mdl, const Vec& x0, const IntegratorConfig& cfg,
                          const StepObserver& observer) {
  const double h =
      cfg.h > 0 ? cfg.h : default_step_size(cfg.beta, mdl.signal.lambda, mdl.signal.k);
  check_cfg(cfg, h);
  const auto nsteps =
      cfg.t_end > 0 ? static_cast<std::size_t>(std::ceil(cfg.t_end / h - 1e-9)) : 0;
  const std::size_t stride =
      cfg.record_every > 0
          ? std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.record_every / h)))
          : 1;
  const bool gd = is_gradient_descent(cfg.beta);

  Trajectory traj;
  Vec x = make_sphere_state(mdl.N, x0);
  Rng rng(cfg.seed);
  const auto n = static_cast<std::size_t>(mdl.N);
  Vec g(n);

  auto record = [&](double t) {
    traj.t.push_back(t);
    traj.m.push_back(overlap_m(x.data(), mdl.N));
    if (cfg.record_energy) traj.energy.push_back(total_energy(mdl, x.data()));
    if (cfg.record_l0m) traj.l0m.push_back(l0m_exact(mdl, cfg.beta, x.data()));
    if (cfg.record_gradnorm) {
      covariant_gradient(mdl, x.data(), g.data());
      traj.gradnorm.push_back(std::sqrt(kernels().dot(g.data(), g.data(), n)));
    }
  };

  record(0.0);
  for (std::size_t step = 0; step < nsteps; ++step) {
    if (gd)
      gd_step(mdl, x.data(), h, cfg.scheme);
    else
      langevin_step(mdl, x.data(), h, cfg.beta, rng);
    ++traj.steps;
    const double t = static_cast<double>(step + 1) * h;
    const bool last = (step + 1 == nsteps);
    if ((step + 1) % stride == 0 || last) record(t);
    if (observer && !observer(step, t, overlap_m(x.data(), mdl.N), x.data())) {
      if (!((step + 1) % stride == 0 || last)) record(t);
      break;
    }
  }
  traj.x_final = std::move(x);
  for (double thr : cfg.hit_thresholds) traj.hitting[thr] = hitting_time(traj, thr);
  return traj;
}

std::optional<double> hitting_time(const Trajectory& traj, double threshold) {
  if (traj.t.empty()) fail("hitting_time: empty trajectory record");
  for (std::size_t i = 0; i < traj.t.size(); ++i)
    if (traj.m[i] >= threshold) return traj.t[i];
  return std::nullopt;
}

}  // namespace spikelab
