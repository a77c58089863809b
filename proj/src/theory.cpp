#include "spikelab/theory.hpp"

#include <algorithm>
#include <cmath>

namespace spikelab {

double drift_m(double k, double beta, double lambda, int N, double m) {
  if (is_gradient_descent(beta)) return lambda * phi_d1(k, m) * (1 - m * m);
  return beta * lambda * phi_d1(k, m) * (1 - m * m) - kappa_curvature(N) * m;
}

double effective_potential(double k, double beta, double lambda, double m) {
  if (is_gradient_descent(beta)) fail("effective_potential: requires finite beta");
  if (std::abs(m) >= 1) fail("effective_potential: |m| must be < 1");
  return beta * lambda * phi(k, m) + 0.5 * std::log1p(-m * m);
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// Error weights: b - b_hat of the embedded 4th-order solution.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double hermite(double t, const OdePoint& l, const OdePoint& r) {
  const double h = r.t - l.t;
  if (h <= 0) return l.y;
  const double s = (t - l.t) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * l.y + (s3 - 2 * s2 + s) * h * l.dy +
         (-2 * s3 + 3 * s2) * r.y + (s3 - s2) * h * r.dy;
}

}  // namespace

double OdeSolution::value_at(double t) const {
  if (pts.empty()) fail("OdeSolution::value_at: empty solution");
  if (t <= pts.front().t) return pts.front().y;
  if (t >= pts.back().t) return pts.back().y;
  auto it = std::lower_bound(pts.begin(), pts.end(), t,
                             [](const OdePoint& p, double tt) { return p.t < tt; });
  return hermite(t, *(it - 1), *it);
}

OdeSolution integrate_ode(const std::function<double(double, double)>& f, double t0, double y0,
                          double t_end, const OdeOptions& opts) {
  if (!(t_end > t0)) fail("integrate_ode: t_end must exceed t0");
  OdeSolution sol;
  double t = t0, y = y0;
  double dy = f(t, y);
  sol.pts.push_back({t, y, dy});
  if (y >= opts.stop_above) {
    sol.stopped_early = true;
    sol.stop_time = t;
    return sol;
  }
  double h = opts.h_init > 0 ? opts.h_init : (t_end - t0) * 1e-4;
  for (std::size_t step = 0; step < opts.max_steps && t < t_end; ++step) {
    h = std::min(h, t_end - t);
    const double k1 = dy;
    const double k2 = f(t + c2 * h, y + h * a21 * k1);
    const double k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const double k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const double k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const double k6 =
        f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const double ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double k7 = f(t + h, ynew);
    const double err_abs =
        h * std::abs(e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double tol = opts.atol + opts.rtol * std::max(std::abs(y), std::abs(ynew));
    const double err = err_abs / tol;
    if (err <= 1.0 || h <= 1e-14 * std::max(1.0, std::abs(t))) {
      t += h;
      y = ynew;
      dy = k7;  // FSAL
      sol.pts.push_back({t, y, dy});
      if (y >= opts.stop_above) {
        sol.stopped_early = true;
        // Locate the crossing inside the last step by bisection on the
        // Hermite interpolant.
        const OdePoint& l = sol.pts[sol.pts.size() - 2];
        const OdePoint& r = sol.pts.back();
        double lo = l.t, hi = r.t;
        for (int it = 0; it < 100; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (hermite(mid, l, r) >= opts.stop_above)
            hi = mid;
          else
            lo = mid;
        }
        sol.stop_time = 0.5 * (lo + hi);
        return sol;
      }
    }
    const double scale =
        err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::clamp(scale, 0.2, 5.0);
    if (!std::isfinite(y)) fail("integrate_ode: solution became non-finite");
  }
  if (t < t_end) fail("integrate_ode: step limit exhausted before t_end");
  return sol;
}

OdeSolution solve_pure_signal_ode(double k, double beta, double lambda, int N, double m0,
                                  double t_end, const OdeOptions& opts) {
  if (N < 2) fail("solve_pure_signal_ode: N must be >= 2");
  return integrate_ode([=](double, double m) { return drift_m(k, beta, lambda, N, m); }, 0.0, m0,
                       t_end, opts);
}

double power_law_bound(double a, double c, double gamma, double t) {
  if (gamma <= 1) fail("power_law_bound: requires gamma > 1");
  if (a <= 0 || c <= 0) fail("power_law_bound: requires a > 0 and c > 0");
  const double tstar = power_law_blowup_time(a, c, gamma);
  if (t < 0 || t >= tstar) fail("power_law_bound: t outside [0, blow-up time)");
  return a * std::pow(1.0 - (gamma - 1) * c * std::pow(a, gamma - 1) * t, -1.0 / (gamma - 1));
}

double power_law_blowup_time(double a, double c, double gamma) {
  if (gamma <= 1) fail("power_law_blowup_time: requires gamma > 1");
  if (a <= 0 || c <= 0) fail("power_law_blowup_time: requires a > 0 and c > 0");
  return 1.0 / ((gamma - 1) * c * std::pow(a, gamma - 1));
}

namespace {
void check_threshold_n(double n) {
  if (std::isinf(n)) return;
  if (n < 1 || n != std::floor(n)) fail("threshold: n must be a positive integer or inf");
}
}  // namespace

double alpha_c_threshold(double k, double n) {
  if (k < 1) fail("threshold: k must be >= 1");
  check_threshold_n(n);
  if (std::isinf(n)) return (k - 2) / 2;
  return (k - 1) / 2 - (n - 1) / (2 * n);
}

double k_c_threshold(double n) {
  check_threshold_n(n);
  if (std::isinf(n)) return 2.0;
  return 2.0 - 1.0 / n;
}

std::vector<ThresholdRow> threshold_table(double k, const std::vector<double>& ns) {
  std::vector<ThresholdRow> rows;
  rows.reserve(ns.size());
  for (double n : ns) rows.push_back({n, alpha_c_threshold(k, n), k_c_threshold(n)});
  return rows;
}

}  // namespace spikelab
