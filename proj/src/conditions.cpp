#include "spikelab/conditions.hpp"

#include <cmath>
#include <cstring>

#include "spikelab/kernels.hpp"
#include "spikelab/rng.hpp"

namespace spikelab {
namespace {

constexpr int kSlotU = 100, kSlotKx = 101, kSlotKe1 = 102, kSlotW = 103;
constexpr int kSlotGw2 = 104, kSlotV3 = 105, kSlotE1 = 106, kSlotTerms = 107;
constexpr int kSlotStep = 110, kSlotNoiseZ = 111;

// G = <grad H0, grad m> = (u_1 - q x_1/N) / sqrt(N), q = x.u, u = dH0.
double overlap_gradient_inner(const Model& mdl, const double* x, const double* u) {
  const auto n = static_cast<std::size_t>(mdl.N);
  const double q = kernels().dot(x, u, n);
  return (u[0] - q * x[0] / mdl.N) / std::sqrt(static_cast<double>(mdl.N));
}

// One pure-noise dynamics step, ignoring the signal part of the model.
// Finite beta: v = x + sqrt(2h) P_x zeta - h beta dH0(x), retract.
// beta = inf: Euler step of the noise-only gradient flow.
void noise_only_step(const Model& mdl, double* x, double h, double beta, Rng* rng) {
  const auto n = static_cast<std::size_t>(mdl.N);
  double* g = detail::scratch(n, kSlotStep);
  if (is_gradient_descent(beta)) {
    noise_gradient(mdl, x, g);
    project_tangent(x, g, mdl.N);
    for (std::size_t i = 0; i < n; ++i) x[i] -= h * g[i];
  } else {
    double* zeta = detail::scratch(n, kSlotNoiseZ);
    rng->fill_gaussian(zeta, n);
    project_tangent(x, zeta, mdl.N);
    const double s = std::sqrt(2.0 * h);
    if (beta > 0) {
      noise_gradient(mdl, x, g);
      const double hb = h * beta;
      for (std::size_t i = 0; i < n; ++i) x[i] += s * zeta[i] - hb * g[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) x[i] += s * zeta[i];
    }
  }
  retract_sphere(x, mdl.N);
}

void check_beta(double beta) {
  if (!(beta >= 0)) fail("conditions: beta must be >= 0 or inf");
}

}  // namespace

double l0m_exact(const Model& mdl, double beta, const double* x) {
  check_beta(beta);
  const auto n = static_cast<std::size_t>(mdl.N);
  const double kappa = kappa_curvature(mdl.N);
  const double m = overlap_m(x, mdl.N);
  if (!is_gradient_descent(beta) && beta == 0) return -kappa * m;
  double* u = detail::scratch(n, kSlotU);
  noise_gradient(mdl, x, u);
  const double G = overlap_gradient_inner(mdl, x, u);
  if (is_gradient_descent(beta)) return -G;
  return -kappa * m - beta * G;
}

double l0_squared_m(const Model& mdl, double beta, const double* x) {
  check_beta(beta);
  const auto n = static_cast<std::size_t>(mdl.N);
  const int N = mdl.N;
  const double kappa = kappa_curvature(N);
  const double m = overlap_m(x, N);
  const bool gd = is_gradient_descent(beta);
  if (!gd && beta == 0) return kappa * kappa * m;

  const std::size_t nterms = mdl.mixture.terms.size();
  const double rootN = std::sqrt(static_cast<double>(N));

  // Shared contractions of H0 at x.
  double* u = detail::scratch(n, kSlotU);      // dH0
  double* kx = detail::scratch(n, kSlotKx);    // d2H0 x  (= sum_p (p-1) grad H_p)
  double* ke1 = detail::scratch(n, kSlotKe1);  // d2H0 e1
  double* e1 = detail::scratch(n, kSlotE1);
  noise_gradient(mdl, x, u);
  std::memset(e1, 0, n * sizeof(double));
  e1[0] = 1.0;
  noise_hvp(mdl, x, e1, ke1);

  double* hterm = detail::scratch(nterms ? nterms : 1, kSlotTerms);
  noise_energy_terms(mdl, x, hterm);
  double q = 0, xkx = 0, txxx = 0;  // x.u,  x^T d2H0 x,  d3H0[x,x,x]
  {
    Vec wts(nterms);
    for (std::size_t i = 0; i < nterms; ++i) {
      const double p = mdl.mixture.terms[i].p;
      q += p * hterm[i];
      xkx += p * (p - 1) * hterm[i];
      txxx += p * (p - 1) * (p - 2) * hterm[i];
      wts[i] = p - 1;
    }
    noise_gradient_weighted(mdl, x, wts.data(), kx);
  }

  // w = sqrt(N) dG = d2H0 e1 - (x_1/N)(u + d2H0 x) - (q/N) e1.
  double* w = detail::scratch(n, kSlotW);
  {
    const double c1 = x[0] / N, c2 = q / N;
    for (std::size_t i = 0; i < n; ++i) w[i] = ke1[i] - c1 * (u[i] + kx[i]);
    w[0] -= c2;
  }
  const double G = overlap_gradient_inner(mdl, x, u);
  const double x_dot_w = kernels().dot(x, w, n);  // sqrt(N) (x . dG)
  const double u_dot_w = kernels().dot(u, w, n);  // sqrt(N) (u . dG)

  // <grad H0, grad G> = u.dG - q (x.dG)/N.
  const double inner_h0_g = (u_dot_w - q * x_dot_w / N) / rootN;
  if (gd) return inner_h0_g;  // L0^2 m = <grad H0, grad(<grad H0, grad m>)>

  // Lap_S G needs the trace and x^T(.)x of the ambient Hessian of G:
  //   sqrt(N) d2G = d3H0[.,.,e1] - (x_1/N)(2 d2H0 + d3H0[x])
  //                 - (1/N)[(u + d2H0 x) e1^T + e1 (u + d2H0 x)^T].
  double* v3 = detail::scratch(n, kSlotV3);  // v3_i = sum_j d3H0[e_i,e_j,e_j]
  noise_third_diag(mdl, x, v3);
  const double tr_k = noise_hessian_trace(mdl, x);
  const double v3_dot_x = kernels().dot(v3, x, n);
  const double uk1 = u[0] + kx[0];

  double txx1;  // d3H0[x,x,e1] = sum_p (p-1)(p-2) (grad H_p)_1
  {
    Vec wts(nterms);
    for (std::size_t i = 0; i < nterms; ++i) {
      const double p = mdl.mixture.terms[i].p;
      wts[i] = (p - 1) * (p - 2);
    }
    double* gw2 = detail::scratch(n, kSlotGw2);
    noise_gradient_weighted(mdl, x, wts.data(), gw2);
    txx1 = gw2[0];
  }

  const double tr_d2g = (v3[0] - (x[0] / N) * (2.0 * tr_k + v3_dot_x) - 2.0 * uk1 / N) / rootN;
  const double xd2gx =
      (txx1 - (x[0] / N) * (2.0 * xkx + txxx) - 2.0 * (q + xkx) * x[0] / N) / rootN;
  const double x_dot_dg = x_dot_w / rootN;
  const double lap_g = tr_d2g - xd2gx / N - kappa * x_dot_dg;

  return kappa * kappa * m + kappa * beta * G - beta * lap_g + beta * beta * inner_h0_g;
}

MeanWithError semigroup_l0m_estimate(const Model& mdl, double beta, const double* x, double t,
                                     const SemigroupOptions& opts) {
  check_beta(beta);
  if (t < 0) fail("semigroup_l0m_estimate: t must be >= 0");
  if (t == 0) return {l0m_exact(mdl, beta, x), 0.0};
  if (opts.h <= 0) fail("semigroup_l0m_estimate: h must be > 0");
  const auto n = static_cast<std::size_t>(mdl.N);
  const auto nsteps = static_cast<std::size_t>(std::ceil(t / opts.h - 1e-9));
  const double h = t / static_cast<double>(nsteps);

  if (is_gradient_descent(beta)) {
    Vec y(x, x + n);
    for (std::size_t s = 0; s < nsteps; ++s) noise_only_step(mdl, y.data(), h, beta, nullptr);
    return {l0m_exact(mdl, beta, y.data()), 0.0};
  }

  if (opts.n_replicas < 2) fail("semigroup_l0m_estimate: need at least 2 replicas");
  double sum = 0, sumsq = 0;
  Vec y(n);
  for (int r = 0; r < opts.n_replicas; ++r) {
    std::memcpy(y.data(), x, n * sizeof(double));
    Rng rng(derive_seed(opts.seed, {0x5e317fULL, static_cast<std::uint64_t>(r)}));
    for (std::size_t s = 0; s < nsteps; ++s) noise_only_step(mdl, y.data(), h, beta, &rng);
    const double v = l0m_exact(mdl, beta, y.data());
    sum += v;
    sumsq += v * v;
  }
  const double R = opts.n_replicas;
  const double mean = sum / R;
  const double var = std::max(0.0, (sumsq - R * mean * mean) / (R - 1));
  return {mean, std::sqrt(var / R)};
}

SemigroupCurve semigroup_l0m_curve(const Model& mdl, double beta, const double* x, double T,
                                   double grid_dt, const SemigroupOptions& opts) {
  check_beta(beta);
  if (T <= 0) fail("semigroup_l0m_curve: T must be > 0");
  if (grid_dt <= 0 || grid_dt > T) fail("semigroup_l0m_curve: need 0 < grid_dt <= T");
  if (opts.h <= 0) fail("semigroup_l0m_curve: h must be > 0");
  const auto n = static_cast<std::size_t>(mdl.N);
  const auto ngrid = static_cast<std::size_t>(std::ceil(T / grid_dt - 1e-9));
  const auto sub = static_cast<std::size_t>(std::ceil(grid_dt / opts.h - 1e-9));
  const double h = grid_dt / static_cast<double>(sub);  // steps land on grid points

  SemigroupCurve curve;
  curve.t.resize(ngrid + 1);
  for (std::size_t j = 0; j <= ngrid; ++j) curve.t[j] = grid_dt * static_cast<double>(j);
  curve.mean.assign(ngrid + 1, 0.0);
  curve.std_error.assign(ngrid + 1, 0.0);

  const bool gd = is_gradient_descent(beta);
  const int R = gd ? 1 : opts.n_replicas;
  if (!gd && R < 2) fail("semigroup_l0m_curve: need at least 2 replicas");

  Vec sum(ngrid + 1, 0.0), sumsq(ngrid + 1, 0.0);
  Vec y(n);
  for (int r = 0; r < R; ++r) {
    std::memcpy(y.data(), x, n * sizeof(double));
    Rng rng(derive_seed(opts.seed, {0x5e317fULL, static_cast<std::uint64_t>(r)}));
    double v = l0m_exact(mdl, beta, y.data());
    sum[0] += v;
    sumsq[0] += v * v;
    for (std::size_t j = 1; j <= ngrid; ++j) {
      for (std::size_t s = 0; s < sub; ++s)
        noise_only_step(mdl, y.data(), h, beta, gd ? nullptr : &rng);
      v = l0m_exact(mdl, beta, y.data());
      sum[j] += v;
      sumsq[j] += v * v;
    }
  }
  for (std::size_t j = 0; j <= ngrid; ++j) {
    const double mean = sum[j] / R;
    curve.mean[j] = mean;
    if (R > 1) {
      const double var = std::max(0.0, (sumsq[j] - R * mean * mean) / (R - 1));
      curve.std_error[j] = std::sqrt(var / R);
    }
  }
  // t = 0 is the exact value for every replica.
  curve.std_error[0] = 0.0;
  return curve;
}

ConditionReport condition1_check(const Model& mdl, double beta, const std::vector<Vec>& samples,
                                 const Condition1Options& opts) {
  if (samples.empty()) fail("condition1_check: no samples");
  if (opts.delta <= 0) fail("condition1_check: delta must be > 0");
  ConditionReport rep;
  rep.level = opts.level;
  rep.delta = opts.delta;
  rep.threshold = std::pow(static_cast<double>(mdl.N), -0.5 + opts.delta);
  rep.per_sample.reserve(samples.size());

  if (opts.level == 1 || opts.level == 2) {
    for (const Vec& x : samples) {
      double v = std::abs(l0m_exact(mdl, beta, x.data()));
      if (opts.level == 2) v = std::max(v, std::abs(l0_squared_m(mdl, beta, x.data())));
      rep.per_sample.push_back(v);
    }
  } else if (opts.level == kWeakInfinityLevel) {
    if (opts.T <= 0) fail("condition1_check: weak-infinity level requires T > 0");
    rep.T = opts.T;
    for (const Vec& x : samples) {
      SemigroupCurve c = semigroup_l0m_curve(mdl, beta, x.data(), opts.T, opts.grid_dt,
                                             opts.semigroup);
      double sup = 0, se_at_sup = 0;
      for (std::size_t j = 0; j < c.t.size(); ++j) {
        if (std::abs(c.mean[j]) >= sup) {
          sup = std::abs(c.mean[j]);
          se_at_sup = c.std_error[j];
        }
      }
      rep.per_sample.push_back(sup);
      rep.mc_std_error = std::max(rep.mc_std_error, se_at_sup);
    }
  } else {
    fail("condition1_check: exact mode supports levels 1 and 2 only; "
         "use the weak-infinity level for higher orders");
  }

  std::size_t bad = 0;
  for (double v : rep.per_sample)
    if (v > rep.threshold) ++bad;
  rep.fraction_violating = static_cast<double>(bad) / static_cast<double>(samples.size());
  return rep;
}

Condition2Curve condition2_check(const std::vector<Vec>& samples,
                                 const std::vector<double>& epsilons) {
  if (samples.empty()) fail("condition2_check: no samples");
  Condition2Curve curve;
  curve.epsilon = epsilons;
  curve.fraction.reserve(epsilons.size());
  for (double eps : epsilons) {
    std::size_t cnt = 0;
    for (const Vec& x : samples)
      if (x[0] < eps) ++cnt;
    curve.fraction.push_back(static_cast<double>(cnt) / static_cast<double>(samples.size()));
  }
  return curve;
}

double condition2_prime_fraction(const std::vector<Vec>& samples, int N, double delta) {
  if (samples.empty()) fail("condition2_prime_fraction: no samples");
  if (delta <= 0) fail("condition2_prime_fraction: delta must be > 0");
  const double thr = std::pow(static_cast<double>(N), -delta);
  std::size_t cnt = 0;
  for (const Vec& x : samples)
    if (x[0] <= thr) ++cnt;
  return static_cast<double>(cnt) / static_cast<double>(samples.size());
}

}  // namespace spikelab
