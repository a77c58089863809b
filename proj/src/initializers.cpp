#include "spikelab/initializers.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "spikelab/kernels.hpp"
#include "spikelab/stats.hpp"

namespace spikelab {
namespace {

// Adaptive Simpson in the scaled domain: integrates exp(L(m) - Lmax) with
// L(m) = c log(1 - m^2), c = (N-3)/2 >= 0.
double latitude_density_scaled(double c, double lmax, double m) {
  const double one_m2 = (1.0 - m) * (1.0 + m);
  if (one_m2 <= 0) return 0.0;
  return std::exp(c * std::log(one_m2) - lmax);
}

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(double c, double lmax, double a, double fa, double b, double fb,
                        double fm, double whole, double tol, int depth) {
  const double mid = 0.5 * (a + b);
  const double lm = latitude_density_scaled(c, lmax, 0.5 * (a + mid));
  const double rm = latitude_density_scaled(c, lmax, 0.5 * (mid + b));
  const double left = simpson(a, fa, mid, fm, lm);
  const double right = simpson(mid, fm, b, fb, rm);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(c, lmax, a, fa, mid, fm, lm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(c, lmax, mid, fm, b, fb, rm, right, 0.5 * tol, depth - 1);
}

// Gaussian fill of x[lo..N) rescaled to squared norm `target`; retries the
// measure-zero all-zeros draw.
void fill_subsphere(double* x, int lo, int N, double target, Rng& rng) {
  for (;;) {
    double s = 0;
    for (int i = lo; i < N; ++i) {
      x[i] = rng.gaussian();
      s += x[i] * x[i];
    }
    if (s > 0) {
      const double scale = std::sqrt(target / s);
      for (int i = lo; i < N; ++i) x[i] *= scale;
      return;
    }
  }
}

}  // namespace

Vec uniform_sphere(int N, Rng& rng) {
  if (N < 2) fail("uniform_sphere: N must be >= 2");
  Vec x(N);
  fill_subsphere(x.data(), 0, N, static_cast<double>(N), rng);
  return x;
}

Vec uniform_hemisphere(int N, Rng& rng) {
  Vec x = uniform_sphere(N, rng);
  if (x[0] < 0) x[0] = -x[0];
  return x;
}

Vec fixed_correlation(int N, double r, Rng& rng) {
  if (N < 2) fail("fixed_correlation: N must be >= 2");
  if (!(std::abs(r) < 1)) fail("fixed_correlation: need |r| < 1");
  Vec x(N);
  x[0] = r * std::sqrt(static_cast<double>(N));
  fill_subsphere(x.data(), 1, N, N * (1.0 - r * r), rng);
  return x;
}

Vec latitude_window_sample(int N, double m_lo, double m_hi, Rng& rng) {
  if (N < 2) fail("latitude_window_sample: N must be >= 2");
  if (!(m_lo < m_hi) || m_lo < -1 || m_hi > 1)
    fail("latitude_window_sample: need -1 <= m_lo < m_hi <= 1");
  // (1 + m)/2 is Beta(a, a) with a = (N-1)/2; invert the CDF on the window.
  const double a = 0.5 * (N - 1);
  const double flo = reg_inc_beta(a, a, 0.5 * (1.0 + m_lo));
  const double fhi = reg_inc_beta(a, a, 0.5 * (1.0 + m_hi));
  const double u = flo + (fhi - flo) * rng.u01();
  const double m = 2.0 * reg_inc_beta_inv(a, a, u) - 1.0;
  Vec x(N);
  x[0] = m * std::sqrt(static_cast<double>(N));
  fill_subsphere(x.data(), 1, N, N * std::max(0.0, 1.0 - m * m), rng);
  return x;
}

double log_volume_fraction(int N, double m_lo, double m_hi) {
  if (N < 2) fail("log_volume_fraction: N must be >= 2");
  if (!(m_lo < m_hi) || m_lo < -1 || m_hi > 1)
    fail("log_volume_fraction: need -1 <= m_lo < m_hi <= 1");
  if (m_lo <= -1 && m_hi >= 1) return 0.0;
  if (N == 2) {
    // Density (1 - m^2)^{-1/2} is singular at the poles; the arc length is
    // closed-form there.
    return std::log((std::asin(m_hi) - std::asin(m_lo)) / kPi);
  }
  const double c = 0.5 * (N - 3);
  // Peak of the density within the window (closest point to the equator).
  const double mpk = (m_lo > 0) ? m_lo : (m_hi < 0 ? m_hi : 0.0);
  const double lmax = c * std::log1p(-mpk * mpk);
  const double fa = latitude_density_scaled(c, lmax, m_lo);
  const double fb = latitude_density_scaled(c, lmax, m_hi);
  const double fm = latitude_density_scaled(c, lmax, 0.5 * (m_lo + m_hi));
  const double whole = simpson(m_lo, fa, m_hi, fb, fm);
  const double integral =
      adaptive_simpson(c, lmax, m_lo, fa, m_hi, fb, fm, whole, 1e-12 * std::max(whole, 1e-30), 48);
  if (!(integral > 0)) fail("log_volume_fraction: window volume underflows");
  // Normalization: int_{-1}^{1} (1-m^2)^c dm = sqrt(pi) Gamma(c+1) / Gamma(c+3/2).
  const double lognorm =
      0.5 * std::log(kPi) + std::lgamma(c + 1.0) - std::lgamma(c + 1.5);
  return lmax + std::log(integral) - lognorm;
}

GibbsSampler::GibbsSampler(const Model& mdl, const Options& opts)
    : mdl_(mdl),
      opts_(opts),
      h_(opts.step),
      rng_(derive_seed(opts.seed, {0x6d616c61ULL})),
      grad_(mdl.N) {
  if (is_gradient_descent(opts.beta) || opts.beta < 0)
    fail("gibbs sampler: beta must be finite and >= 0");
  if (opts.beta > opts.beta_guard)
    fail("gibbs sampler: beta " + std::to_string(opts.beta) +
         " exceeds the high-temperature guard " + std::to_string(opts.beta_guard) +
         " (raise beta_guard explicitly to proceed)");
  if (h_ <= 0) fail("gibbs sampler: step must be > 0");
  if (opts.band_halfwidth < 0) fail("gibbs sampler: band halfwidth must be >= 0");

  even_mixture_ = true;
  for (const auto& tm : mdl.mixture.terms)
    if (tm.p % 2 != 0) even_mixture_ = false;
  if (opts.full_hamiltonian && mdl.signal.lambda > 0) even_mixture_ = false;

  // Start inside the support.
  const double rootN = std::sqrt(static_cast<double>(mdl.N));
  if (opts.window_lo < opts.window_hi) {
    if (opts.band_halfwidth > 0 || opts.hemisphere)
      fail("gibbs sampler: window restriction excludes band and hemisphere modes");
    if (opts.window_lo < -rootN || opts.window_hi > rootN)
      fail("gibbs sampler: window must lie inside [-sqrt(N), sqrt(N)]");
    x_ = latitude_window_sample(mdl.N, opts.window_lo / rootN, opts.window_hi / rootN, rng_);
  } else if (opts.window_lo > opts.window_hi) {
    fail("gibbs sampler: window_lo must be <= window_hi");
  } else if (opts.band_halfwidth > 0 && opts.band_halfwidth < rootN) {
    const double mb = opts.band_halfwidth / rootN;
    const double lo = opts_.hemisphere ? 0.0 : -mb;
    x_ = latitude_window_sample(mdl.N, lo, mb, rng_);
  } else if (opts_.hemisphere) {
    x_ = uniform_hemisphere(mdl.N, rng_);
  } else {
    x_ = uniform_sphere(mdl.N, rng_);
  }
  energy_ = target_energy(x_.data());
  target_gradient(x_.data(), grad_.data());
}

double GibbsSampler::target_energy(const double* x) const {
  if (opts_.beta == 0) return 0.0;
  return opts_.full_hamiltonian ? total_energy(mdl_, x) : noise_energy(mdl_, x);
}

void GibbsSampler::target_gradient(const double* x, double* out) const {
  if (opts_.beta == 0) {
    std::memset(out, 0, static_cast<std::size_t>(mdl_.N) * sizeof(double));
    return;
  }
  if (opts_.full_hamiltonian)
    total_gradient(mdl_, x, out);
  else
    noise_gradient(mdl_, x, out);
  project_tangent(x, out, mdl_.N);
}

bool GibbsSampler::in_support(const double* x) const {
  if (opts_.window_lo < opts_.window_hi && (x[0] < opts_.window_lo || x[0] > opts_.window_hi))
    return false;
  if (opts_.band_halfwidth > 0 && std::abs(x[0]) > opts_.band_halfwidth) return false;
  if (opts_.hemisphere && !even_mixture_ && x[0] <= 0) return false;
  return true;
}

void GibbsSampler::set_beta(double beta) {
  if (is_gradient_descent(beta) || beta < 0) fail("gibbs sampler: beta must be finite and >= 0");
  if (beta > opts_.beta_guard)
    fail("gibbs sampler: beta " + std::to_string(beta) + " exceeds the high-temperature guard " +
         std::to_string(opts_.beta_guard) + " (raise beta_guard explicitly to proceed)");
  opts_.beta = beta;
  energy_ = target_energy(x_.data());
  target_gradient(x_.data(), grad_.data());
}

void GibbsSampler::fold_hemisphere() {
  if (!opts_.hemisphere || !even_mixture_ || x_[0] > 0) return;
  // Even target: x -> -x preserves the energy and negates the gradient, so
  // the folded chain stays stationary for the conditioned law.
  for (double& xi : x_) xi = -xi;
  for (double& gi : grad_) gi = -gi;
}

void GibbsSampler::advance(int nsteps, bool adapt) {
  const auto n = static_cast<std::size_t>(mdl_.N);
  const double N = mdl_.N;
  Vec noise(n), y(n), gy(n);
  for (int step = 0; step < nsteps; ++step) {
    const double s = std::sqrt(2.0 * h_);
    rng_.fill_gaussian(noise.data(), n);
    project_tangent(x_.data(), noise.data(), mdl_.N);
    // Proposal y = retract(x + t), t = mu_x + sqrt(2h) P zeta,
    // mu_x = -h beta grad (already tangent).
    const double hb = h_ * opts_.beta;
    double fwd = 0;  // |t - mu_x|^2 = 2h |P zeta|^2
    for (std::size_t i = 0; i < n; ++i) {
      const double f = s * noise[i];
      fwd += f * f;
      y[i] = x_[i] + f - hb * grad_[i];
    }
    retract_sphere(y.data(), mdl_.N);
    ++proposed_;
    ++window_proposed_;
    bool accept = false;
    if (in_support(y.data())) {
      const double cxy = kernels().dot(x_.data(), y.data(), n);
      // cxy > 0 always: the proposal lives in the tangent chart at x.
      const double ey = target_energy(y.data());
      target_gradient(y.data(), gy.data());
      // Reverse tangent preimage t_yx = (N/<x,y>) x - y, residual vs mu_y.
      const double cc = N / cxy;
      double rev = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = cc * x_[i] - y[i] + hb * gy[i];
        rev += r * r;
      }
      // The chart volume factors (N/<x,y>)^N cancel (symmetric in x, y).
      const double log_alpha = -opts_.beta * (ey - energy_) - (rev - fwd) / (4.0 * h_);
      if (log_alpha >= 0 || std::log(rng_.u01()) < log_alpha) {
        accept = true;
        x_.swap(y);
        grad_.swap(gy);
        energy_ = ey;
      }
    }
    if (accept) {
      ++accepted_;
      ++window_accepted_;
      fold_hemisphere();
    }
    if (adapt && window_proposed_ >= 50) {
      const double rate =
          static_cast<double>(window_accepted_) / static_cast<double>(window_proposed_);
      if (rate < 0.4)
        h_ /= 1.35;
      else if (rate > 0.8)
        h_ *= 1.35;
      window_proposed_ = window_accepted_ = 0;
    }
  }
}

double GibbsSampler::acceptance_rate() const {
  return proposed_ == 0 ? 1.0 : static_cast<double>(accepted_) / static_cast<double>(proposed_);
}

void GibbsSampler::burn_in(int nsteps) {
  if (nsteps < 1) fail("gibbs sampler: burn-in needs at least one step");
  advance(nsteps, true);
  if (acceptance_rate() < 0.10) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "MALA acceptance rate %.1f%% after burn-in; consider a smaller mala_step "
                  "(current %.3g)",
                  100.0 * acceptance_rate(), h_);
    warnings_.push_back(buf);
    std::fprintf(stderr, "[spikelab] warning: %s\n", buf);
  }
}

Vec draw_initial(const Model& mdl, const InitSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case InitSpec::Kind::kUniform:
      return uniform_sphere(mdl.N, rng);
    case InitSpec::Kind::kUniformHemisphere:
      return uniform_hemisphere(mdl.N, rng);
    case InitSpec::Kind::kFixedCorrelation:
      return fixed_correlation(mdl.N, spec.r, rng);
    case InitSpec::Kind::kGibbsNoise:
    case InitSpec::Kind::kBandedGibbs: {
      GibbsSampler::Options o;
      o.beta = spec.beta_init;
      o.beta_guard = spec.beta_guard;
      o.step = spec.mala_step;
      o.seed = rng.u64();
      if (spec.kind == InitSpec::Kind::kBandedGibbs) {
        if (spec.band_halfwidth <= 0) fail("draw_initial: banded kind needs band_halfwidth > 0");
        o.band_halfwidth = spec.band_halfwidth;
        o.full_hamiltonian = spec.full_hamiltonian;
      } else {
        o.hemisphere = spec.hemisphere;
      }
      GibbsSampler sampler(mdl, o);
      sampler.burn_in(spec.burn_in_steps);
      return sampler.state();
    }
  }
  fail("draw_initial: unknown init kind");
  return {};
}

}  // namespace spikelab
