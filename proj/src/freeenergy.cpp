#include "spikelab/freeenergy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "spikelab/stats.hpp"

namespace spikelab {

FreeEnergy restricted_free_energy(const Model& mdl, double beta, double m_lo, double m_hi,
                                  int n_samples, std::uint64_t seed, bool noise_only) {
  if (is_gradient_descent(beta) || beta < 0)
    fail("restricted_free_energy: beta must be finite and >= 0");
  if (n_samples < 1000) fail("restricted_free_energy: need n_samples >= 1000");
  if (!(m_lo < m_hi) || m_lo < -1 || m_hi > 1)
    fail("restricted_free_energy: need -1 <= m_lo < m_hi <= 1");

  const double logvol = log_volume_fraction(mdl.N, m_lo, m_hi);
  Rng rng(derive_seed(seed, {0xf3eeULL}));
  Vec logw(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    Vec x = latitude_window_sample(mdl.N, m_lo, m_hi, rng);
    const double e = noise_only ? noise_energy(mdl, x.data()) : total_energy(mdl, x.data());
    logw[i] = -beta * e;
  }
  FreeEnergy out;
  out.value = (logvol + log_mean_exp(logw)) / mdl.N;
  out.std_error = log_mean_exp_jackknife_stderr(logw) / mdl.N;
  out.ess = ess_exp_weights(logw);
  if (out.ess < 50) {
    char buf[140];
    std::snprintf(buf, sizeof buf,
                  "importance weights degenerate on window [%.4g, %.4g]: effective sample size "
                  "%.1f of %d",
                  m_lo, m_hi, out.ess, n_samples);
    out.warnings.push_back(buf);
    std::fprintf(stderr, "[spikelab] warning: %s\n", buf);
  }
  return out;
}

FreeEnergy restricted_free_energy(const Model& mdl, double beta, const Band& band, int n_samples,
                                  std::uint64_t seed, bool noise_only) {
  if (band.delta <= 0) fail("restricted_free_energy: band delta must be > 0");
  return restricted_free_energy(mdl, beta, band.m_lo(), band.m_hi(), n_samples, seed, noise_only);
}

FreeEnergy restricted_free_energy(const Model& mdl, double beta, const Window& win, int n_samples,
                                  std::uint64_t seed, bool noise_only) {
  if (win.eps <= 0) fail("restricted_free_energy: window eps must be > 0");
  return restricted_free_energy(mdl, beta, win.m_lo(mdl.N), win.m_hi(mdl.N), n_samples, seed,
                                noise_only);
}

FreeEnergy restricted_free_energy_ti(const Model& mdl, double beta, double m_lo, double m_hi,
                                     const TiOptions& opts) {
  if (is_gradient_descent(beta) || beta < 0)
    fail("restricted_free_energy_ti: beta must be finite and >= 0");
  if (!(m_lo < m_hi) || m_lo < -1 || m_hi > 1)
    fail("restricted_free_energy_ti: need -1 <= m_lo < m_hi <= 1");
  if (opts.n_temps < 3 || opts.n_temps % 2 == 0)
    fail("restricted_free_energy_ti: n_temps must be odd and >= 3");
  if (opts.n_batches < 4) fail("restricted_free_energy_ti: need n_batches >= 4");
  if (opts.sample_steps < 10 * opts.n_batches)
    fail("restricted_free_energy_ti: need sample_steps >= 10 * n_batches");
  if (opts.burn_in_steps < 0) fail("restricted_free_energy_ti: burn_in_steps must be >= 0");

  const double logvol = log_volume_fraction(mdl.N, m_lo, m_hi);
  FreeEnergy out;
  out.ess = 0;
  if (beta == 0) {
    out.value = logvol / mdl.N;
    return out;
  }

  GibbsSampler::Options so;
  so.beta = 0;
  so.beta_guard = beta;
  so.step = opts.mala_step;
  so.full_hamiltonian = !opts.noise_only;
  so.seed = derive_seed(opts.seed, {0x7169ULL});
  const double rootN = std::sqrt(static_cast<double>(mdl.N));
  if (m_lo > -1 || m_hi < 1) {
    so.window_lo = std::max(m_lo, -1.0) * rootN;
    so.window_hi = std::min(m_hi, 1.0) * rootN;
  }
  GibbsSampler chain(mdl, so);

  // Uniform ladder 0 = b_0 < ... < b_{J-1} = beta; the chain is retargeted in
  // place so each rung starts from the previous rung's end state.
  const int J = opts.n_temps;
  const int L = opts.sample_steps / opts.n_batches;  // batch length
  std::vector<double> mean(J, 0), sem2(J, 0);
  for (int j = 0; j < J; ++j) {
    // The top rung must be exactly beta: rounding the ratio up would trip the
    // sampler's temperature guard.
    const double b =
        j == J - 1 ? beta : beta * static_cast<double>(j) / static_cast<double>(J - 1);
    chain.set_beta(b);
    if (opts.burn_in_steps > 0) chain.burn_in(opts.burn_in_steps);
    std::vector<double> batch(opts.n_batches, 0);
    for (int bb = 0; bb < opts.n_batches; ++bb) {
      double acc = 0;
      for (int s = 0; s < L; ++s) {
        chain.advance(1, false);
        acc += opts.noise_only ? noise_energy(mdl, chain.state().data())
                               : total_energy(mdl, chain.state().data());
      }
      batch[bb] = acc / L;
    }
    for (double v : batch) mean[j] += v;
    mean[j] /= opts.n_batches;
    for (double v : batch) sem2[j] += (v - mean[j]) * (v - mean[j]);
    sem2[j] /= static_cast<double>(opts.n_batches) * (opts.n_batches - 1);
  }

  // Trapezoid and composite Simpson on the same nodes; their gap is the
  // discretization error estimate.
  const double db = beta / (J - 1);
  double trap = 0, trap_var = 0;
  for (int j = 0; j < J; ++j) {
    const double w = (j == 0 || j == J - 1) ? 0.5 * db : db;
    trap += w * mean[j];
    trap_var += w * w * sem2[j];
  }
  double simp = 0, simp_var = 0;
  for (int j = 0; j < J; ++j) {
    double w = db / 3.0;
    if (j > 0 && j < J - 1) w *= (j % 2 == 1) ? 4.0 : 2.0;
    simp += w * mean[j];
    simp_var += w * w * sem2[j];
  }
  const double gap = std::abs(simp - trap);
  out.value = (logvol - simp) / mdl.N;
  out.std_error = std::hypot(std::sqrt(simp_var), gap) / mdl.N;
  if (gap > 3 * std::sqrt(std::max(simp_var, trap_var)) && gap > 0.05 * std::abs(simp)) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "thermo-integration ladder too coarse on [%.4g, %.4g]: Simpson-trapezoid gap "
                  "%.3g vs sampling error %.3g",
                  m_lo, m_hi, gap, std::sqrt(simp_var));
    out.warnings.push_back(buf);
    std::fprintf(stderr, "[spikelab] warning: %s\n", buf);
  }
  for (const auto& w : chain.warnings()) out.warnings.push_back(w);
  return out;
}

FreeEnergy restricted_free_energy_ti(const Model& mdl, double beta, const Window& win,
                                     const TiOptions& opts) {
  if (win.eps <= 0) fail("restricted_free_energy_ti: window eps must be > 0");
  return restricted_free_energy_ti(mdl, beta, win.m_lo(mdl.N), win.m_hi(mdl.N), opts);
}

FreeEnergy free_energy_union(const std::vector<FreeEnergy>& pieces, int N) {
  if (pieces.empty()) fail("free_energy_union: no pieces");
  double fmax = pieces[0].value;
  for (const auto& p : pieces) fmax = std::max(fmax, p.value);
  double sum = 0;
  for (const auto& p : pieces) sum += std::exp(N * (p.value - fmax));
  FreeEnergy out;
  out.value = fmax + std::log(sum) / N;
  // Delta method: dF/dF_i = w_i / sum w, w_i = e^{N F_i}.
  double var = 0;
  for (const auto& p : pieces) {
    const double w = std::exp(N * (p.value - fmax)) / sum;
    var += w * w * p.std_error * p.std_error;
  }
  out.std_error = std::sqrt(var);
  out.ess = 0;
  for (const auto& p : pieces)
    for (const auto& w : p.warnings) out.warnings.push_back(w);
  return out;
}

WellReport entropy_profile(const Model& mdl, double beta, const std::vector<double>& grid,
                           double eps, const EntropyProfileOptions& opts) {
  if (grid.empty()) fail("entropy_profile: empty grid");
  if (eps <= 0) fail("entropy_profile: eps must be > 0");
  WellReport rep;
  rep.grid = grid;
  rep.eps = eps;

  const auto estimate = [&](double m_lo, double m_hi, std::uint64_t seed) {
    if (opts.estimator == FeEstimator::kThermoIntegration) {
      TiOptions ti = opts.ti;
      ti.noise_only = opts.noise_only;
      ti.seed = seed;
      return restricted_free_energy_ti(mdl, beta, m_lo, m_hi, ti);
    }
    return restricted_free_energy(mdl, beta, m_lo, m_hi, opts.n_samples, seed, opts.noise_only);
  };

  const FreeEnergy sphere = estimate(-1.0, 1.0, derive_seed(opts.seed, {0}));
  rep.sphere_f = sphere.value;
  rep.sphere_f_err = sphere.std_error;
  for (const auto& w : sphere.warnings) rep.warnings.push_back(w);

  for (std::size_t i = 0; i < grid.size(); ++i) {
    Window win{grid[i], eps};
    const FreeEnergy f = estimate(win.m_lo(mdl.N), win.m_hi(mdl.N), derive_seed(opts.seed, {1, i}));
    rep.I.push_back(-mdl.N * (f.value - sphere.value));
    rep.I_err.push_back(mdl.N * std::hypot(f.std_error, sphere.std_error));
    for (const auto& w : f.warnings) rep.warnings.push_back(w);
  }

  // Best well: grid triple a < c < b with pairwise disjoint windows and
  // min(I(a), I(b)) - I(c) maximal (> eta required to report).
  double best = opts.eta;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      for (std::size_t l = 0; l < grid.size(); ++l) {
        if (!(grid[i] < grid[j] && grid[j] < grid[l])) continue;
        if (grid[j] - grid[i] < 2 * eps || grid[l] - grid[j] < 2 * eps) continue;
        const double height = std::min(rep.I[i], rep.I[l]) - rep.I[j];
        if (height > best) {
          best = height;
          rep.well = WellReport::Well{grid[i], grid[j], grid[l], height};
        }
      }
  return rep;
}

ExitTimeResult exit_time_experiment(const Model& mdl, const ExitTimeOptions& opts) {
  if (opts.band.delta <= 0) fail("exit_time_experiment: band delta must be > 0");
  if (opts.band.center != 0) fail("exit_time_experiment: band must be centered at 0");
  if (opts.n_chains < 1) fail("exit_time_experiment: need at least one chain");
  if (opts.horizon <= 0) fail("exit_time_experiment: horizon must be > 0");
  if (is_gradient_descent(opts.beta)) fail("exit_time_experiment: beta must be finite");
  const double exit_m = 2.0 * opts.band.delta;
  if (exit_m >= 1.0)
    fail("exit_time_experiment: exit threshold 2*delta reaches the poles; shrink the band");

  ExitTimeResult res;
  res.exit_m_threshold = exit_m;
  res.tau.resize(opts.n_chains);
  res.censored.resize(opts.n_chains);

  for (int c = 0; c < opts.n_chains; ++c) {
    GibbsSampler::Options so;
    so.beta = opts.beta;
    so.beta_guard = opts.beta_guard;
    so.step = opts.mala_step;
    so.band_halfwidth = opts.band.x1_half_width(mdl.N);
    so.full_hamiltonian = opts.full_hamiltonian_target;
    so.seed = derive_seed(opts.seed, {0xe817ULL, static_cast<std::uint64_t>(c), 0});
    GibbsSampler sampler(mdl, so);
    sampler.burn_in(opts.burn_in_steps);
    for (const auto& w : sampler.warnings()) res.warnings.push_back(w);

    IntegratorConfig cfg;
    cfg.beta = opts.beta;
    cfg.h = opts.h;
    cfg.t_end = opts.horizon;
    cfg.record_every = opts.horizon;  // endpoints only; the observer does the work
    cfg.record_energy = false;
    cfg.record_l0m = false;
    cfg.seed = derive_seed(opts.seed, {0xe817ULL, static_cast<std::uint64_t>(c), 1});
    double tau = opts.horizon;
    bool hit = false;
    run_trajectory(mdl, sampler.state(), cfg, [&](std::size_t, double t, double m, const double*) {
      if (std::abs(m) >= exit_m) {
        tau = t;
        hit = true;
        return false;
      }
      return true;
    });
    res.tau[c] = tau;
    res.censored[c] = hit ? 0 : 1;
    if (!hit) ++res.n_censored;
  }
  res.median = quantile(res.tau, 0.5);
  return res;
}

}  // namespace spikelab
