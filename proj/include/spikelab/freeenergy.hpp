// Restricted free energies, the entropy profile of the overlap, free-energy
// well detection, and exit-time experiments.
//
// F(A) = (1/N) log INT_A e^{-beta H} dx  (volume normalized to 1), estimated
// as (1/N)[log vol(A) + log mean e^{-beta H(X_i)}] with X_i drawn exactly
// from the volume measure conditioned on A (latitude inverse CDF + uniform
// subsphere).  log vol(A) comes from 1-D quadrature of the latitude density.
//
// Entropy profile of f(x) = x_1 at window half-width eps:
//   I(a; eps) = -log pi({x : x_1 in (a - eps, a + eps)})
//             = -N [F(window) - F(sphere)].
// A free-energy well of height h is a triple a < c < b of grid points with
// pairwise disjoint windows and min(I(a), I(b)) - I(c) >= h.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "spikelab/dynamics.hpp"
#include "spikelab/initializers.hpp"
#include "spikelab/landscape.hpp"

namespace spikelab {

// Equatorial band A_delta = {x : |m(x) - center| < delta}, stored in
// correlation units; the raw-coordinate half width is delta * sqrt(N).
struct Band {
  double delta = 0;   // correlation half width, > 0
  double center = 0;  // correlation units
  double x1_half_width(int N) const { return delta * std::sqrt(static_cast<double>(N)); }
  double m_lo() const { return std::max(-1.0, center - delta); }
  double m_hi() const { return std::min(1.0, center + delta); }
};

// Entropy-profile window B_eps(a) on the raw coordinate x_1.
struct Window {
  double a = 0;    // center, x_1 units
  double eps = 0;  // half width, x_1 units, > 0
  double m_lo(int N) const { return std::max(-1.0, (a - eps) / std::sqrt(static_cast<double>(N))); }
  double m_hi(int N) const { return std::min(1.0, (a + eps) / std::sqrt(static_cast<double>(N))); }
};

struct FreeEnergy {
  double value = 0;
  double std_error = 0;  // jackknife, on the sampled log-mean-exp part
  double ess = 0;        // effective sample size of the weights
  std::vector<std::string> warnings;
};

// noise_only drops the signal term (the F_0 of the refutation bounds).
// Requires finite beta and n_samples >= 1000.
FreeEnergy restricted_free_energy(const Model& mdl, double beta, double m_lo, double m_hi,
                                  int n_samples, std::uint64_t seed, bool noise_only = false);
FreeEnergy restricted_free_energy(const Model& mdl, double beta, const Band& band, int n_samples,
                                  std::uint64_t seed, bool noise_only = false);
FreeEnergy restricted_free_energy(const Model& mdl, double beta, const Window& win, int n_samples,
                                  std::uint64_t seed, bool noise_only = false);

// F of a union of pairwise disjoint regions: (1/N) log sum_i e^{N F_i}, with
// the delta-method error propagated through the weights.
FreeEnergy free_energy_union(const std::vector<FreeEnergy>& pieces, int N);

// Thermodynamic-integration estimator of the same F: for a latitude region A,
//   N F(A) = log vol(A) - INT_0^beta E_b[H | A] db,
// where E_b is the Gibbs mean at inverse temperature b, sampled by a
// window-restricted MALA chain warm-started up a uniform temperature ladder.
// The direct importance estimator degenerates once beta^2 Var(H | A) is more
// than a few nats; this one stays conditioned there at the cost of MCMC
// equilibration assumptions (rung means are treated as independent, which the
// warm starts only approximately satisfy).  The value uses the Simpson rule
// on the ladder; std_error combines batch-means sampling error with the
// Simpson-trapezoid gap as a discretization term.  ess is not populated.
struct TiOptions {
  int n_temps = 13;          // ladder rungs including both endpoints; odd, >= 3
  int sample_steps = 4000;   // MALA sampling steps per rung
  int burn_in_steps = 1500;  // per-rung burn-in (step adaptation on)
  int n_batches = 20;        // batch-means blocks per rung (>= 4)
  double mala_step = 0.1;    // initial step; adapted at each rung's burn-in
  bool noise_only = false;
  std::uint64_t seed = 0;
};

FreeEnergy restricted_free_energy_ti(const Model& mdl, double beta, double m_lo, double m_hi,
                                     const TiOptions& opts);
FreeEnergy restricted_free_energy_ti(const Model& mdl, double beta, const Window& win,
                                     const TiOptions& opts);

struct WellReport {
  std::vector<double> grid;  // window centers a_i, x_1 units
  double eps = 0;            // shared half width, x_1 units
  std::vector<double> I;     // entropy values
  std::vector<double> I_err;
  double sphere_f = 0, sphere_f_err = 0;
  struct Well {
    double a = 0, c = 0, b = 0;  // a < c < b, disjoint windows
    double height = 0;           // min(I(a), I(b)) - I(c)
  };
  std::optional<Well> well;  // best (max-height) well with height > eta
  std::vector<std::string> warnings;
};

enum class FeEstimator { kImportance, kThermoIntegration };

struct EntropyProfileOptions {
  int n_samples = 2000;    // importance estimator only
  double eta = 0;          // minimum height for reporting a well
  std::uint64_t seed = 0;
  bool noise_only = false;
  FeEstimator estimator = FeEstimator::kImportance;
  TiOptions ti;  // thermo-integration knobs; its seed/noise_only are overridden
};

WellReport entropy_profile(const Model& mdl, double beta, const std::vector<double>& grid,
                           double eps, const EntropyProfileOptions& opts);

struct ExitTimeOptions {
  Band band;          // center must be 0; starts target the band
  double beta = 1;    // Langevin temperature, also the sampler's target beta
  int n_chains = 100;
  double horizon = 50;
  double h = 0;  // integrator step; 0 = default_step_size
  int burn_in_steps = 1000;
  double mala_step = 0.1;
  double beta_guard = 1.0;
  bool full_hamiltonian_target = true;  // pi restricted; false: pi_0 restricted
  std::uint64_t seed = 0;
};

struct ExitTimeResult {
  std::vector<double> tau;       // per chain; = horizon when censored
  std::vector<unsigned char> censored;
  std::size_t n_censored = 0;
  double median = 0;             // censored chains counted at the horizon
  double exit_m_threshold = 0;   // exit at |m| >= 2 * band.delta
  std::vector<std::string> warnings;
};

// Chains start from banded Gibbs draws (hard-wall MALA restricted to
// |x_1| <= band half width), then run the full Langevin dynamics until
// |x_1| >= 2 * (band half width) or the horizon.
ExitTimeResult exit_time_experiment(const Model& mdl, const ExitTimeOptions& opts);

}  // namespace spikelab
