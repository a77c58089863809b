// Initial conditions on the sphere |x|^2 = N: uniform and hemisphere draws,
// fixed-correlation slices, latitude-window draws, and Metropolis-adjusted
// Langevin (MALA) chains targeting the Gibbs measure of the noise energy
// (optionally the full energy), with hemisphere conditioning and band
// restriction.
//
// The MALA proposal lives in the tangent space at x: t = mu_x + sqrt(2h) P_x z
// with mu_x = -h beta P_x grad E(x), mapped to the sphere by y = retract(x+t).
// The chart y -> t has preimage t_xy = (N/<x,y>) y - x and volume factor
// (N/<x,y>)^N, which is symmetric in (x, y) and cancels from the acceptance
// ratio; |t_xy|^2 = N^3/<x,y>^2 - N is symmetric too, so at beta = 0 the
// acceptance probability is exactly 1.
#pragma once

#include <cstdint>
#include <string>

#include "spikelab/landscape.hpp"
#include "spikelab/rng.hpp"

namespace spikelab {

Vec uniform_sphere(int N, Rng& rng);
Vec uniform_hemisphere(int N, Rng& rng);  // uniform conditioned on x_1 > 0

// x_1 = r sqrt(N) exactly; the other coordinates uniform on the radius
// sqrt(N (1 - r^2)) subsphere.  Requires |r| < 1 and N >= 2.
Vec fixed_correlation(int N, double r, Rng& rng);

// Volume measure conditioned on m in [m_lo, m_hi]: latitude by inverse CDF
// of the density (1 - m^2)^{(N-3)/2}, then a uniform subsphere.
Vec latitude_window_sample(int N, double m_lo, double m_hi, Rng& rng);

// log of the normalized volume fraction vol({m in [m_lo, m_hi]}) / vol(S),
// by adaptive quadrature of the latitude density in the log domain.
double log_volume_fraction(int N, double m_lo, double m_hi);

struct InitSpec {
  enum class Kind {
    kUniform,
    kUniformHemisphere,
    kFixedCorrelation,
    kGibbsNoise,
    kBandedGibbs,
  };
  Kind kind = Kind::kUniform;
  double r = 0;               // fixed_correlation
  double beta_init = 0;       // Gibbs kinds; must be <= beta_guard
  double beta_guard = 1.0;    // high-temperature guard for the MALA target
  int burn_in_steps = 1000;
  double mala_step = 0.1;     // h; adapted during burn-in
  double band_halfwidth = 0;  // banded kind, raw x_1 units (> 0)
  bool hemisphere = false;    // Gibbs noise kind: condition on x_1 > 0
  bool full_hamiltonian = false;  // banded kind: include the signal term
  std::uint64_t seed = 0;
};

// Exact MALA chain on the sphere.  Target density is proportional to
// exp(-beta E) restricted by the optional band {|x_1| <= band} and, when
// hemisphere-conditioned, to {x_1 > 0}: for even mixtures (every p even) the
// chain folds by the x -> -x symmetry, otherwise the hemisphere is a hard
// wall like the band.  An off-center latitude window {window_lo <= x_1 <=
// window_hi} is also supported (hard wall; exclusive with band/hemisphere).
class GibbsSampler {
 public:
  struct Options {
    double beta = 0;
    double beta_guard = 1.0;
    double step = 0.1;
    double band_halfwidth = 0;  // raw x_1 units; 0 = no band
    double window_lo = 0;       // raw x_1 units; active when window_lo < window_hi
    double window_hi = 0;
    bool hemisphere = false;
    bool full_hamiltonian = false;  // false: noise energy only (pi_0)
    std::uint64_t seed = 0;
  };

  GibbsSampler(const Model& mdl, const Options& opts);

  // Advance the chain; adapt = true multiplies the step by 1.35 (or divides)
  // every 50 steps while the windowed acceptance rate is outside (0.4, 0.8).
  // Adaptation is meant for burn-in only; sampling phases must keep the step
  // fixed so the chain stays reversible for one kernel.
  void advance(int nsteps, bool adapt);

  // Retarget the chain to a new inverse temperature (<= beta_guard), keeping
  // the current state.  Used by annealing ladders that warm-start each
  // temperature from the previous one.
  void set_beta(double beta);

  const Vec& state() const { return x_; }
  double acceptance_rate() const;  // all proposals since construction
  double step_size() const { return h_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  // Burn in, then check the acceptance rate (< 10% earns a warning).
  void burn_in(int nsteps);

 private:
  double target_energy(const double* x) const;
  void target_gradient(const double* x, double* out) const;
  bool in_support(const double* x) const;
  void fold_hemisphere();

  const Model& mdl_;
  Options opts_;
  double h_;
  Vec x_;
  Rng rng_;
  double energy_ = 0;  // target energy at x_ (cached)
  Vec grad_;           // tangent drift gradient at x_ (cached)
  bool even_mixture_ = false;
  std::uint64_t accepted_ = 0, proposed_ = 0;
  std::uint64_t window_accepted_ = 0, window_proposed_ = 0;
  std::vector<std::string> warnings_;
};

// One sample per call: dispatches on spec.kind; Gibbs kinds run a fresh
// burned-in chain (independent draws, deterministic given the rng state).
Vec draw_initial(const Model& mdl, const InitSpec& spec, Rng& rng);

}  // namespace spikelab
