// Experiment orchestration: phase-diagram sweeps over (N, k, SNR, beta)
// grids, threshold bisection, exponent fitting, and the named recovery /
// stability / refutation recipes.
//
// Determinism contract: a run is a pure function of (config, master_seed).
// Replica seeds are derive_seed(master, {cell, disorder, init}) and are
// collision-checked up front; disorder seeds depend only on (master, N,
// disorder index) so sweep cells at different SNR share noise realizations
// (common random numbers).  Aggregation is a fold in replica order, so
// results and output files are byte-identical for any worker count.  Output
// files never contain wall-clock or host information.
//
// Success evaluation is observer-based (per integrator step, not per record):
// a replica succeeds on window [a, T] when m stayed >= threshold at every
// step with t >= a.  Each cell reports the configured window [t0, t1] and a
// late window [2 t0, t1] as the window-sensitivity record.  For gradient
// descent the run halts early once the outcome is frozen: |dm/dt| <=
// |grad_S H|/sqrt(N), so when g (t1 - t)/sqrt(N) is below half the distance
// to the threshold the remaining flow cannot cross it.
#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spikelab/dynamics.hpp"
#include "spikelab/initializers.hpp"
#include "spikelab/landscape.hpp"
#include "spikelab/stats.hpp"

namespace spikelab {

struct SuccessRule {
  enum class Kind { kWeak, kStrong };
  Kind kind = Kind::kWeak;
  double eps = 0.2;  // weak: m >= eps; strong: m >= 1 - eps
  double t0 = 1.0;   // window [t0, t1], the theorems' min-over-window form
  double t1 = 20.0;
  double threshold() const { return kind == Kind::kWeak ? eps : 1.0 - eps; }
};

struct ExperimentConfig {
  MixtureSpec mixture;
  std::vector<int> Ns{16};
  std::vector<double> ks{3.0};
  // SNR grid: exponents alpha (lambda = N^alpha per cell) when
  // level_is_alpha, raw lambda values otherwise.
  std::vector<double> levels{1.0};
  bool level_is_alpha = true;
  std::vector<double> betas{kInfBeta};
  int n_disorder = 4;
  int n_init = 50;
  SuccessRule rule;
  // Per replica the harness overrides beta/seed/t_end and disables recording
  // (evaluation is observer-based); h and scheme are taken from here.
  IntegratorConfig integrator;
  InitSpec init;  // per-replica seeds replace InitSpec::seed
  std::uint64_t master_seed = 1;
  int n_workers = 1;
  std::uint64_t entry_budget = kDefaultEntryBudget;
  std::string cache_dir;  // disorder tensor cache; empty = off
  std::string outdir;     // empty = no files written
};

struct CellResult {
  int N = 0;
  double k = 0;
  double beta = 0;
  double lambda = 0;
  double alpha = std::numeric_limits<double>::quiet_NaN();
  std::size_t successes = 0;       // window [t0, t1]
  std::size_t successes_late = 0;  // window [2 t0, t1]
  std::size_t total = 0;           // replicas that completed
  std::size_t errors = 0;          // replicas that threw (logged, not fatal)
  Interval ci;                     // Wilson 95%, primary window
  Interval ci_late;
  std::vector<std::string> error_messages;  // deduplicated
};

struct PhaseDiagramResult {
  std::vector<CellResult> cells;  // N-major, then k, level, beta
  std::uint64_t master_seed = 0;
  double wall_seconds = 0;  // informational only; never written to files
};

// Runs the full grid; writes phase_diagram.csv + manifest.json under
// cfg.outdir when set.  Per-replica errors mark the cell incomplete instead
// of aborting the sweep.
PhaseDiagramResult run_phase_diagram(const ExperimentConfig& cfg);

struct LambdaEval {
  double lambda = 0;
  std::size_t successes = 0;
  std::size_t total = 0;
  double fraction() const { return total ? static_cast<double>(successes) / total : 0.0; }
};

struct LambdaCOptions {
  MixtureSpec mixture;
  double k = 3;
  double beta = kInfBeta;
  SuccessRule rule{SuccessRule::Kind::kStrong, 0.1, 1.0, 5.0};
  IntegratorConfig integrator;
  InitSpec init;
  int n_disorder = 4;
  int n_init = 50;
  double bracket_lo = 0;  // <= 0: sqrt(N)/4
  double bracket_hi = 0;  // <= 0: 4 sqrt(N)
  double rel_width = 0.10;
  int max_widen = 4;  // bracket-widening retries per side
  std::uint64_t master_seed = 1;
  int n_workers = 1;
  std::uint64_t entry_budget = kDefaultEntryBudget;
  std::string cache_dir;
};

struct LambdaCResult {
  double lambda_c = 0;  // final bracket midpoint
  double lo = 0, hi = 0;
  Interval p_lo_ci, p_hi_ci;  // Wilson at the final bracket ends
  std::vector<LambdaEval> evaluations;
};

// Bisects the empirical success probability to 1/2 in lambda at fixed
// (N, k, beta).  Monotonicity is checked on the bracketing evaluations;
// a non-monotone bracket is widened and retried, then it is an error.
LambdaCResult estimate_lambda_c(int N, const LambdaCOptions& opts);

// Least squares of log(lambda_c) on log(N); needs >= 3 points with
// lambda_c > 0.  The slope estimates the SNR exponent.
LineFit fit_alpha_exponent(const std::vector<std::pair<double, double>>& n_lambda);

// --- recipes ---------------------------------------------------------------

struct RecipeOptions {
  MixtureSpec mixture;
  int N = 64;
  double k = 3;
  double beta = kInfBeta;
  double lambda = 0;  // per-recipe meaning; microscopic_start derives its own
  double eps = 0.1;
  double t0 = 1.0;
  double t1 = 20.0;
  double gamma = 1.0;  // microscopic_start: lambda r^{k-1} = gamma at r = N^{-1/2}
  int n_disorder = 2;
  int n_init = 50;
  IntegratorConfig integrator;  // h/scheme; beta, seed, horizon overridden
  std::uint64_t master_seed = 1;
  std::uint64_t entry_budget = kDefaultEntryBudget;
  // equatorial_pass_search:
  int n_candidates = 200;
  int n_top = 8;
  int n_controls = 8;
};

struct RecipeReport {
  std::string name;
  bool pass = false;
  std::map<std::string, double> metrics;
  std::uint64_t master_seed = 0;
  std::vector<std::string> notes;  // per-replica errors and caveats
};

// Diverging-SNR run from uniform starts: replicas that reach m >= eps should
// then hold m >= 1 - eps on [max(t0, first hit), t1].  pass: both the weak
// fraction and the strong-given-weak fraction are >= 0.9.
RecipeReport recipe_weak_to_strong(const RecipeOptions& opts);

// Starts at the microscopic correlation r = N^{-1/2} with lambda set by
// lambda r^{k-1} = gamma (opts.lambda ignored); success = reaching m >= eps
// by t1.  pass: success fraction >= 0.5 (meaningful for supercritical gamma).
RecipeReport recipe_microscopic_start(const RecipeOptions& opts);

// Starts at m = 2 eps; success = m stays >= eps on all of [0, t1].
// pass: fraction >= 0.9.  Needs 2 eps < 1.
RecipeReport recipe_stability(const RecipeOptions& opts);

// Order-one lambda at finite beta, started near the pole (m = 1 - eps/2);
// records the fraction whose m held >= 1 - eps on [t0, t1].  pass: that
// fraction is <= 0.1 (decay observed).
RecipeReport recipe_strong_impossible(const RecipeOptions& opts);

// Gradient descent at order-one lambda: scores n_candidates equator starts
// (m = N^{-1/2}) by initial dm/dt, runs the top n_top and n_controls
// draw-order controls, and compares weak-recovery fractions.  Exploratory;
// pass: top fraction strictly exceeds the control fraction.
RecipeReport recipe_equatorial_pass_search(const RecipeOptions& opts);

// --- JSON views (deterministic; no wall-clock or host info) -----------------
nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const PhaseDiagramResult& res);
nlohmann::json to_json(const LambdaCResult& res);
nlohmann::json to_json(const RecipeReport& rep);

}  // namespace spikelab
