// spikelab command-line front end.
//
// Every subcommand reads a key=value config file (--config) with any key
// overridable via repeated --set key=value flags; unknown keys are errors.
// The disorder tensor cache directory comes from the SPIKELAB_CACHE_DIR
// environment variable unless the cache_dir key overrides it.  All outputs
// are deterministic functions of (config, seed): no timestamps or host info.
//
// Common keys: mixture ("3" or "2:1.0,3:0.5" as p:a pairs), k, N, beta
// ("inf" or a number), seed, outdir, cache_dir, entry_budget.
// See each run_* function below for the subcommand-specific keys.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spikelab/baselines.hpp"
#include "spikelab/conditions.hpp"
#include "spikelab/dynamics.hpp"
#include "spikelab/freeenergy.hpp"
#include "spikelab/harness.hpp"
#include "spikelab/initializers.hpp"
#include "spikelab/io.hpp"
#include "spikelab/landscape.hpp"

namespace {

using namespace spikelab;

MixtureSpec parse_mixture(const std::string& s) {
  if (s.empty()) fail("mixture: empty spec (want e.g. \"3\" or \"2:1.0,3:0.5\")");
  std::vector<MixtureTerm> terms;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    const std::string item = s.substr(pos, comma - pos);
    const std::size_t colon = item.find(':');
    MixtureTerm tm;
    try {
      if (colon == std::string::npos) {
        tm.p = std::stoi(item);
        tm.a = 1.0;
      } else {
        tm.p = std::stoi(item.substr(0, colon));
        tm.a = std::stod(item.substr(colon + 1));
      }
    } catch (const std::exception&) {
      fail("mixture: bad term \"" + item + "\" (want p or p:a)");
    }
    terms.push_back(tm);
    pos = comma + 1;
  }
  return make_mixture(std::move(terms));
}

double parse_beta_token(const std::string& s) {
  if (s == "inf" || s == "infinity") return kInfBeta;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    fail("beta: bad value \"" + s + "\" (want a number or inf)");
  }
}

std::vector<double> parse_beta_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(parse_beta_token(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

Scheme parse_scheme(const std::string& s) {
  if (s == "euler") return Scheme::kEuler;
  if (s == "rk4") return Scheme::kRk4;
  fail("scheme: bad value \"" + s + "\" (want euler or rk4)");
}

// Keys: init = uniform | hemisphere | fixed_correlation | gibbs_noise |
// banded_gibbs, plus init_r, init_beta, init_beta_guard, init_burn_in,
// init_mala_step, init_band_halfwidth, init_hemisphere, init_full_hamiltonian.
InitSpec parse_init(Config& c) {
  InitSpec spec;
  const std::string kind = c.get_string("init", "uniform");
  if (kind == "uniform")
    spec.kind = InitSpec::Kind::kUniform;
  else if (kind == "hemisphere")
    spec.kind = InitSpec::Kind::kUniformHemisphere;
  else if (kind == "fixed_correlation")
    spec.kind = InitSpec::Kind::kFixedCorrelation;
  else if (kind == "gibbs_noise")
    spec.kind = InitSpec::Kind::kGibbsNoise;
  else if (kind == "banded_gibbs")
    spec.kind = InitSpec::Kind::kBandedGibbs;
  else
    fail("init: unknown kind \"" + kind + "\"");
  spec.r = c.get_double("init_r", spec.r);
  spec.beta_init = c.get_double("init_beta", spec.beta_init);
  spec.beta_guard = c.get_double("init_beta_guard", spec.beta_guard);
  spec.burn_in_steps = c.get_int("init_burn_in", spec.burn_in_steps);
  spec.mala_step = c.get_double("init_mala_step", spec.mala_step);
  spec.band_halfwidth = c.get_double("init_band_halfwidth", spec.band_halfwidth);
  spec.hemisphere = c.get_bool("init_hemisphere", spec.hemisphere);
  spec.full_hamiltonian = c.get_bool("init_full_hamiltonian", spec.full_hamiltonian);
  return spec;
}

Config load_config(const std::string& path, const std::vector<std::string>& sets) {
  Config c = path.empty() ? Config() : Config::from_file(path);
  for (const std::string& s : sets) c.set_override(s);
  return c;
}

std::string require_outdir(Config& c) {
  const std::string outdir = c.get_string("outdir", "");
  if (outdir.empty()) fail("config: outdir is required for this subcommand");
  std::filesystem::create_directories(outdir);
  return outdir;
}

// lambda directly, or alpha with lambda = N^alpha.
double parse_snr(Config& c, int N) {
  const bool has_lambda = c.has("lambda"), has_alpha = c.has("alpha");
  if (has_lambda && has_alpha) fail("config: give lambda or alpha, not both");
  if (has_alpha) return std::pow(static_cast<double>(N), c.get_double("alpha", 0));
  return c.get_double("lambda", 0);
}

void write_manifest(const std::string& outdir, const std::string& kind,
                    const std::vector<std::string>& files, std::uint64_t seed) {
  write_json(outdir + "/manifest.json",
             nlohmann::json{{"kind", kind}, {"files", files}, {"master_seed", seed}});
}

int run_simulate(Config c) {
  const int N = c.get_int("N", 64);
  const MixtureSpec mix = parse_mixture(c.get_string("mixture", "3"));
  const double k = c.get_double("k", 3);
  const double lambda = parse_snr(c, N);
  const double beta = parse_beta_token(c.get_string("beta", "inf"));
  const std::uint64_t seed = c.get_u64("seed", 1);
  const std::uint64_t budget = c.get_u64("entry_budget", kDefaultEntryBudget);
  const std::string cache = c.get_string("cache_dir", default_cache_dir());
  const std::string outdir = require_outdir(c);

  IntegratorConfig icfg;
  icfg.beta = beta;
  icfg.h = c.get_double("h", 0);
  icfg.t_end = c.get_double("t_end", 20);
  icfg.record_every = c.get_double("record_every", 0.01);
  icfg.scheme = parse_scheme(c.get_string("scheme", "euler"));
  icfg.seed = derive_seed(seed, {1});
  icfg.record_energy = c.get_bool("record_energy", true);
  icfg.record_l0m = c.get_bool("record_l0m", true);
  icfg.record_gradnorm = c.get_bool("record_gradnorm", false);
  icfg.hit_thresholds = c.get_double_list("hit_thresholds", {});
  InitSpec init = parse_init(c);
  c.finish();

  Disorder dis = sample_disorder_cached(mix, N, derive_seed(seed, {0xd15ULL}), budget, cache);
  Model mdl = make_model_with_disorder(mix, SignalSpec{k, lambda}, std::move(dis));
  Rng rng(derive_seed(seed, {0}));
  Vec x0 = draw_initial(mdl, init, rng);
  Trajectory traj = run_trajectory(mdl, x0, icfg);

  write_trajectory_csv(outdir + "/trajectory.csv", traj);
  nlohmann::json hits = nlohmann::json::object();
  for (const auto& [thr, t] : traj.hitting) {
    char key[32];
    std::snprintf(key, sizeof key, "%.17g", thr);
    hits[key] = t ? nlohmann::json(*t) : nlohmann::json(nullptr);
  }
  write_json(outdir + "/simulate.json",
             nlohmann::json{{"N", N},
                            {"k", k},
                            {"lambda", lambda},
                            {"steps", traj.steps},
                            {"final_m", traj.m.back()},
                            {"hitting", hits}});
  write_manifest(outdir, "simulate", {"trajectory.csv", "simulate.json"}, seed);
  std::printf("simulate: %zu steps, final m = %.6f\n", traj.steps, traj.m.back());
  return 0;
}

ExperimentConfig sweep_config(Config& c) {
  ExperimentConfig cfg;
  cfg.mixture = parse_mixture(c.get_string("mixture", "3"));
  cfg.Ns.clear();
  for (double n : c.get_double_list("Ns", {16})) cfg.Ns.push_back(static_cast<int>(n));
  cfg.ks = c.get_double_list("ks", {3});
  const bool has_alphas = c.has("alphas"), has_lambdas = c.has("lambdas");
  if (has_alphas && has_lambdas) fail("config: give alphas or lambdas, not both");
  if (has_lambdas) {
    cfg.levels = c.get_double_list("lambdas", {});
    cfg.level_is_alpha = false;
  } else {
    cfg.levels = c.get_double_list("alphas", {1.0});
    cfg.level_is_alpha = true;
  }
  cfg.betas = parse_beta_list(c.get_string("betas", "inf"));
  cfg.n_disorder = c.get_int("n_disorder", 4);
  cfg.n_init = c.get_int("n_init", 50);
  cfg.rule.kind = c.get_string("rule", "strong") == "weak" ? SuccessRule::Kind::kWeak
                                                           : SuccessRule::Kind::kStrong;
  cfg.rule.eps = c.get_double("eps", 0.1);
  cfg.rule.t0 = c.get_double("t0", 1);
  cfg.rule.t1 = c.get_double("t1", 20);
  cfg.integrator.h = c.get_double("h", 0);
  cfg.integrator.scheme = parse_scheme(c.get_string("scheme", "euler"));
  cfg.init = parse_init(c);
  cfg.master_seed = c.get_u64("seed", 1);
  cfg.n_workers = c.get_int("workers", 1);
  cfg.entry_budget = c.get_u64("entry_budget", kDefaultEntryBudget);
  cfg.cache_dir = c.get_string("cache_dir", default_cache_dir());
  return cfg;
}

int run_sweep(Config c) {
  ExperimentConfig cfg = sweep_config(c);
  cfg.outdir = require_outdir(c);
  c.finish();
  PhaseDiagramResult res = run_phase_diagram(cfg);
  std::size_t errs = 0;
  for (const auto& cell : res.cells) errs += cell.errors;
  std::printf("sweep: %zu cells, %zu replica errors, wall %.1f s\n", res.cells.size(), errs,
              res.wall_seconds);
  return 0;
}

int run_threshold(Config c) {
  LambdaCOptions opts;
  opts.mixture = parse_mixture(c.get_string("mixture", "3"));
  opts.k = c.get_double("k", 3);
  opts.beta = parse_beta_token(c.get_string("beta", "inf"));
  opts.rule.kind = c.get_string("rule", "strong") == "weak" ? SuccessRule::Kind::kWeak
                                                            : SuccessRule::Kind::kStrong;
  opts.rule.eps = c.get_double("eps", 0.1);
  opts.rule.t0 = c.get_double("t0", 1);
  opts.rule.t1 = c.get_double("t1", 5);
  opts.integrator.h = c.get_double("h", 0);
  opts.integrator.scheme = parse_scheme(c.get_string("scheme", "euler"));
  opts.init = parse_init(c);
  opts.n_disorder = c.get_int("n_disorder", 4);
  opts.n_init = c.get_int("n_init", 50);
  opts.bracket_lo = c.get_double("bracket_lo", 0);
  opts.bracket_hi = c.get_double("bracket_hi", 0);
  opts.rel_width = c.get_double("rel_width", 0.10);
  opts.master_seed = c.get_u64("seed", 1);
  opts.n_workers = c.get_int("workers", 1);
  opts.entry_budget = c.get_u64("entry_budget", kDefaultEntryBudget);
  opts.cache_dir = c.get_string("cache_dir", default_cache_dir());
  std::vector<double> ns = c.get_double_list("Ns", {16, 32, 64});
  const std::string outdir = require_outdir(c);
  c.finish();

  nlohmann::json per_n = nlohmann::json::array();
  std::vector<std::pair<double, double>> points;
  CsvWriter evals(outdir + "/threshold_evals.csv");
  for (const char* h : {"N", "lambda", "successes", "total", "fraction"}) evals.field(std::string(h));
  evals.end_row();
  for (double nd : ns) {
    const int N = static_cast<int>(nd);
    LambdaCResult r = estimate_lambda_c(N, opts);
    points.emplace_back(static_cast<double>(N), r.lambda_c);
    nlohmann::json j = to_json(r);
    j["N"] = N;
    per_n.push_back(j);
    for (const LambdaEval& e : r.evaluations) {
      evals.field(static_cast<std::uint64_t>(N));
      evals.field(e.lambda);
      evals.field(static_cast<std::uint64_t>(e.successes));
      evals.field(static_cast<std::uint64_t>(e.total));
      evals.field(e.fraction());
      evals.end_row();
    }
    std::printf("threshold: N = %d -> lambda_c = %.4f in [%.4f, %.4f]\n", N, r.lambda_c, r.lo,
                r.hi);
  }
  nlohmann::json out{{"per_N", per_n}};
  if (points.size() >= 3) {
    LineFit fit = fit_alpha_exponent(points);
    out["exponent_fit"] = {{"slope", fit.slope},
                           {"intercept", fit.intercept},
                           {"slope_stderr", fit.slope_stderr},
                           {"slope_ci", {fit.slope_ci.lo, fit.slope_ci.hi}},
                           {"r2", fit.r2}};
    std::printf("threshold: fitted exponent %.3f (r2 = %.3f)\n", fit.slope, fit.r2);
  }
  write_json(outdir + "/threshold.json", out);
  write_manifest(outdir, "threshold", {"threshold.json", "threshold_evals.csv"},
                 opts.master_seed);
  return 0;
}

int run_fewell(Config c) {
  const int N = c.get_int("N", 32);
  const MixtureSpec mix = parse_mixture(c.get_string("mixture", "3"));
  const double k = c.get_double("k", 3);
  const double lambda = parse_snr(c, N);
  const double beta = parse_beta_token(c.get_string("beta", "1"));
  const std::uint64_t seed = c.get_u64("seed", 1);
  const std::uint64_t budget = c.get_u64("entry_budget", kDefaultEntryBudget);
  const std::string cache = c.get_string("cache_dir", default_cache_dir());
  const std::string outdir = require_outdir(c);

  std::vector<double> grid = c.get_double_list("grid", {});
  if (grid.empty()) {
    // Default: symmetric window centers out to half the radius.
    const double r = std::sqrt(static_cast<double>(N));
    for (double f : {-0.5, -0.25, 0.0, 0.25, 0.5}) grid.push_back(f * r);
  }
  EntropyProfileOptions popts;
  popts.n_samples = c.get_int("n_samples", 2000);
  popts.eta = c.get_double("eta", 0);
  popts.noise_only = c.get_bool("noise_only", false);
  popts.seed = derive_seed(seed, {0xfe11ULL, 0});
  const std::string estimator = c.get_string("estimator", "importance");
  if (estimator == "ti" || estimator == "thermo") {
    popts.estimator = FeEstimator::kThermoIntegration;
  } else if (estimator != "importance") {
    fail("fewell: estimator must be importance or ti");
  }
  popts.ti.n_temps = c.get_int("ti_temps", popts.ti.n_temps);
  popts.ti.sample_steps = c.get_int("ti_sample_steps", popts.ti.sample_steps);
  popts.ti.burn_in_steps = c.get_int("ti_burn_in", popts.ti.burn_in_steps);
  popts.ti.n_batches = c.get_int("ti_batches", popts.ti.n_batches);
  popts.ti.mala_step = c.get_double("ti_mala_step", popts.ti.mala_step);
  const double eps_win = c.get_double("eps_window", 0.5);

  ExitTimeOptions xopts;
  xopts.band.delta = c.get_double("band_delta", 0.1);
  xopts.beta = beta;
  xopts.n_chains = c.get_int("n_chains", 100);
  xopts.horizon = c.get_double("horizon", 50);
  xopts.h = c.get_double("h", 0);
  xopts.burn_in_steps = c.get_int("burn_in", 1000);
  xopts.mala_step = c.get_double("mala_step", 0.1);
  xopts.beta_guard = c.get_double("beta_guard", std::max(1.0, beta));
  xopts.full_hamiltonian_target = c.get_bool("full_hamiltonian_target", true);
  xopts.seed = derive_seed(seed, {0xfe11ULL, 1});
  c.finish();

  Disorder dis = sample_disorder_cached(mix, N, derive_seed(seed, {0xd15ULL}), budget, cache);
  Model mdl = make_model_with_disorder(mix, SignalSpec{k, lambda}, std::move(dis));

  WellReport well = entropy_profile(mdl, beta, grid, eps_win, popts);
  ExitTimeResult exits = exit_time_experiment(mdl, xopts);
  write_exit_times_csv(outdir + "/exit_times.csv", exits);
  write_json(outdir + "/fewell.json",
             nlohmann::json{{"N", N},
                            {"k", k},
                            {"lambda", lambda},
                            {"entropy_profile", to_json(well)},
                            {"exit_times", to_json(exits)}});
  write_manifest(outdir, "fewell", {"fewell.json", "exit_times.csv"}, seed);
  std::printf("fewell: %zu/%d chains censored, median tau = %.3f\n",
              static_cast<std::size_t>(exits.n_censored), xopts.n_chains, exits.median);
  return 0;
}

int run_check_init(Config c) {
  const int N = c.get_int("N", 128);
  const MixtureSpec mix = parse_mixture(c.get_string("mixture", "3"));
  const double k = c.get_double("k", 3);
  const double lambda = parse_snr(c, N);
  const double beta = parse_beta_token(c.get_string("beta", "0"));
  const std::uint64_t seed = c.get_u64("seed", 1);
  const std::uint64_t budget = c.get_u64("entry_budget", kDefaultEntryBudget);
  const std::string cache = c.get_string("cache_dir", default_cache_dir());
  const int n_samples = c.get_int("n_samples", 200);
  const std::string outdir = require_outdir(c);

  Condition1Options c1;
  const std::string level = c.get_string("level", "1");
  if (level == "inf" || level == "infinity")
    c1.level = kWeakInfinityLevel;
  else
    c1.level = std::stoi(level);
  c1.delta = c.get_double("delta", 0.25);
  c1.T = c.get_double("T", 2);
  c1.grid_dt = c.get_double("grid_dt", 0.05);
  c1.semigroup.n_replicas = c.get_int("semigroup_replicas", 1000);
  c1.semigroup.h = c.get_double("semigroup_h", 1e-3);
  c1.semigroup.seed = derive_seed(seed, {0x5eedULL});
  std::vector<double> epsilons = c.get_double_list("epsilons", {});
  InitSpec init = parse_init(c);
  c.finish();

  Disorder dis = sample_disorder_cached(mix, N, derive_seed(seed, {0xd15ULL}), budget, cache);
  Model mdl = make_model_with_disorder(mix, SignalSpec{k, lambda}, std::move(dis));

  std::vector<Vec> samples;
  samples.reserve(static_cast<std::size_t>(n_samples));
  Rng rng(derive_seed(seed, {0x1a17ULL}));
  for (int i = 0; i < n_samples; ++i) samples.push_back(draw_initial(mdl, init, rng));

  ConditionReport rep1 = condition1_check(mdl, beta, samples, c1);
  if (epsilons.empty()) {
    const double scale = std::pow(static_cast<double>(N), -c1.delta);
    for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) epsilons.push_back(f * scale);
  }
  Condition2Curve curve = condition2_check(samples, epsilons);
  const double c2prime = condition2_prime_fraction(samples, N, c1.delta);

  write_json(outdir + "/check_init.json",
             nlohmann::json{{"N", N},
                            {"beta", beta},
                            {"n_samples", n_samples},
                            {"condition1", to_json(rep1)},
                            {"condition2", to_json(curve)},
                            {"condition2_prime_violating_fraction", c2prime}});
  write_manifest(outdir, "check_init", {"check_init.json"}, seed);
  std::printf("check-init: condition1 violating fraction %.4f, condition2' %.4f\n",
              rep1.fraction_violating, c2prime);
  return 0;
}

int run_baseline(Config c) {
  const int N = c.get_int("N", 64);
  const int k = c.get_int("k", 3);
  const double lambda = parse_snr(c, N);
  const int iters = c.get_int("iters", 50);
  const int M = c.get_int("M", 1);
  const int n_trials = c.get_int("n_trials", 20);
  const std::uint64_t seed = c.get_u64("seed", 1);
  const std::string outdir = require_outdir(c);
  c.finish();

  nlohmann::json trials = nlohmann::json::array();
  double mean_final = 0;
  for (int t = 0; t < n_trials; ++t) {
    const std::uint64_t tseed = derive_seed(seed, {0xba5eULL, static_cast<std::uint64_t>(t)});
    SpikedTensor spiked = M > 1 ? make_spiked_tensor_average(k, N, lambda, M, tseed)
                                : make_spiked_tensor(k, N, lambda, tseed);
    Rng rng(derive_seed(tseed, {1}));
    Vec x0 = uniform_sphere(N, rng);
    const double inv = 1.0 / std::sqrt(static_cast<double>(N));
    for (double& v : x0) v *= inv;  // power iteration works on the unit sphere
    PowerIterationResult r = tensor_power_iteration(spiked, x0, iters, derive_seed(tseed, {2}));
    trials.push_back({{"overlap", r.overlap}, {"restarted", r.restarted}});
    mean_final += r.overlap.back();
  }
  mean_final /= n_trials;
  write_json(outdir + "/baseline.json", nlohmann::json{{"N", N},
                                                       {"k", k},
                                                       {"lambda", lambda},
                                                       {"M", M},
                                                       {"effective_lambda", effective_lambda(lambda, M)},
                                                       {"iters", iters},
                                                       {"mean_final_overlap", mean_final},
                                                       {"trials", trials}});
  write_manifest(outdir, "baseline", {"baseline.json"}, seed);
  std::printf("baseline: mean final overlap %.4f over %d trials\n", mean_final, n_trials);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spiked-tensor landscape laboratory"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::vector<std::string> sets;
  };
  auto add_common = [](CLI::App* sub, SubArgs* args) {
    sub->add_option("--config", args->config, "key=value config file");
    sub->add_option("--set", args->sets, "override: key=value (repeatable)");
  };

  SubArgs a_sim, a_sweep, a_thr, a_few, a_chk, a_base;
  CLI::App* sim = app.add_subcommand("simulate", "run one trajectory, write CSV");
  add_common(sim, &a_sim);
  CLI::App* sweep = app.add_subcommand("sweep", "phase-diagram grid sweep");
  add_common(sweep, &a_sweep);
  CLI::App* thr = app.add_subcommand("threshold", "lambda_c bisection + exponent fit");
  add_common(thr, &a_thr);
  CLI::App* few = app.add_subcommand("fewell", "entropy profile + exit times");
  add_common(few, &a_few);
  CLI::App* chk = app.add_subcommand("check-init", "Condition 1/2 reports");
  add_common(chk, &a_chk);
  CLI::App* base = app.add_subcommand("baseline", "tensor power iteration");
  add_common(base, &a_base);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(load_config(a_sim.config, a_sim.sets));
    if (sweep->parsed()) return run_sweep(load_config(a_sweep.config, a_sweep.sets));
    if (thr->parsed()) return run_threshold(load_config(a_thr.config, a_thr.sets));
    if (few->parsed()) return run_fewell(load_config(a_few.config, a_few.sets));
    if (chk->parsed()) return run_check_init(load_config(a_chk.config, a_chk.sets));
    if (base->parsed()) return run_baseline(load_config(a_base.config, a_base.sets));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
