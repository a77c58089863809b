#include "spikelab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>
#include <thread>

#include "spikelab/common.hpp"
#include "spikelab/io.hpp"
#include "spikelab/kernels.hpp"

namespace spikelab {
namespace {

// Overflow-safe total entry count of the mixture's tensors at dimension N.
std::uint64_t mixture_entries(const MixtureSpec& mix, int N) {
  unsigned __int128 total = 0;
  for (const auto& tm : mix.terms) {
    unsigned __int128 n = 1;
    for (int i = 0; i < tm.p; ++i) {
      n *= static_cast<unsigned>(N);
      if (n > (unsigned __int128)UINT64_MAX) fail("mixture entry count overflows 64 bits");
    }
    total += n;
    if (total > (unsigned __int128)UINT64_MAX) fail("mixture entry count overflows 64 bits");
  }
  return static_cast<std::uint64_t>(total);
}

// JSON cannot hold inf/nan as numbers; report them as strings.
nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

nlohmann::json mixture_json(const MixtureSpec& mix) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& tm : mix.terms) arr.push_back({{"p", tm.p}, {"a", tm.a}});
  return arr;
}

struct Cell {
  int N = 0;
  double k = 0, beta = 0, lambda = 0, alpha = 0;
};

std::vector<Cell> build_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (int N : cfg.Ns)
    for (double k : cfg.ks)
      for (double level : cfg.levels)
        for (double beta : cfg.betas) {
          Cell c;
          c.N = N;
          c.k = k;
          c.beta = beta;
          if (cfg.level_is_alpha) {
            c.alpha = level;
            c.lambda = std::pow(static_cast<double>(N), level);
          } else {
            c.lambda = level;
            c.alpha = level > 0 ? std::log(level) / std::log(static_cast<double>(N))
                                : std::numeric_limits<double>::quiet_NaN();
          }
          cells.push_back(c);
        }
  return cells;
}

void validate_config(const ExperimentConfig& cfg, const std::vector<Cell>& cells) {
  if (cfg.mixture.terms.empty()) fail("phase diagram: empty mixture");
  if (cfg.Ns.empty() || cfg.ks.empty() || cfg.levels.empty() || cfg.betas.empty())
    fail("phase diagram: empty grid axis");
  if (cfg.n_disorder < 1 || cfg.n_init < 1) fail("phase diagram: need >= 1 replica per cell");
  if (cfg.n_workers < 1) fail("phase diagram: n_workers must be >= 1");
  if (!(cfg.rule.eps > 0) || !(cfg.rule.eps < 1)) fail("phase diagram: eps must be in (0,1)");
  if (!(cfg.rule.t0 >= 0) || !(cfg.rule.t1 >= cfg.rule.t0) || !(cfg.rule.t1 > 0))
    fail("phase diagram: success window needs 0 <= t0 <= t1, t1 > 0");
  for (int N : cfg.Ns) {
    if (N < 2) fail("phase diagram: N must be >= 2");
    const std::uint64_t total = mixture_entries(cfg.mixture, N);
    if (total > cfg.entry_budget)
      fail("phase diagram: N = " + std::to_string(N) + " needs " + std::to_string(total) +
           " tensor entries, over the budget of " + std::to_string(cfg.entry_budget));
  }
  for (double k : cfg.ks)
    if (!(k >= 1)) fail("phase diagram: k must be >= 1");
  for (const Cell& c : cells)
    if (!(c.lambda >= 0)) fail("phase diagram: lambda must be >= 0");
  bool any_finite_beta = false;
  for (double beta : cfg.betas)
    if (!is_gradient_descent(beta)) any_finite_beta = true;
  if (any_finite_beta && cfg.integrator.scheme == Scheme::kRk4)
    fail("phase diagram: the rk4 scheme is gradient-descent only (beta = inf)");
  // Replica seeds must be distinct (hash collisions would silently couple
  // replicas).
  std::set<std::uint64_t> seen;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int d = 0; d < cfg.n_disorder; ++d)
      for (int i = 0; i < cfg.n_init; ++i) {
        const std::uint64_t s = derive_seed(
            cfg.master_seed, {c, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i)});
        if (!seen.insert(s).second) fail("phase diagram: replica seed collision; change master_seed");
      }
}

std::uint64_t disorder_seed(std::uint64_t master, int N, int d) {
  return derive_seed(master,
                     {0xd15ULL, static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(d)});
}

struct ReplicaOutcome {
  bool ok = false;
  bool s1 = false, s2 = false;  // windows [t0,t1] and [min(2 t0, t1), t1]
  std::string err;
};

ReplicaOutcome run_replica(const Model& mdl, const SuccessRule& rule,
                           const IntegratorConfig& base, const InitSpec& init_template,
                           double beta, std::uint64_t rseed) {
  ReplicaOutcome out;
  try {
    Rng init_rng(derive_seed(rseed, {0}));
    Vec x0 = draw_initial(mdl, init_template, init_rng);

    IntegratorConfig cfg = base;
    cfg.beta = beta;
    cfg.seed = derive_seed(rseed, {1});
    cfg.t_end = rule.t1;
    cfg.record_every = rule.t1;  // observer-based evaluation; records unused
    cfg.record_energy = false;
    cfg.record_l0m = false;
    cfg.record_gradnorm = false;
    cfg.hit_thresholds.clear();

    const double thr = rule.threshold();
    const double start1 = rule.t0;
    const double start2 = std::min(2.0 * rule.t0, rule.t1);
    const double tend = rule.t1;
    const bool gd = is_gradient_descent(beta);
    const double sqrtn = std::sqrt(static_cast<double>(mdl.N));
    Vec gbuf(gd ? static_cast<std::size_t>(mdl.N) : 0);
    bool fail1 = false, fail2 = false;

    run_trajectory(mdl, x0, cfg,
                   [&](std::size_t step, double t, double m, const double* x) {
                     if (t >= start1 - 1e-9 && m < thr) fail1 = true;
                     if (t >= start2 - 1e-9 && m < thr) fail2 = true;
                     if (fail1 && fail2) return false;
                     // Deterministic-flow freeze-out: |dm/dt| <= |grad_S H|/sqrt(N),
                     // so a small enough gradient norm pins the remaining window
                     // on one side of the threshold.
                     if (gd && (step & 63) == 63) {
                       covariant_gradient(mdl, x, gbuf.data());
                       const double g = std::sqrt(kernels().dot(
                           gbuf.data(), gbuf.data(), static_cast<std::size_t>(mdl.N)));
                       const double margin = g * (tend - t) / sqrtn;
                       if (m - margin >= thr && margin <= 0.5 * (m - thr)) return false;
                       if (m + margin < thr && margin <= 0.5 * (thr - m)) {
                         fail1 = fail2 = true;
                         return false;
                       }
                     }
                     return true;
                   });
    out.s1 = !fail1;
    out.s2 = !fail2;
    out.ok = true;
  } catch (const std::exception& e) {
    out.err = e.what();
  }
  return out;
}

struct TaskResult {
  std::size_t succ = 0, succ2 = 0, total = 0, errors = 0;
  std::set<std::string> msgs;
};

Interval safe_wilson(std::size_t s, std::size_t n) {
  if (n == 0) return Interval{0.0, 1.0};
  return wilson_interval(s, n);
}

void write_phase_files(const ExperimentConfig& cfg, const PhaseDiagramResult& res) {
  std::filesystem::create_directories(cfg.outdir);
  const std::string csv_path = cfg.outdir + "/phase_diagram.csv";
  CsvWriter w(csv_path);
  for (const char* h : {"N", "k", "beta", "lambda", "alpha", "successes", "successes_late",
                        "total", "errors", "p", "ci_lo", "ci_hi", "p_late", "ci_late_lo",
                        "ci_late_hi"})
    w.field(std::string(h));
  w.end_row();
  for (const CellResult& c : res.cells) {
    w.field(static_cast<std::uint64_t>(c.N));
    w.field(c.k);
    w.field(c.beta);
    w.field(c.lambda);
    w.field(c.alpha);
    w.field(static_cast<std::uint64_t>(c.successes));
    w.field(static_cast<std::uint64_t>(c.successes_late));
    w.field(static_cast<std::uint64_t>(c.total));
    w.field(static_cast<std::uint64_t>(c.errors));
    const double p = c.total ? static_cast<double>(c.successes) / c.total : 0.0;
    const double p2 = c.total ? static_cast<double>(c.successes_late) / c.total : 0.0;
    w.field(p);
    w.field(c.ci.lo);
    w.field(c.ci.hi);
    w.field(p2);
    w.field(c.ci_late.lo);
    w.field(c.ci_late.hi);
    w.end_row();
  }
  nlohmann::json manifest = to_json(cfg);
  manifest["kind"] = "phase_diagram";
  manifest["files"] = {"phase_diagram.csv"};
  manifest["n_cells"] = res.cells.size();
  write_json(cfg.outdir + "/manifest.json", manifest);
}

}  // namespace

PhaseDiagramResult run_phase_diagram(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  const std::vector<Cell> cells = build_cells(cfg);
  validate_config(cfg, cells);

  struct Task {
    std::size_t cell;
    int d;
  };
  std::vector<Task> tasks;
  tasks.reserve(cells.size() * static_cast<std::size_t>(cfg.n_disorder));
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int d = 0; d < cfg.n_disorder; ++d) tasks.push_back({c, d});

  std::vector<TaskResult> results(tasks.size());
  auto run_task = [&](std::size_t ti) {
    const Task& tk = tasks[ti];
    const Cell& cell = cells[tk.cell];
    TaskResult r;
    try {
      Disorder dis = sample_disorder_cached(cfg.mixture, cell.N,
                                            disorder_seed(cfg.master_seed, cell.N, tk.d),
                                            cfg.entry_budget, cfg.cache_dir);
      Model mdl = make_model_with_disorder(cfg.mixture, SignalSpec{cell.k, cell.lambda},
                                           std::move(dis));
      for (int i = 0; i < cfg.n_init; ++i) {
        const std::uint64_t rseed =
            derive_seed(cfg.master_seed, {tk.cell, static_cast<std::uint64_t>(tk.d),
                                          static_cast<std::uint64_t>(i)});
        ReplicaOutcome o = run_replica(mdl, cfg.rule, cfg.integrator, cfg.init, cell.beta, rseed);
        if (o.ok) {
          ++r.total;
          if (o.s1) ++r.succ;
          if (o.s2) ++r.succ2;
        } else {
          ++r.errors;
          r.msgs.insert(o.err);
        }
      }
    } catch (const std::exception& e) {
      // Model/disorder construction failed: the whole task's replicas are lost.
      r.errors += static_cast<std::size_t>(cfg.n_init);
      r.msgs.insert(e.what());
    }
    results[ti] = std::move(r);
  };

  const int n_workers =
      static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.n_workers), tasks.size()));
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= tasks.size()) return;
        run_task(i);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Deterministic fold in task order (scheduling cannot reorder it).
  PhaseDiagramResult res;
  res.master_seed = cfg.master_seed;
  res.cells.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellResult& out = res.cells[c];
    out.N = cells[c].N;
    out.k = cells[c].k;
    out.beta = cells[c].beta;
    out.lambda = cells[c].lambda;
    out.alpha = cells[c].alpha;
  }
  std::vector<std::set<std::string>> msgs(cells.size());
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    CellResult& out = res.cells[tasks[ti].cell];
    const TaskResult& r = results[ti];
    out.successes += r.succ;
    out.successes_late += r.succ2;
    out.total += r.total;
    out.errors += r.errors;
    msgs[tasks[ti].cell].insert(r.msgs.begin(), r.msgs.end());
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    res.cells[c].ci = safe_wilson(res.cells[c].successes, res.cells[c].total);
    res.cells[c].ci_late = safe_wilson(res.cells[c].successes_late, res.cells[c].total);
    res.cells[c].error_messages.assign(msgs[c].begin(), msgs[c].end());
  }
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  if (!cfg.outdir.empty()) write_phase_files(cfg, res);
  return res;
}

// --- threshold bisection -----------------------------------------------------

namespace {

LambdaEval eval_lambda(int N, const LambdaCOptions& opts, double lambda) {
  ExperimentConfig cfg;
  cfg.mixture = opts.mixture;
  cfg.Ns = {N};
  cfg.ks = {opts.k};
  cfg.levels = {lambda};
  cfg.level_is_alpha = false;
  cfg.betas = {opts.beta};
  cfg.n_disorder = opts.n_disorder;
  cfg.n_init = opts.n_init;
  cfg.rule = opts.rule;
  cfg.integrator = opts.integrator;
  cfg.init = opts.init;
  cfg.master_seed = opts.master_seed;  // same seeds at every lambda: common
                                       // random numbers stabilize the bisection
  cfg.n_workers = opts.n_workers;
  cfg.entry_budget = opts.entry_budget;
  cfg.cache_dir = opts.cache_dir;
  const PhaseDiagramResult res = run_phase_diagram(cfg);
  const CellResult& c = res.cells.at(0);
  if (c.total == 0)
    fail("estimate_lambda_c: every replica failed at lambda = " + std::to_string(lambda) +
         (c.error_messages.empty() ? "" : (": " + c.error_messages.front())));
  return LambdaEval{lambda, c.successes, c.total};
}

}  // namespace

LambdaCResult estimate_lambda_c(int N, const LambdaCOptions& opts) {
  if (!(opts.rel_width > 0)) fail("estimate_lambda_c: rel_width must be > 0");
  LambdaCResult res;
  double lo = opts.bracket_lo > 0 ? opts.bracket_lo : 0.25 * std::sqrt(static_cast<double>(N));
  double hi = opts.bracket_hi > 0 ? opts.bracket_hi : 4.0 * std::sqrt(static_cast<double>(N));
  if (!(lo > 0) || !(hi > lo)) fail("estimate_lambda_c: need 0 < bracket_lo < bracket_hi");

  auto eval = [&](double lambda) {
    LambdaEval e = eval_lambda(N, opts, lambda);
    res.evaluations.push_back(e);
    return e;
  };

  LambdaEval elo = eval(lo), ehi = eval(hi);
  for (int w = 0; w < opts.max_widen && elo.fraction() >= 0.5; ++w) {
    lo /= 2;
    elo = eval(lo);
  }
  for (int w = 0; w < opts.max_widen && ehi.fraction() < 0.5; ++w) {
    hi *= 2;
    ehi = eval(hi);
  }
  if (elo.fraction() >= 0.5 || ehi.fraction() < 0.5)
    fail("estimate_lambda_c: could not bracket p = 1/2 in [" + std::to_string(lo) + ", " +
         std::to_string(hi) + "] after widening");
  // Monotonicity check on the bracketing evaluations (3-sigma slack).
  auto se = [](const LambdaEval& e) {
    const double p = e.fraction();
    return std::sqrt(std::max(p * (1 - p), 1e-12) / static_cast<double>(e.total));
  };
  if (elo.fraction() > ehi.fraction() + 3.0 * (se(elo) + se(ehi)))
    fail("estimate_lambda_c: success probability is not monotone across the bracket");

  int guard = 0;
  while (hi - lo > opts.rel_width * 0.5 * (hi + lo)) {
    if (++guard > 64) fail("estimate_lambda_c: bisection failed to converge");
    const double mid = 0.5 * (lo + hi);
    const LambdaEval em = eval(mid);
    if (em.fraction() < 0.5) {
      lo = mid;
      elo = em;
    } else {
      hi = mid;
      ehi = em;
    }
  }
  res.lambda_c = 0.5 * (lo + hi);
  res.lo = lo;
  res.hi = hi;
  res.p_lo_ci = safe_wilson(elo.successes, elo.total);
  res.p_hi_ci = safe_wilson(ehi.successes, ehi.total);
  return res;
}

LineFit fit_alpha_exponent(const std::vector<std::pair<double, double>>& n_lambda) {
  if (n_lambda.size() < 3) fail("fit_alpha_exponent: need >= 3 (N, lambda_c) points");
  Vec xs, ys;
  for (const auto& [n, lc] : n_lambda) {
    if (!(n > 1) || !(lc > 0)) fail("fit_alpha_exponent: points need N > 1 and lambda_c > 0");
    xs.push_back(std::log(n));
    ys.push_back(std::log(lc));
  }
  return fit_line(xs, ys);
}

// --- recipes ---------------------------------------------------------------

namespace {

// Shared per-recipe plumbing: loops (disorder, init) replicas, runs a full
// recorded trajectory, and lets the recipe classify it.
struct RecipeRun {
  const RecipeOptions& opts;
  std::uint64_t tag;
  RecipeReport rep;

  RecipeRun(const RecipeOptions& o, const std::string& name, std::uint64_t tag_) : opts(o), tag(tag_) {
    rep.name = name;
    rep.master_seed = o.master_seed;
    if (o.mixture.terms.empty()) fail(name + ": empty mixture");
    if (o.n_disorder < 1 || o.n_init < 1) fail(name + ": need >= 1 replica");
    if (!(o.t1 > 0) || o.t0 < 0 || o.t0 > o.t1)
      fail(name + ": bad window (need 0 <= t0 <= t1, t1 > 0)");
  }

  // classify(traj) -> success; start(mdl, rng) -> x0.
  template <typename StartFn, typename ClassifyFn>
  void run(double lambda, double beta, StartFn start, ClassifyFn classify, std::size_t* n_ok,
           std::size_t* n_succ) {
    *n_ok = 0;
    *n_succ = 0;
    for (int d = 0; d < opts.n_disorder; ++d) {
      Model mdl = [&] {
        Disorder dis = sample_disorder(opts.mixture, opts.N,
                                       disorder_seed(opts.master_seed, opts.N, d),
                                       opts.entry_budget);
        return make_model_with_disorder(opts.mixture, SignalSpec{opts.k, lambda}, std::move(dis));
      }();
      for (int i = 0; i < opts.n_init; ++i) {
        const std::uint64_t rseed = derive_seed(
            opts.master_seed, {tag, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i)});
        try {
          Rng rng(derive_seed(rseed, {0}));
          Vec x0 = start(mdl, rng);
          IntegratorConfig cfg = opts.integrator;
          cfg.beta = beta;
          cfg.seed = derive_seed(rseed, {1});
          cfg.t_end = opts.t1;
          cfg.record_every = std::min(opts.t1, std::max(cfg.h > 0 ? cfg.h : 1e-3, 0.05));
          cfg.record_energy = false;
          cfg.record_l0m = false;
          cfg.hit_thresholds.clear();
          Trajectory traj = run_trajectory(mdl, x0, cfg);
          ++*n_ok;
          if (classify(traj)) ++*n_succ;
        } catch (const std::exception& e) {
          if (rep.notes.size() < 20) rep.notes.push_back(e.what());
        }
      }
    }
  }
};

// min of m over recorded samples with t in [a, b]; +inf when none.
double window_min(const Trajectory& traj, double a, double b) {
  double mn = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.t.size(); ++i)
    if (traj.t[i] >= a - 1e-9 && traj.t[i] <= b + 1e-9) mn = std::min(mn, traj.m[i]);
  return mn;
}

}  // namespace

RecipeReport recipe_weak_to_strong(const RecipeOptions& opts) {
  RecipeRun rr(opts, "weak_to_strong", 0xa1);
  std::size_t n_ok = 0, n_weak = 0;
  std::size_t n_strong = 0;
  rr.run(
      opts.lambda, opts.beta,
      [&](const Model& mdl, Rng& rng) { return uniform_sphere(mdl.N, rng); },
      [&](const Trajectory& traj) {
        const auto tau = hitting_time(traj, opts.eps);
        if (!tau) return false;
        if (window_min(traj, std::max(opts.t0, *tau), opts.t1) >= 1.0 - opts.eps) ++n_strong;
        return true;  // "success" counts weak recoveries; strong tallied above
      },
      &n_ok, &n_weak);
  const double fw = n_ok ? static_cast<double>(n_weak) / n_ok : 0.0;
  const double fsw = n_weak ? static_cast<double>(n_strong) / n_weak : 0.0;
  rr.rep.metrics["n"] = static_cast<double>(n_ok);
  rr.rep.metrics["fraction_weak"] = fw;
  rr.rep.metrics["fraction_strong_given_weak"] = fsw;
  rr.rep.metrics["lambda"] = opts.lambda;
  rr.rep.pass = fw >= 0.9 && fsw >= 0.9;
  return rr.rep;
}

RecipeReport recipe_microscopic_start(const RecipeOptions& opts) {
  RecipeRun rr(opts, "microscopic_start", 0xa2);
  const double r = 1.0 / std::sqrt(static_cast<double>(opts.N));
  const double lambda = opts.gamma / std::pow(r, opts.k - 1.0);
  std::size_t n_ok = 0, n_succ = 0;
  rr.run(
      lambda, opts.beta,
      [&](const Model& mdl, Rng& rng) { return fixed_correlation(mdl.N, r, rng); },
      [&](const Trajectory& traj) { return hitting_time(traj, opts.eps).has_value(); }, &n_ok,
      &n_succ);
  rr.rep.metrics["n"] = static_cast<double>(n_ok);
  rr.rep.metrics["gamma"] = opts.gamma;
  rr.rep.metrics["r"] = r;
  rr.rep.metrics["lambda"] = lambda;
  // The defining relation lambda r^{k-1} = gamma, checked back.
  rr.rep.metrics["gamma_consistency_abs_err"] =
      std::abs(lambda * std::pow(r, opts.k - 1.0) - opts.gamma);
  const double f = n_ok ? static_cast<double>(n_succ) / n_ok : 0.0;
  rr.rep.metrics["fraction_success"] = f;
  rr.rep.pass = f >= 0.5;
  return rr.rep;
}

RecipeReport recipe_stability(const RecipeOptions& opts) {
  RecipeRun rr(opts, "stability", 0xa3);
  if (!(2.0 * opts.eps < 1.0)) fail("stability: needs 2*eps < 1");
  std::size_t n_ok = 0, n_succ = 0;
  rr.run(
      opts.lambda, opts.beta,
      [&](const Model& mdl, Rng& rng) { return fixed_correlation(mdl.N, 2.0 * opts.eps, rng); },
      [&](const Trajectory& traj) { return window_min(traj, 0.0, opts.t1) >= opts.eps; }, &n_ok,
      &n_succ);
  const double f = n_ok ? static_cast<double>(n_succ) / n_ok : 0.0;
  rr.rep.metrics["n"] = static_cast<double>(n_ok);
  rr.rep.metrics["fraction_stable"] = f;
  rr.rep.metrics["lambda"] = opts.lambda;
  rr.rep.pass = f >= 0.9;
  return rr.rep;
}

RecipeReport recipe_strong_impossible(const RecipeOptions& opts) {
  RecipeRun rr(opts, "strong_impossible_at_order_one_lambda", 0xa4);
  if (is_gradient_descent(opts.beta))
    fail("strong_impossible_at_order_one_lambda: needs finite beta (noise drives the decay)");
  std::size_t n_ok = 0, n_held = 0;
  rr.run(
      opts.lambda, opts.beta,
      [&](const Model& mdl, Rng& rng) {
        return fixed_correlation(mdl.N, 1.0 - 0.5 * opts.eps, rng);
      },
      [&](const Trajectory& traj) {
        return window_min(traj, opts.t0, opts.t1) >= 1.0 - opts.eps;
      },
      &n_ok, &n_held);
  const double f = n_ok ? static_cast<double>(n_held) / n_ok : 0.0;
  rr.rep.metrics["n"] = static_cast<double>(n_ok);
  rr.rep.metrics["fraction_held"] = f;
  rr.rep.metrics["lambda"] = opts.lambda;
  rr.rep.pass = f <= 0.1;  // pass = strong correlation decayed
  return rr.rep;
}

RecipeReport recipe_equatorial_pass_search(const RecipeOptions& opts) {
  RecipeRun rr(opts, "equatorial_pass_search", 0xa5);
  if (!is_gradient_descent(opts.beta))
    fail("equatorial_pass_search: gradient descent only (beta = inf)");
  if (opts.n_candidates < opts.n_top + opts.n_controls || opts.n_top < 1 || opts.n_controls < 1)
    fail("equatorial_pass_search: need n_candidates >= n_top + n_controls >= 2");
  const double r = 1.0 / std::sqrt(static_cast<double>(opts.N));

  std::size_t top_total = 0, top_succ = 0, ctl_total = 0, ctl_succ = 0;
  double mean_score_top = 0, mean_score_ctl = 0;
  for (int d = 0; d < opts.n_disorder; ++d) {
    Disorder dis = sample_disorder(opts.mixture, opts.N, disorder_seed(opts.master_seed, opts.N, d),
                                   opts.entry_budget);
    Model mdl =
        make_model_with_disorder(opts.mixture, SignalSpec{opts.k, opts.lambda}, std::move(dis));
    Rng rng(derive_seed(opts.master_seed, {0xa5, static_cast<std::uint64_t>(d)}));
    std::vector<Vec> cand(static_cast<std::size_t>(opts.n_candidates));
    Vec score(static_cast<std::size_t>(opts.n_candidates));
    Vec grad(static_cast<std::size_t>(mdl.N));
    for (int c = 0; c < opts.n_candidates; ++c) {
      cand[c] = fixed_correlation(mdl.N, r, rng);
      covariant_gradient(mdl, cand[c].data(), grad.data());
      score[c] = -grad[0] / std::sqrt(static_cast<double>(mdl.N));  // initial dm/dt
    }
    std::vector<int> order(cand.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (score[a] != score[b]) return score[a] > score[b];
      return a < b;  // deterministic tie-break
    });
    std::set<int> top(order.begin(), order.begin() + opts.n_top);
    std::vector<int> controls;  // draw-order picks, skipping the top set
    for (int c = 0; c < opts.n_candidates && static_cast<int>(controls.size()) < opts.n_controls;
         ++c)
      if (!top.count(c)) controls.push_back(c);

    auto run_one = [&](int c) {
      IntegratorConfig cfg = opts.integrator;
      cfg.beta = kInfBeta;
      cfg.seed = 0;
      cfg.t_end = opts.t1;
      cfg.record_every = std::min(opts.t1, std::max(cfg.h > 0 ? cfg.h : 1e-3, 0.05));
      cfg.record_energy = false;
      cfg.record_l0m = false;
      Trajectory traj = run_trajectory(mdl, cand[c], cfg);
      return hitting_time(traj, opts.eps).has_value();
    };
    for (int c : top) {
      ++top_total;
      if (run_one(c)) ++top_succ;
      mean_score_top += score[c];
    }
    for (int c : controls) {
      ++ctl_total;
      if (run_one(c)) ++ctl_succ;
      mean_score_ctl += score[c];
    }
  }
  const double ft = top_total ? static_cast<double>(top_succ) / top_total : 0.0;
  const double fc = ctl_total ? static_cast<double>(ctl_succ) / ctl_total : 0.0;
  rr.rep.metrics["n_top"] = static_cast<double>(top_total);
  rr.rep.metrics["n_control"] = static_cast<double>(ctl_total);
  rr.rep.metrics["fraction_top"] = ft;
  rr.rep.metrics["fraction_control"] = fc;
  rr.rep.metrics["mean_score_top"] = top_total ? mean_score_top / top_total : 0.0;
  rr.rep.metrics["mean_score_control"] = ctl_total ? mean_score_ctl / ctl_total : 0.0;
  rr.rep.metrics["lambda"] = opts.lambda;
  rr.rep.pass = ft > fc;
  rr.rep.notes.push_back("exploratory search; pass means the scored starts beat draw-order controls");
  return rr.rep;
}

// --- JSON views --------------------------------------------------------------

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json betas = nlohmann::json::array();
  for (double b : cfg.betas) betas.push_back(json_number(b));
  return nlohmann::json{
      {"mixture", mixture_json(cfg.mixture)},
      {"Ns", cfg.Ns},
      {"ks", cfg.ks},
      {"levels", cfg.levels},
      {"level_is_alpha", cfg.level_is_alpha},
      {"betas", betas},
      {"n_disorder", cfg.n_disorder},
      {"n_init", cfg.n_init},
      {"rule",
       {{"kind", cfg.rule.kind == SuccessRule::Kind::kWeak ? "weak" : "strong"},
        {"eps", cfg.rule.eps},
        {"t0", cfg.rule.t0},
        {"t1", cfg.rule.t1}}},
      {"integrator",
       {{"h", cfg.integrator.h},
        {"scheme", cfg.integrator.scheme == Scheme::kRk4 ? "rk4" : "euler"}}},
      {"init_kind", static_cast<int>(cfg.init.kind)},
      {"master_seed", cfg.master_seed},
      {"entry_budget", cfg.entry_budget}};
}

nlohmann::json to_json(const PhaseDiagramResult& res) {
  nlohmann::json cells = nlohmann::json::array();
  for (const CellResult& c : res.cells) {
    cells.push_back({{"N", c.N},
                     {"k", c.k},
                     {"beta", json_number(c.beta)},
                     {"lambda", c.lambda},
                     {"alpha", json_number(c.alpha)},
                     {"successes", c.successes},
                     {"successes_late", c.successes_late},
                     {"total", c.total},
                     {"errors", c.errors},
                     {"ci", {c.ci.lo, c.ci.hi}},
                     {"ci_late", {c.ci_late.lo, c.ci_late.hi}},
                     {"error_messages", c.error_messages}});
  }
  return nlohmann::json{{"master_seed", res.master_seed}, {"cells", cells}};
}

nlohmann::json to_json(const LambdaCResult& res) {
  nlohmann::json evals = nlohmann::json::array();
  for (const LambdaEval& e : res.evaluations)
    evals.push_back({{"lambda", e.lambda},
                     {"successes", e.successes},
                     {"total", e.total},
                     {"fraction", e.fraction()}});
  return nlohmann::json{{"lambda_c", res.lambda_c},
                        {"bracket", {res.lo, res.hi}},
                        {"p_lo_ci", {res.p_lo_ci.lo, res.p_lo_ci.hi}},
                        {"p_hi_ci", {res.p_hi_ci.lo, res.p_hi_ci.hi}},
                        {"evaluations", evals}};
}

nlohmann::json to_json(const RecipeReport& rep) {
  return nlohmann::json{{"name", rep.name},
                        {"pass", rep.pass},
                        {"metrics", rep.metrics},
                        {"master_seed", rep.master_seed},
                        {"notes", rep.notes}};
}

}  // namespace spikelab
