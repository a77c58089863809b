// Orchestration layer: phase-diagram sweeps (deterministic outcomes on
// pure-signal landscapes, worker-count independence, the documented seed
// recipe, disorder sharing across SNR levels, error containment), threshold
// bisection against a closed-form tanh-flow threshold, exponent fitting, and
// the named recipes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spikelab/common.hpp"
#include "spikelab/harness.hpp"
#include "spikelab/io.hpp"
#include "spikelab/rng.hpp"

using namespace spikelab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("spikelab_harness_test_" + std::to_string(++counter) + "_" +
            std::to_string(static_cast<unsigned long long>(std::random_device{}())));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Fn>
bool throws_containing(Fn&& fn, const std::string& needle) {
  try {
    fn();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

// On a pure-signal landscape H = -N lambda phi(m) the gradient flow closes on
// the overlap alone: dm/dt = lambda k m^{k-1} (1 - m^2).  Fine-step RK4 gives
// an independent prediction of everything the sweep should observe when the
// noise amplitude is negligible.
double signal_flow_m(double m0, double lambda, double k, double t_end) {
  const double dt = 1e-5;
  auto f = [&](double m) { return lambda * k * std::pow(m, k - 1.0) * (1.0 - m * m); };
  double m = m0;
  double t = 0;
  while (t < t_end - 1e-12) {
    const double h = std::min(dt, t_end - t);
    const double k1 = f(m);
    const double k2 = f(m + 0.5 * h * k1);
    const double k3 = f(m + 0.5 * h * k2);
    const double k4 = f(m + h * k3);
    m += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += h;
  }
  return m;
}

double signal_flow_crossing(double m0, double lambda, double k, double thr, double t_max) {
  const double dt = 1e-5;
  double m = m0, t = 0;
  auto f = [&](double m_) { return lambda * k * std::pow(m_, k - 1.0) * (1.0 - m_ * m_); };
  while (t < t_max) {
    if (m >= thr) return t;
    const double k1 = f(m);
    const double k2 = f(m + 0.5 * dt * k1);
    const double k3 = f(m + 0.5 * dt * k2);
    const double k4 = f(m + dt * k3);
    m += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += dt;
  }
  return t_max;
}

// A mixture whose tensors are drawn but whose amplitude cannot move the
// dynamics at test tolerances: the sweep machinery runs end to end while the
// trajectory is governed by the signal term alone.
MixtureSpec ghost_mixture(int p) { return make_mixture({{p, 1e-12}}); }

}  // namespace

TEST_CASE("phase diagram: pure-signal cells have exact outcomes") {
  ExperimentConfig cfg;
  cfg.mixture = ghost_mixture(3);
  cfg.Ns = {8};
  cfg.ks = {3.0};
  cfg.levels = {0.0, 8.0};  // raw lambda per cell
  cfg.level_is_alpha = false;
  cfg.betas = {kInfBeta};
  cfg.n_disorder = 2;
  cfg.n_init = 5;
  cfg.rule = SuccessRule{SuccessRule::Kind::kStrong, 0.1, 0.5, 1.0};
  cfg.integrator.h = 1e-3;
  cfg.init.kind = InitSpec::Kind::kFixedCorrelation;
  cfg.init.r = 0.5;
  cfg.master_seed = 3;

  // Flow oracle: at lambda = 8 the overlap crosses 0.9 long before the window
  // opens and is monotone; at lambda = 0 it is frozen at 0.5 < 0.9.
  REQUIRE(signal_flow_crossing(0.5, 8.0, 3.0, 0.9, 1.0) < 0.2);

  const PhaseDiagramResult res = run_phase_diagram(cfg);
  REQUIRE(res.cells.size() == 2);
  const CellResult& frozen = res.cells[0];
  const CellResult& driven = res.cells[1];

  CHECK(frozen.lambda == 0.0);
  CHECK(std::isnan(frozen.alpha));  // no alpha for lambda = 0
  CHECK(frozen.total == 10);
  CHECK(frozen.errors == 0);
  CHECK(frozen.successes == 0);
  CHECK(frozen.successes_late == 0);

  CHECK(driven.lambda == 8.0);
  CHECK(driven.alpha == 1.0);  // log 8 / log 8
  CHECK(driven.N == 8);
  CHECK(driven.beta == kInfBeta);
  CHECK(driven.total == 10);
  CHECK(driven.errors == 0);
  CHECK(driven.successes == 10);
  CHECK(driven.successes_late == 10);
  CHECK(driven.ci.lo > 0.5);
  CHECK(res.master_seed == 3);
  CHECK(res.wall_seconds >= 0.0);
}

TEST_CASE("phase diagram: late window catches a crossing inside (t0, 2 t0)") {
  // Tune lambda so the overlap crosses the weak threshold strictly between
  // t0 and 2 t0: the primary window must fail, the late window must pass.
  const double lambda = 1.859, k = 3.0, r = 0.2, eps = 0.5;
  const double t0 = 0.4, t1 = 1.2;
  const double t_cross = signal_flow_crossing(r, lambda, k, eps, t1);
  REQUIRE(t_cross > t0 + 0.05);
  REQUIRE(t_cross < 2 * t0 - 0.05);
  REQUIRE(signal_flow_m(r, lambda, k, 2 * t0) > eps + 0.02);  // margin for Euler bias
  REQUIRE(signal_flow_m(r, lambda, k, t0) < eps - 0.02);

  ExperimentConfig cfg;
  cfg.mixture = ghost_mixture(3);
  cfg.Ns = {8};
  cfg.ks = {k};
  cfg.levels = {lambda};
  cfg.level_is_alpha = false;
  cfg.betas = {kInfBeta};
  cfg.n_disorder = 1;
  cfg.n_init = 4;
  cfg.rule = SuccessRule{SuccessRule::Kind::kWeak, eps, t0, t1};
  cfg.integrator.h = 5e-4;
  cfg.init.kind = InitSpec::Kind::kFixedCorrelation;
  cfg.init.r = r;
  cfg.master_seed = 5;

  const PhaseDiagramResult res = run_phase_diagram(cfg);
  REQUIRE(res.cells.size() == 1);
  CHECK(res.cells[0].total == 4);
  CHECK(res.cells[0].successes == 0);       // m < eps at the window opening
  CHECK(res.cells[0].successes_late == 4);  // m > eps throughout [2 t0, t1]
}

TEST_CASE("phase diagram: results and files are identical for any worker count") {
  TempDir d1a, d1b, d2, d7;
  ExperimentConfig cfg;
  cfg.mixture = make_mixture({{3, 1.0}});  // real disorder: outcomes nontrivial
  cfg.Ns = {8};
  cfg.ks = {3.0};
  cfg.levels = {0.5, 4.0};
  cfg.level_is_alpha = false;
  cfg.betas = {0.7};
  cfg.n_disorder = 2;
  cfg.n_init = 3;
  cfg.rule = SuccessRule{SuccessRule::Kind::kWeak, 0.25, 0.2, 0.6};
  cfg.integrator.h = 2e-3;
  cfg.init.kind = InitSpec::Kind::kUniform;
  cfg.master_seed = 17;

  auto run_with = [&](int workers, const std::string& outdir) {
    ExperimentConfig c = cfg;
    c.n_workers = workers;
    c.outdir = outdir;
    return run_phase_diagram(c);
  };
  const PhaseDiagramResult r1a = run_with(1, d1a.str());
  const PhaseDiagramResult r1b = run_with(1, d1b.str());
  const PhaseDiagramResult r2 = run_with(2, d2.str());
  const PhaseDiagramResult r7 = run_with(7, d7.str());  // more workers than tasks

  auto check_same = [&](const PhaseDiagramResult& a, const PhaseDiagramResult& b) {
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
      CHECK(a.cells[i].successes == b.cells[i].successes);
      CHECK(a.cells[i].successes_late == b.cells[i].successes_late);
      CHECK(a.cells[i].total == b.cells[i].total);
      CHECK(a.cells[i].errors == b.cells[i].errors);
      CHECK(a.cells[i].ci.lo == b.cells[i].ci.lo);
      CHECK(a.cells[i].ci.hi == b.cells[i].ci.hi);
    }
  };
  check_same(r1a, r1b);
  check_same(r1a, r2);
  check_same(r1a, r7);

  const std::string csv = slurp(d1a.str() + "/phase_diagram.csv");
  CHECK(csv == slurp(d1b.str() + "/phase_diagram.csv"));
  CHECK(csv == slurp(d2.str() + "/phase_diagram.csv"));
  CHECK(csv == slurp(d7.str() + "/phase_diagram.csv"));
  CHECK(csv.rfind("N,k,beta,lambda,alpha,successes,successes_late,total,errors,"
                  "p,ci_lo,ci_hi,p_late,ci_late_lo,ci_late_hi\n",
                  0) == 0);
  CHECK(csv.find("wall") == std::string::npos);  // no timing leaks into files

  const std::string manifest = slurp(d1a.str() + "/manifest.json");
  CHECK(manifest == slurp(d2.str() + "/manifest.json"));
  CHECK(manifest == slurp(d7.str() + "/manifest.json"));
  const nlohmann::json j = nlohmann::json::parse(manifest);
  CHECK(j["kind"] == "phase_diagram");
  CHECK(j["n_cells"] == 2);
  CHECK(j["files"] == nlohmann::json({"phase_diagram.csv"}));
  CHECK(j["master_seed"] == 17);
  CHECK(!j.contains("wall_seconds"));
}

TEST_CASE("phase diagram: replicas reproduce from the documented seed recipe") {
  // Rebuild every replica by hand from the stated derivations: disorder seed
  // derive(master, {0xd15, N, d}), replica seed derive(master, {cell, d, i}),
  // init stream derive(rseed, {0}), integrator stream derive(rseed, {1}).
  const MixtureSpec mix = make_mixture({{3, 1.0}});
  const int N = 8, n_disorder = 2, n_init = 4;
  const double beta = 0.7, lambda = 1.5, h = 2e-3;
  const SuccessRule rule{SuccessRule::Kind::kWeak, 0.25, 0.5, 1.5};
  const std::uint64_t master = 11;

  ExperimentConfig cfg;
  cfg.mixture = mix;
  cfg.Ns = {N};
  cfg.ks = {3.0};
  cfg.levels = {lambda};
  cfg.level_is_alpha = false;
  cfg.betas = {beta};
  cfg.n_disorder = n_disorder;
  cfg.n_init = n_init;
  cfg.rule = rule;
  cfg.integrator.h = h;
  cfg.init.kind = InitSpec::Kind::kUniform;
  cfg.master_seed = master;
  const PhaseDiagramResult res = run_phase_diagram(cfg);
  REQUIRE(res.cells.size() == 1);
  REQUIRE(res.cells[0].errors == 0);

  std::size_t succ = 0, succ_late = 0, total = 0;
  for (int d = 0; d < n_disorder; ++d) {
    Disorder dis = sample_disorder(
        mix, N, derive_seed(master, {0xd15ULL, static_cast<std::uint64_t>(N),
                                     static_cast<std::uint64_t>(d)}));
    const Model mdl = make_model_with_disorder(mix, SignalSpec{3.0, lambda}, std::move(dis));
    for (int i = 0; i < n_init; ++i) {
      const std::uint64_t rseed = derive_seed(
          master, {0, static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i)});
      Rng init_rng(derive_seed(rseed, {0}));
      const Vec x0 = draw_initial(mdl, cfg.init, init_rng);
      IntegratorConfig ic;
      ic.beta = beta;
      ic.h = h;
      ic.seed = derive_seed(rseed, {1});
      ic.t_end = rule.t1;
      ic.record_every = rule.t1;
      ic.record_energy = false;
      ic.record_l0m = false;
      ic.record_gradnorm = false;
      bool fail1 = false, fail2 = false;
      const double thr = rule.threshold();
      const double start2 = std::min(2.0 * rule.t0, rule.t1);
      run_trajectory(mdl, x0, ic, [&](std::size_t, double t, double m, const double*) {
        if (t >= rule.t0 - 1e-9 && m < thr) fail1 = true;
        if (t >= start2 - 1e-9 && m < thr) fail2 = true;
        return true;  // halting early cannot change flags already final
      });
      ++total;
      if (!fail1) ++succ;
      if (!fail2) ++succ_late;
    }
  }
  CHECK(res.cells[0].total == total);
  CHECK(res.cells[0].successes == succ);
  CHECK(res.cells[0].successes_late == succ_late);
}

TEST_CASE("phase diagram: SNR levels share disorder draws (common random numbers)") {
  TempDir cache, out1, out2;
  ExperimentConfig cfg;
  cfg.mixture = make_mixture({{2, 0.7}});
  cfg.Ns = {6};
  cfg.ks = {3.0};
  cfg.levels = {0.5, 2.0, 7.0};
  cfg.level_is_alpha = false;
  cfg.betas = {kInfBeta};
  cfg.n_disorder = 3;
  cfg.n_init = 1;
  cfg.rule = SuccessRule{SuccessRule::Kind::kWeak, 0.3, 0.05, 0.2};
  cfg.integrator.h = 1e-3;
  cfg.master_seed = 23;
  cfg.cache_dir = cache.str();
  cfg.outdir = out1.str();
  run_phase_diagram(cfg);

  // 3 cells x 3 disorder draws touched the cache, but only n_disorder distinct
  // tensors exist: the disorder seed depends on (master, N, d) alone.
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(cache.path)) {
    (void)e;
    ++files;
  }
  CHECK(files == 3);
  for (int d = 0; d < 3; ++d) {
    const std::uint64_t ds =
        derive_seed(23, {0xd15ULL, 6ULL, static_cast<std::uint64_t>(d)});
    CHECK(fs::exists(cache.path / tensor_cache_filename(2, 6, ds)));
  }

  // A rerun served entirely from the cache produces byte-identical output.
  cfg.outdir = out2.str();
  run_phase_diagram(cfg);
  CHECK(slurp(out1.str() + "/phase_diagram.csv") == slurp(out2.str() + "/phase_diagram.csv"));
}

TEST_CASE("phase diagram: per-replica failures are contained, not fatal") {
  ExperimentConfig cfg;
  cfg.mixture = make_mixture({{2, 1.0}});
  cfg.Ns = {6};
  cfg.ks = {3.0};
  cfg.levels = {1.0};
  cfg.level_is_alpha = false;
  cfg.betas = {0.5};
  cfg.n_disorder = 2;
  cfg.n_init = 3;
  cfg.rule = SuccessRule{SuccessRule::Kind::kWeak, 0.3, 0.1, 0.3};
  cfg.integrator.h = 1e-3;
  cfg.init.kind = InitSpec::Kind::kBandedGibbs;
  cfg.init.band_halfwidth = 0;  // every draw_initial call throws
  cfg.master_seed = 29;

  PhaseDiagramResult res;
  REQUIRE_NOTHROW(res = run_phase_diagram(cfg));
  REQUIRE(res.cells.size() == 1);
  CHECK(res.cells[0].total == 0);
  CHECK(res.cells[0].errors == 6);
  CHECK(res.cells[0].successes == 0);
  REQUIRE(!res.cells[0].error_messages.empty());
  CHECK(res.cells[0].error_messages.front().find("band") != std::string::npos);
  CHECK(res.cells[0].ci.lo == 0.0);  // no-data interval is the whole [0, 1]
  CHECK(res.cells[0].ci.hi == 1.0);
}

TEST_CASE("phase diagram: configuration validation") {
  ExperimentConfig good;
  good.mixture = make_mixture({{2, 1.0}});
  good.Ns = {6};
  good.ks = {3.0};
  good.levels = {1.0};
  good.level_is_alpha = false;
  good.betas = {0.5};
  good.n_disorder = 1;
  good.n_init = 1;
  good.rule = SuccessRule{SuccessRule::Kind::kWeak, 0.3, 0.1, 0.3};
  good.integrator.h = 1e-3;
  good.master_seed = 1;

  auto fails_with = [&](auto&& mutate, const std::string& needle) {
    ExperimentConfig bad = good;
    mutate(bad);
    return throws_containing([&] { run_phase_diagram(bad); }, needle);
  };
  CHECK(fails_with([](ExperimentConfig& c) { c.mixture.terms.clear(); }, "empty mixture"));
  CHECK(fails_with([](ExperimentConfig& c) { c.Ns.clear(); }, "empty grid axis"));
  CHECK(fails_with([](ExperimentConfig& c) { c.levels.clear(); }, "empty grid axis"));
  CHECK(fails_with([](ExperimentConfig& c) { c.betas.clear(); }, "empty grid axis"));
  CHECK(fails_with([](ExperimentConfig& c) { c.n_disorder = 0; }, "replica"));
  CHECK(fails_with([](ExperimentConfig& c) { c.n_init = 0; }, "replica"));
  CHECK(fails_with([](ExperimentConfig& c) { c.n_workers = 0; }, "n_workers"));
  CHECK(fails_with([](ExperimentConfig& c) { c.rule.eps = 0; }, "eps"));
  CHECK(fails_with([](ExperimentConfig& c) { c.rule.eps = 1; }, "eps"));
  CHECK(fails_with([](ExperimentConfig& c) { c.rule.t0 = 0.5; c.rule.t1 = 0.2; }, "window"));
  CHECK(fails_with([](ExperimentConfig& c) { c.rule.t0 = 0; c.rule.t1 = 0; }, "window"));
  CHECK(fails_with([](ExperimentConfig& c) { c.Ns = {1}; }, "N must be >= 2"));
  CHECK(fails_with([](ExperimentConfig& c) { c.ks = {0.5}; }, "k must be >= 1"));
  CHECK(fails_with([](ExperimentConfig& c) { c.levels = {-1.0}; }, "lambda"));
  CHECK(fails_with(
      [](ExperimentConfig& c) { c.integrator.scheme = Scheme::kRk4; }, "rk4"));
  CHECK(fails_with([](ExperimentConfig& c) { c.entry_budget = 10; }, "budget"));
}

TEST_CASE("estimate_lambda_c: recovers the closed-form tanh-flow threshold") {
  // Pure signal with k = 1: dm/dt = lambda (1 - m^2), m(t) = tanh(lambda t +
  // atanh r).  The strong rule (m >= 1 - eps on [t0, t1], m monotone) flips
  // from certain failure to certain success at
  //   lambda* = (atanh(1 - eps) - atanh(r)) / t0.
  const double r = 0.5, eps = 0.1, t0 = 1.0;
  const double lambda_star = (std::atanh(1.0 - eps) - std::atanh(r)) / t0;

  LambdaCOptions opts;
  opts.mixture = ghost_mixture(2);
  opts.k = 1;
  opts.beta = kInfBeta;
  opts.rule = SuccessRule{SuccessRule::Kind::kStrong, eps, t0, 2.0};
  opts.integrator.h = 1e-3;
  opts.init.kind = InitSpec::Kind::kFixedCorrelation;
  opts.init.r = r;
  opts.n_disorder = 1;
  opts.n_init = 2;
  opts.bracket_lo = 0.25;
  opts.bracket_hi = 4.0;
  opts.rel_width = 0.05;
  opts.master_seed = 31;

  const LambdaCResult res = estimate_lambda_c(6, opts);
  CHECK(std::abs(res.lambda_c - lambda_star) < 0.06);
  CHECK(res.lo < res.lambda_c);
  CHECK(res.lambda_c < res.hi);
  CHECK(res.hi - res.lo <= 0.05 * 0.5 * (res.hi + res.lo) + 1e-12);
  REQUIRE(res.evaluations.size() >= 3);
  // The flow is deterministic, so the final bracket ends are 0/2 and 2/2
  // outcomes; their Wilson intervals are pinned at the respective endpoint.
  CHECK(res.p_lo_ci.lo == 0.0);
  CHECK(res.p_lo_ci.hi < res.p_hi_ci.hi);
  CHECK(res.p_hi_ci.hi == 1.0);
  CHECK(res.p_hi_ci.lo > res.p_lo_ci.lo);
  for (const LambdaEval& e : res.evaluations) {
    CHECK(e.total == 2);
    const bool certain = e.successes == 0 || e.successes == e.total;
    CHECK(certain);
    CHECK((e.lambda < lambda_star) == (e.fraction() < 0.5));
  }

  LambdaCOptions bad = opts;
  bad.rel_width = 0;
  CHECK(throws_containing([&] { estimate_lambda_c(6, bad); }, "rel_width"));
  bad = opts;
  bad.bracket_lo = 2.0;
  bad.bracket_hi = 1.0;
  CHECK(throws_containing([&] { estimate_lambda_c(6, bad); }, "bracket"));
}

TEST_CASE("fit_alpha_exponent: exact power law and input validation") {
  const double slope = 0.37, c = 2.3;
  std::vector<std::pair<double, double>> pts;
  for (double n : {4.0, 8.0, 16.0, 32.0}) pts.push_back({n, c * std::pow(n, slope)});
  const LineFit fit = fit_alpha_exponent(pts);
  CHECK(fit.slope == doctest::Approx(slope).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(c)).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.slope_ci.contains(slope));

  // A perturbed point moves the fit but keeps the slope in the right range.
  pts[1].second *= 1.08;
  const LineFit noisy = fit_alpha_exponent(pts);
  CHECK(std::abs(noisy.slope - slope) < 0.08);
  CHECK(noisy.r2 < 1.0);

  CHECK(throws_containing(
      [&] { fit_alpha_exponent({{4.0, 1.0}, {8.0, 2.0}}); }, "need >= 3"));
  CHECK(throws_containing(
      [&] { fit_alpha_exponent({{4.0, 1.0}, {8.0, 0.0}, {16.0, 2.0}}); }, "lambda_c > 0"));
  CHECK(throws_containing(
      [&] { fit_alpha_exponent({{1.0, 1.0}, {8.0, 1.0}, {16.0, 2.0}}); }, "N > 1"));
}

TEST_CASE("recipe: stability holds a supercritical start in place") {
  RecipeOptions opts;
  opts.mixture = ghost_mixture(3);
  opts.N = 8;
  opts.k = 3;
  opts.beta = kInfBeta;
  opts.lambda = 5.0;
  opts.eps = 0.2;  // start at m = 0.4; flow is increasing, so m >= eps always
  opts.t1 = 1.0;
  opts.n_disorder = 2;
  opts.n_init = 3;
  opts.integrator.h = 1e-3;
  opts.master_seed = 41;
  const RecipeReport rep = recipe_stability(opts);
  CHECK(rep.name == "stability");
  CHECK(rep.pass);
  CHECK(rep.metrics.at("n") == 6.0);
  CHECK(rep.metrics.at("fraction_stable") == 1.0);
  CHECK(rep.master_seed == 41);

  RecipeOptions bad = opts;
  bad.eps = 0.5;  // start would sit at m = 1
  CHECK(throws_containing([&] { recipe_stability(bad); }, "2*eps"));
}

TEST_CASE("recipe: microscopic start splits on gamma as the flow predicts") {
  RecipeOptions opts;
  opts.mixture = ghost_mixture(3);
  opts.N = 16;
  opts.k = 3;
  opts.beta = kInfBeta;
  opts.eps = 0.3;
  opts.t1 = 2.0;
  opts.n_disorder = 1;
  opts.n_init = 4;
  opts.integrator.h = 1e-3;
  opts.master_seed = 43;

  const double r = 0.25;  // N^{-1/2}
  opts.gamma = 2.0;       // lambda = gamma / r^2 = 32
  REQUIRE(signal_flow_crossing(r, 2.0 / (r * r), 3.0, opts.eps, opts.t1) < 0.5);
  RecipeReport rep = recipe_microscopic_start(opts);
  CHECK(rep.name == "microscopic_start");
  CHECK(rep.pass);
  CHECK(rep.metrics.at("fraction_success") == 1.0);
  CHECK(rep.metrics.at("lambda") == 32.0);
  CHECK(rep.metrics.at("r") == 0.25);
  CHECK(rep.metrics.at("gamma_consistency_abs_err") == 0.0);

  opts.gamma = 0.001;  // lambda = 0.016: crossing time ~ 15 >> t1
  REQUIRE(signal_flow_m(r, 0.001 / (r * r), 3.0, opts.t1) < opts.eps - 0.02);
  rep = recipe_microscopic_start(opts);
  CHECK_FALSE(rep.pass);
  CHECK(rep.metrics.at("fraction_success") == 0.0);
  CHECK(rep.metrics.at("gamma_consistency_abs_err") <= 1e-12);
}

TEST_CASE("recipe: weak-to-strong passes under a global tanh flow and fails frozen") {
  RecipeOptions opts;
  opts.mixture = ghost_mixture(2);
  opts.N = 8;
  opts.k = 1;  // dm/dt = lambda (1 - m^2): every start converges to m = 1
  opts.beta = kInfBeta;
  opts.lambda = 5.0;
  opts.eps = 0.2;
  opts.t0 = 1.0;
  opts.t1 = 3.0;
  opts.n_disorder = 2;
  opts.n_init = 5;
  opts.integrator.h = 1e-3;
  opts.master_seed = 47;
  RecipeReport rep = recipe_weak_to_strong(opts);
  CHECK(rep.name == "weak_to_strong");
  CHECK(rep.pass);
  CHECK(rep.metrics.at("n") == 10.0);
  CHECK(rep.metrics.at("fraction_weak") == 1.0);
  CHECK(rep.metrics.at("fraction_strong_given_weak") == 1.0);

  opts.lambda = 0.0;  // frozen overlaps: uniform starts rarely sit above 0.8
  rep = recipe_weak_to_strong(opts);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("recipe: strong hold decays at order-one lambda and finite beta") {
  RecipeOptions opts;
  opts.mixture = make_mixture({{3, 1.0}});
  opts.N = 16;
  opts.k = 3;
  opts.beta = 1.0;
  opts.lambda = 0.5;
  opts.eps = 0.2;
  opts.t0 = 1.0;
  opts.t1 = 3.0;
  opts.n_disorder = 2;
  opts.n_init = 5;
  opts.integrator.h = 2e-3;
  opts.master_seed = 53;
  const RecipeReport rep = recipe_strong_impossible(opts);
  CHECK(rep.name == "strong_impossible_at_order_one_lambda");
  CHECK(rep.metrics.at("n") == 10.0);
  // The curvature drift -kappa m at m = 0.9 dwarfs the order-one signal pull;
  // no replica can hold m >= 0.8 across [1, 3].
  CHECK(rep.pass);
  CHECK(rep.metrics.at("fraction_held") <= 0.1);

  RecipeOptions bad = opts;
  bad.beta = kInfBeta;
  CHECK(throws_containing([&] { recipe_strong_impossible(bad); }, "finite beta"));
}

TEST_CASE("recipe: equatorial pass search plumbing on a flat score landscape") {
  RecipeOptions opts;
  opts.mixture = ghost_mixture(3);
  opts.N = 16;
  opts.k = 3;
  opts.beta = kInfBeta;
  opts.lambda = 20.0;
  opts.eps = 0.3;
  opts.t1 = 1.5;
  opts.n_disorder = 1;
  opts.n_candidates = 12;
  opts.n_top = 3;
  opts.n_controls = 3;
  opts.integrator.h = 1e-3;
  opts.master_seed = 59;
  const RecipeReport rep = recipe_equatorial_pass_search(opts);
  CHECK(rep.name == "equatorial_pass_search");
  CHECK(rep.metrics.at("n_top") == 3.0);
  CHECK(rep.metrics.at("n_control") == 3.0);
  // All starts share the same overlap, hence the same score and the same
  // certain success: top cannot strictly beat controls.
  CHECK(rep.metrics.at("fraction_top") == 1.0);
  CHECK(rep.metrics.at("fraction_control") == 1.0);
  CHECK_FALSE(rep.pass);
  CHECK(std::abs(rep.metrics.at("mean_score_top") - rep.metrics.at("mean_score_control")) <
        1e-9);

  RecipeOptions bad = opts;
  bad.beta = 1.0;
  CHECK(throws_containing([&] { recipe_equatorial_pass_search(bad); }, "gradient descent"));
  bad = opts;
  bad.n_candidates = 4;
  CHECK(throws_containing([&] { recipe_equatorial_pass_search(bad); }, "n_candidates"));
}

TEST_CASE("json views: grid configs, sweep results, and recipe reports") {
  ExperimentConfig cfg;
  cfg.mixture = make_mixture({{3, 2.0}});
  cfg.Ns = {8, 16};
  cfg.betas = {kInfBeta};
  cfg.master_seed = 61;
  const nlohmann::json jc = to_json(cfg);
  CHECK(jc["betas"][0] == "inf");  // non-finite numbers become strings
  CHECK(jc["Ns"] == nlohmann::json({8, 16}));
  CHECK(jc["master_seed"] == 61);
  CHECK(jc["mixture"][0]["p"] == 3);
  CHECK(jc["mixture"][0]["a"] == 2.0);
  CHECK(jc["rule"]["kind"] == "weak");
  CHECK(jc["integrator"]["scheme"] == "euler");

  PhaseDiagramResult res;
  res.master_seed = 61;
  res.cells.resize(1);
  res.cells[0].N = 8;
  res.cells[0].beta = kInfBeta;
  res.cells[0].alpha = std::numeric_limits<double>::quiet_NaN();
  res.cells[0].successes = 3;
  res.cells[0].total = 4;
  const nlohmann::json jr = to_json(res);
  CHECK(jr["cells"][0]["beta"] == "inf");
  CHECK(jr["cells"][0]["alpha"] == "nan");
  CHECK(jr["cells"][0]["successes"] == 3);

  RecipeReport rep;
  rep.name = "stability";
  rep.pass = true;
  rep.metrics["fraction_stable"] = 1.0;
  const nlohmann::json jrep = to_json(rep);
  CHECK(jrep["name"] == "stability");
  CHECK(jrep["pass"] == true);
  CHECK(jrep["metrics"]["fraction_stable"] == 1.0);

  LambdaCResult lc;
  lc.lambda_c = 1.5;
  lc.lo = 1.4;
  lc.hi = 1.6;
  lc.evaluations.push_back(LambdaEval{1.4, 0, 2});
  const nlohmann::json jlc = to_json(lc);
  CHECK(jlc["lambda_c"] == 1.5);
  CHECK(jlc["bracket"] == nlohmann::json({1.4, 1.6}));
  CHECK(jlc["evaluations"][0]["fraction"] == 0.0);
}
