// Initial-condition laws: direct samplers against closed-form latitude
// distributions (the overlap of a uniform point is a shifted symmetric Beta),
// the latitude-window volume against the regularized incomplete beta, and the
// MALA chain against an independently computed 1-d Gibbs marginal.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "spikelab/common.hpp"
#include "spikelab/initializers.hpp"
#include "spikelab/kernels.hpp"
#include "spikelab/landscape.hpp"
#include "spikelab/rng.hpp"
#include "spikelab/stats.hpp"

using namespace spikelab;

namespace {

Model noise_model(std::vector<MixtureTerm> terms, int N, std::uint64_t seed) {
  return make_model(make_mixture(std::move(terms)), SignalSpec{3, 0.0}, N, seed);
}

double norm2(const Vec& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s;
}

// CDF of the overlap m = x_1 / sqrt(N) of a uniform point on the sphere:
// m ~ 2 Beta(a, a) - 1 with a = (N - 1) / 2.
double overlap_cdf(int N, double t) {
  const double a = 0.5 * (N - 1);
  return reg_inc_beta(a, a, 0.5 * (1 + t));
}

// Simpson integration of f over [lo, hi] with an even number of panels.
template <class F>
double simpson(F f, double lo, double hi, int panels) {
  double s = f(lo) + f(hi);
  const double h = (hi - lo) / panels;
  for (int i = 1; i < panels; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("uniform sphere draws have exact norm and the beta overlap law") {
  Rng rng(301);
  const int N = 24;
  const std::size_t R = 20000;
  double sum_m = 0, sum_m2 = 0;
  for (std::size_t i = 0; i < R; ++i) {
    const Vec x = uniform_sphere(N, rng);
    CHECK(norm2(x) == doctest::Approx(N).epsilon(1e-12));
    const double m = overlap_m(x);
    sum_m += m;
    sum_m2 += m * m;
  }
  // E[m] = 0 and E[m^2] = 1/N exactly; Var(m) = 1/N, Var(m^2) ~ 2/N^2.
  const double Rd = static_cast<double>(R);
  CHECK(std::abs(sum_m / Rd) < 5.0 / std::sqrt(N * Rd));
  CHECK(std::abs(sum_m2 / Rd - 1.0 / N) < 5.0 * std::sqrt(2.0) / (N * std::sqrt(Rd)));
  CHECK_THROWS(uniform_sphere(1, rng));
}

TEST_CASE("rescaled overlap of high-dimensional uniform draws is near-normal") {
  Rng rng(302);
  const int N = 400;
  const std::size_t R = 20000;
  Vec z(R);
  for (std::size_t i = 0; i < R; ++i) z[i] = std::sqrt(static_cast<double>(N)) *
                                             overlap_m(uniform_sphere(N, rng));
  // Exact-law distance from N(0,1) is O(1/N); sampling adds ~1/sqrt(R).
  CHECK(ks_statistic_normal(z) < 0.02);
}

TEST_CASE("uniform hemisphere keeps x1 positive with the folded-overlap law") {
  Rng rng(303);
  const int N = 100;
  const std::size_t R = 20000;
  double sum_m = 0, sum_x2 = 0;
  for (std::size_t i = 0; i < R; ++i) {
    const Vec x = uniform_hemisphere(N, rng);
    REQUIRE(x[0] > 0);
    CHECK(norm2(x) == doctest::Approx(N).epsilon(1e-12));
    sum_m += overlap_m(x);
    sum_x2 += x[1];
  }
  // E[m | m > 0] from the latitude density, computed by quadrature.
  const double a = 0.5 * (N - 3);
  const double z = simpson([&](double m) { return std::pow(1 - m * m, a); }, 0, 1, 2000);
  const double em = simpson([&](double m) { return m * std::pow(1 - m * m, a); }, 0, 1, 2000) / z;
  const double Rd = static_cast<double>(R);
  CHECK(sum_m / Rd == doctest::Approx(em).epsilon(0.05));
  // Other coordinates stay symmetric.
  CHECK(std::abs(sum_x2 / Rd) < 5.0 / std::sqrt(Rd));
}

TEST_CASE("fixed correlation pins x1 exactly and fills the subsphere") {
  Rng rng(304);
  const int N = 40;
  for (double r : {-0.75, 0.0, 0.3, 0.999}) {
    const Vec x = fixed_correlation(N, r, rng);
    CHECK(x[0] == r * std::sqrt(static_cast<double>(N)));
    CHECK(norm2(x) == doctest::Approx(N).epsilon(1e-10));
    double rest = 0;
    for (int i = 1; i < N; ++i) rest += x[i] * x[i];
    CHECK(rest == doctest::Approx(N * (1 - r * r)).epsilon(1e-9).scale(1e-12));
  }
  CHECK_THROWS(fixed_correlation(N, 1.0, rng));
  CHECK_THROWS(fixed_correlation(N, -1.2, rng));
  CHECK_THROWS(fixed_correlation(1, 0.0, rng));
}

TEST_CASE("latitude window draws follow the conditional beta law") {
  Rng rng(305);
  const int N = 16;
  const double lo = 0.1, hi = 0.5;
  const std::size_t R = 20000;
  // Three sub-bins of [lo, hi]; expected masses from the overlap CDF.
  const double edges[4] = {lo, 0.2, 0.3, hi};
  const double total = overlap_cdf(N, hi) - overlap_cdf(N, lo);
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t i = 0; i < R; ++i) {
    const Vec x = latitude_window_sample(N, lo, hi, rng);
    CHECK(norm2(x) == doctest::Approx(N).epsilon(1e-12));
    const double m = overlap_m(x);
    REQUIRE(m >= lo);
    REQUIRE(m <= hi);
    for (int b = 0; b < 3; ++b)
      if (m >= edges[b] && m < edges[b + 1]) ++counts[b];
  }
  for (int b = 0; b < 3; ++b) {
    const double want = (overlap_cdf(N, edges[b + 1]) - overlap_cdf(N, edges[b])) / total;
    CHECK(std::abs(static_cast<double>(counts[b]) / R - want) < 0.02);
  }
  CHECK_THROWS(latitude_window_sample(N, 0.5, 0.1, rng));
  CHECK_THROWS(latitude_window_sample(N, -1.5, 0.0, rng));
  CHECK_THROWS(latitude_window_sample(N, 0.0, 1.5, rng));
}

TEST_CASE("log volume fraction matches the incomplete-beta closed form") {
  // Independent route: vol fraction of {m in [lo, hi]} equals
  // I_{(1+hi)/2}(a,a) - I_{(1+lo)/2}(a,a) with a = (N-1)/2.
  struct Case {
    int N;
    double lo, hi;
  };
  for (const Case& c : {Case{8, -0.3, 0.4}, Case{16, 0.1, 0.5}, Case{32, -1.0, 0.0},
                        Case{64, 0.25, 0.75}, Case{128, -0.05, 0.05}}) {
    const double want = std::log(overlap_cdf(c.N, c.hi) - overlap_cdf(c.N, c.lo));
    CHECK(log_volume_fraction(c.N, c.lo, c.hi) == doctest::Approx(want).epsilon(1e-7));
  }
  // Full sphere: log(1) = 0.
  CHECK(std::abs(log_volume_fraction(16, -1.0, 1.0)) < 1e-9);
  // Deep tail window: compare against the complementary form, which stays
  // accurate when the mass is ~1e-35.
  const double a64 = 0.5 * (64 - 1);
  const double tail = reg_inc_beta(a64, a64, 0.5 * (1 - 0.99));
  CHECK(log_volume_fraction(64, 0.99, 1.0) == doctest::Approx(std::log(tail)).epsilon(1e-5));
  // Symmetry of the latitude density.
  CHECK(log_volume_fraction(24, 0.2, 0.6) ==
        doctest::Approx(log_volume_fraction(24, -0.6, -0.2)).epsilon(1e-10));
}

TEST_CASE("mala acceptance is exactly one at beta zero and norms are preserved") {
  const Model m = noise_model({{2, 1.0}, {3, 0.5}}, 16, 71);
  GibbsSampler::Options o;
  o.beta = 0;
  o.seed = 9;
  GibbsSampler chain(m, o);
  for (int i = 0; i < 50; ++i) {
    chain.advance(20, false);
    CHECK(norm2(chain.state()) == doctest::Approx(16).epsilon(1e-9));
  }
  CHECK(chain.acceptance_rate() == 1.0);
}

TEST_CASE("beta-zero mala visits latitudes with the uniform conditional law") {
  const Model m = noise_model({{2, 1.0}}, 16, 72);
  GibbsSampler::Options o;
  o.beta = 0;
  o.band_halfwidth = 0.5 * 4.0;  // |x_1| <= 2, i.e. |m| <= 0.5
  o.seed = 10;
  o.step = 0.15;
  GibbsSampler chain(m, o);
  chain.burn_in(500);
  const std::size_t R = 20000;
  std::size_t inner = 0;
  double sum_m = 0;
  for (std::size_t i = 0; i < R; ++i) {
    chain.advance(1, false);
    const double mm = overlap_m(chain.state());
    REQUIRE(std::abs(mm) <= 0.5);
    sum_m += mm;
    if (std::abs(mm) <= 0.25) ++inner;
  }
  const double want =
      (overlap_cdf(16, 0.25) - overlap_cdf(16, -0.25)) / (overlap_cdf(16, 0.5) - overlap_cdf(16, -0.5));
  // Correlated draws: allow a few percent absolute.
  CHECK(static_cast<double>(inner) / R == doctest::Approx(want).epsilon(0.08));
  CHECK(std::abs(sum_m / R) < 0.02);
}

TEST_CASE("mala with a rank-one energy matches the quadrature gibbs marginal") {
  // For a single p = 1 term, H0(x) = a1 <w, x>, so c = <w, x>/(|w| sqrt(N))
  // has density (1 - c^2)^{(N-3)/2} exp(-beta a1 |w| sqrt(N) c): a 1-d
  // integral no chain is involved in.
  const int N = 12;
  const Model m = noise_model({{1, 1.0}}, N, 73);
  const Vec& w = m.disorder.tensors[0].w;
  const double wn = std::sqrt(norm2(w));
  const double beta = 0.35;
  const double scale = beta * wn * std::sqrt(static_cast<double>(N));
  const double a = 0.5 * (N - 3);
  const double z =
      simpson([&](double c) { return std::pow(1 - c * c, a) * std::exp(-scale * c); }, -1, 1, 4000);
  const double want =
      simpson([&](double c) { return c * std::pow(1 - c * c, a) * std::exp(-scale * c); }, -1, 1,
              4000) /
      z;

  GibbsSampler::Options o;
  o.beta = beta;
  o.beta_guard = 0.5;
  o.seed = 11;
  GibbsSampler chain(m, o);
  chain.burn_in(1000);
  double sum_c = 0;
  const std::size_t R = 30000;
  for (std::size_t i = 0; i < R; ++i) {
    chain.advance(1, false);
    sum_c += kernels().dot(w.data(), chain.state().data(), static_cast<std::size_t>(N)) /
             (wn * std::sqrt(static_cast<double>(N)));
  }
  CHECK(std::abs(sum_c / R - want) < 0.05);
  CHECK(chain.acceptance_rate() > 0.3);
  CHECK(chain.acceptance_rate() < 1.0);
}

TEST_CASE("band restriction is a hard wall and a full band changes nothing") {
  const Model m = noise_model({{3, 1.0}}, 16, 74);
  GibbsSampler::Options o;
  o.beta = 0.4;
  o.beta_guard = 0.5;
  o.band_halfwidth = 1.0;
  o.seed = 12;
  GibbsSampler banded(m, o);
  for (int i = 0; i < 300; ++i) {
    banded.advance(1, false);
    REQUIRE(std::abs(banded.state()[0]) <= 1.0);
  }

  GibbsSampler::Options full = o;
  full.band_halfwidth = 4.0;  // sqrt(16): the whole sphere
  GibbsSampler::Options none = o;
  none.band_halfwidth = 0;
  GibbsSampler cf(m, full), cn(m, none);
  cf.advance(300, false);
  cn.advance(300, false);
  CHECK(cf.state() == cn.state());
}

TEST_CASE("hemisphere conditioning holds for even and odd mixtures") {
  for (auto terms : {std::vector<MixtureTerm>{{2, 1.0}}, std::vector<MixtureTerm>{{3, 1.0}}}) {
    const Model m = noise_model(terms, 16, 75);
    GibbsSampler::Options o;
    o.beta = 0.3;
    o.beta_guard = 0.5;
    o.hemisphere = true;
    o.seed = 13;
    GibbsSampler chain(m, o);
    chain.burn_in(200);
    for (int i = 0; i < 500; ++i) {
      chain.advance(1, false);
      REQUIRE(chain.state()[0] > 0);
    }
  }
}

TEST_CASE("off-center window restriction confines the chain to the window") {
  const int N = 16;
  const Model m = noise_model({{2, 1.0}}, N, 76);
  GibbsSampler::Options o;
  o.beta = 0;
  o.window_lo = 0.1 * 4.0;  // m in [0.1, 0.5]
  o.window_hi = 0.5 * 4.0;
  o.seed = 14;
  o.step = 0.1;
  GibbsSampler chain(m, o);
  chain.burn_in(500);
  const std::size_t R = 20000;
  std::size_t low_half = 0;
  for (std::size_t i = 0; i < R; ++i) {
    chain.advance(1, false);
    const double x1 = chain.state()[0];
    REQUIRE(x1 >= o.window_lo);
    REQUIRE(x1 <= o.window_hi);
    if (x1 < 0.3 * 4.0) ++low_half;
  }
  // Beta-zero occupancy of [0.1, 0.3) within [0.1, 0.5] from the uniform law.
  const double want =
      (overlap_cdf(N, 0.3) - overlap_cdf(N, 0.1)) / (overlap_cdf(N, 0.5) - overlap_cdf(N, 0.1));
  CHECK(static_cast<double>(low_half) / R == doctest::Approx(want).epsilon(0.08));
}

TEST_CASE("window options are validated") {
  const Model m = noise_model({{2, 1.0}}, 16, 77);
  GibbsSampler::Options o;
  o.window_lo = 0.4;
  o.window_hi = 2.0;

  GibbsSampler::Options bad = o;
  bad.band_halfwidth = 1.0;
  CHECK_THROWS(GibbsSampler(m, bad));
  bad = o;
  bad.hemisphere = true;
  CHECK_THROWS(GibbsSampler(m, bad));
  bad = o;
  bad.window_lo = 2.0;
  bad.window_hi = 0.4;
  CHECK_THROWS(GibbsSampler(m, bad));
  bad = o;
  bad.window_hi = 4.5;  // outside sqrt(16)
  CHECK_THROWS(GibbsSampler(m, bad));
  bad = o;
  bad.window_lo = -4.5;
  CHECK_THROWS(GibbsSampler(m, bad));
  CHECK_NOTHROW(GibbsSampler(m, o));
}

TEST_CASE("set_beta keeps the state, enforces the guard, and the chain keeps moving") {
  const Model m = noise_model({{2, 1.0}, {3, 0.5}}, 16, 78);
  GibbsSampler::Options o;
  o.beta = 0;
  o.beta_guard = 0.8;
  o.seed = 15;
  GibbsSampler chain(m, o);
  chain.burn_in(200);
  const Vec before = chain.state();
  chain.set_beta(0.5);
  CHECK(chain.state() == before);
  chain.set_beta(0.5);  // idempotent on the state
  CHECK(chain.state() == before);
  CHECK_THROWS(chain.set_beta(0.81));
  CHECK_THROWS(chain.set_beta(-0.1));
  chain.advance(500, false);
  CHECK(norm2(chain.state()) == doctest::Approx(16).epsilon(1e-9));
  CHECK(chain.state() != before);
}

TEST_CASE("draw_initial dispatches each kind and is deterministic in the generator") {
  const Model m = noise_model({{2, 1.0}, {3, 0.5}}, 16, 79);

  InitSpec u;
  u.kind = InitSpec::Kind::kUniform;
  Rng r1(500), r2(500);
  CHECK(draw_initial(m, u, r1) == draw_initial(m, u, r2));

  InitSpec fc;
  fc.kind = InitSpec::Kind::kFixedCorrelation;
  fc.r = 0.25;
  Rng r3(501);
  CHECK(draw_initial(m, fc, r3)[0] == 0.25 * 4.0);

  InitSpec hg;
  hg.kind = InitSpec::Kind::kGibbsNoise;
  hg.hemisphere = true;
  hg.beta_init = 0.5;
  hg.beta_guard = 1.0;
  hg.burn_in_steps = 100;
  Rng r4(502);
  CHECK(draw_initial(m, hg, r4)[0] > 0);

  InitSpec bg;
  bg.kind = InitSpec::Kind::kBandedGibbs;
  bg.band_halfwidth = 0.8;
  bg.beta_init = 0.5;
  bg.burn_in_steps = 100;
  Rng r5(503);
  CHECK(std::abs(draw_initial(m, bg, r5)[0]) <= 0.8);

  InitSpec bad = bg;
  bad.band_halfwidth = 0;
  Rng r6(504);
  CHECK_THROWS(draw_initial(m, bad, r6));
  InitSpec hot = hg;
  hot.beta_init = 2.0;  // exceeds the guard
  Rng r7(505);
  CHECK_THROWS(draw_initial(m, hot, r7));
}
