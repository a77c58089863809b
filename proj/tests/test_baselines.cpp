// Spiked-tensor baseline: spike injection and observation averaging are
// checked entry-by-entry against their defining laws, and power iteration is
// checked against a naive full-loop contraction plus its known limits
// (instant alignment under a dominant spike, sign behavior by parity, and
// null overlap without a spike).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "spikelab/baselines.hpp"
#include "spikelab/initializers.hpp"
#include "spikelab/landscape.hpp"
#include "spikelab/rng.hpp"

using namespace spikelab;

namespace {

Vec unit_uniform(int N, Rng& rng) {
  Vec x = uniform_sphere(N, rng);
  const double s = 1.0 / std::sqrt(static_cast<double>(N));
  for (double& v : x) v *= s;
  return x;
}

// Naive trailing-slot contraction z_i = Y[i, j_1..j_{k-1}] x_{j_1}..x_{j_{k-1}}.
Vec contract_naive(const SpikedTensor& s, const Vec& x) {
  const int N = s.N;
  Vec z(N, 0.0);
  std::size_t total = s.y.w.size();
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    double prod = 1;
    for (int pos = 0; pos < s.k - 1; ++pos) {
      prod *= x[rest % N];
      rest /= N;
    }
    z[rest] += s.y.w[idx] * prod;  // rest is now the leading index
  }
  return z;
}

double norm(const Vec& x) {
  double t = 0;
  for (double v : x) t += v * v;
  return std::sqrt(t);
}

}  // namespace

TEST_CASE("the spike adds sqrt(N) lambda to the corner entry and nothing else") {
  const int N = 10, k = 3;
  const SpikedTensor clean = make_spiked_tensor(k, N, 0.0, 77);
  const SpikedTensor spiked = make_spiked_tensor(k, N, 2.5, 77);
  REQUIRE(clean.y.w.size() == spiked.y.w.size());
  CHECK(spiked.y.w[0] - clean.y.w[0] ==
        doctest::Approx(std::sqrt(10.0) * 2.5).epsilon(1e-12));
  for (std::size_t i = 1; i < clean.y.w.size(); ++i) REQUIRE(spiked.y.w[i] == clean.y.w[i]);
}

TEST_CASE("observation averaging keeps the spike and shrinks the noise variance") {
  const int N = 12, k = 3, M = 9;
  // M = 1 draws from its own stream, so check the law (unit variance), not
  // bitwise equality with the single-observation constructor.
  const SpikedTensor avg1 = make_spiked_tensor_average(k, N, 0.0, 1, 78);
  {
    double mean = 0;
    for (double v : avg1.y.w) mean += v;
    mean /= static_cast<double>(avg1.y.w.size());
    double var = 0;
    for (double v : avg1.y.w) var += (v - mean) * (v - mean);
    var /= static_cast<double>(avg1.y.w.size() - 1);
    CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / (avg1.y.w.size() - 1.0)));
  }
  const SpikedTensor avg1b = make_spiked_tensor_average(k, N, 0.0, 1, 78);
  CHECK(avg1.y.w == avg1b.y.w);

  const SpikedTensor noisy = make_spiked_tensor_average(k, N, 0.0, M, 79);
  double mean = 0;
  for (double v : noisy.y.w) mean += v;
  mean /= static_cast<double>(noisy.y.w.size());
  double var = 0;
  for (double v : noisy.y.w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(noisy.y.w.size() - 1);
  const double n = static_cast<double>(noisy.y.w.size());
  CHECK(std::abs(mean) < 5.0 / (std::sqrt(static_cast<double>(M)) * std::sqrt(n)));
  CHECK(std::abs(var - 1.0 / M) < 5.0 * std::sqrt(2.0 / (n - 1)) / M);

  const SpikedTensor planted = make_spiked_tensor_average(k, N, 1.5, M, 79);
  CHECK(planted.y.w[0] - noisy.y.w[0] ==
        doctest::Approx(std::sqrt(12.0) * 1.5).epsilon(1e-12));

  CHECK(effective_lambda(1.5, 9) == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(effective_lambda(2.0, 1) == 2.0);
}

TEST_CASE("power iteration matches the naive contraction loop") {
  Rng rng(600);
  for (int k : {2, 3}) {
    const int N = k == 2 ? 16 : 10;
    const SpikedTensor s = make_spiked_tensor(k, N, 2.5, 80 + k);
    const Vec x0 = unit_uniform(N, rng);
    const int iters = 25;
    const PowerIterationResult r = tensor_power_iteration(s, x0, iters);
    REQUIRE(static_cast<int>(r.overlap.size()) == iters);
    CHECK(norm(r.x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(!r.restarted);

    Vec x = x0;
    for (int it = 0; it < iters; ++it) {
      Vec z = contract_naive(s, x);
      const double zn = norm(z);
      REQUIRE(zn > 0);
      for (int i = 0; i < N; ++i) z[i] /= zn;
      x = z;
      CHECK(r.overlap[static_cast<std::size_t>(it)] == doctest::Approx(x[0]).epsilon(1e-9));
    }
    for (int i = 0; i < N; ++i) CHECK(r.x[i] == doctest::Approx(x[i]).epsilon(1e-8).scale(1e-10));

    // Deterministic.
    const PowerIterationResult r2 = tensor_power_iteration(s, x0, iters);
    CHECK(r2.x == r.x);
    CHECK(r2.overlap == r.overlap);
  }
}

TEST_CASE("a dominant spike aligns the iterate immediately") {
  Rng rng(601);
  const SpikedTensor s = make_spiked_tensor(3, 12, 1e8, 81);
  Vec x0 = unit_uniform(12, rng);
  if (x0[0] < 0) x0[0] = -x0[0];  // positive initial overlap
  const PowerIterationResult r = tensor_power_iteration(s, x0, 2);
  CHECK(r.overlap[0] >= 1.0 - 1e-6);
  CHECK(r.overlap[1] >= 1.0 - 1e-9);
}

TEST_CASE("parity controls the sign of the recovered spike direction") {
  Rng rng(602);
  Vec x0 = unit_uniform(16, rng);
  if (x0[0] > 0) x0[0] = -x0[0];  // negative initial overlap

  // Even order: the matrix iteration converges to the negative of the spike
  // when started on that side.
  const SpikedTensor even = make_spiked_tensor(2, 16, 50.0, 82);
  const PowerIterationResult re = tensor_power_iteration(even, x0, 40);
  CHECK(re.overlap.back() <= -0.99);

  // Odd order: the contraction squares the overlap, so the sign flips back.
  Vec y0 = unit_uniform(12, rng);
  if (y0[0] > 0) y0[0] = -y0[0];
  const SpikedTensor odd = make_spiked_tensor(3, 12, 1e4, 83);
  const PowerIterationResult ro = tensor_power_iteration(odd, y0, 20);
  CHECK(ro.overlap.back() >= 0.99);
}

TEST_CASE("without a spike the final overlap stays at the null scale") {
  Rng rng(603);
  const int N = 64;
  for (std::uint64_t seed : {84u, 85u, 86u, 87u, 88u}) {
    const SpikedTensor s = make_spiked_tensor(3, N, 0.0, seed);
    const PowerIterationResult r = tensor_power_iteration(s, unit_uniform(N, rng), 40);
    CHECK(std::abs(r.overlap.back()) <= 5.0 / std::sqrt(static_cast<double>(N)));
    CHECK(norm(r.x) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("spiked-tensor inputs are validated") {
  Rng rng(604);
  CHECK_THROWS(make_spiked_tensor(1, 16, 1.0, 1));
  CHECK_THROWS(make_spiked_tensor(3, 1, 1.0, 1));
  CHECK_THROWS(make_spiked_tensor(3, 16, -1.0, 1));
  CHECK_THROWS(make_spiked_tensor(3, 2048, 1.0, 1));  // exceeds the entry budget
  CHECK_THROWS(make_spiked_tensor_average(3, 16, 1.0, 0, 1));

  const SpikedTensor s = make_spiked_tensor(2, 16, 1.0, 89);
  Vec bad = unit_uniform(16, rng);
  for (double& v : bad) v *= 2;  // not unit
  CHECK_THROWS(tensor_power_iteration(s, bad, 5));
  CHECK_THROWS(tensor_power_iteration(s, unit_uniform(8, rng), 5));
  CHECK_THROWS(tensor_power_iteration(s, unit_uniform(16, rng), 0));
}
