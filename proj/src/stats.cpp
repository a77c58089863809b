#include "spikelab/stats.hpp"

#include <algorithm>
#include <cmath>

namespace spikelab {

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) fail("wilson_interval: zero trials");
  if (successes > trials) fail("wilson_interval: successes > trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double ks_statistic_normal(Vec samples) {
  if (samples.empty()) fail("ks_statistic_normal: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = normal_cdf(samples[i]);
    d = std::max(d, std::max(f - i / n, (i + 1) / n - f));
  }
  return d;
}

LineFit fit_line(const Vec& xs, const Vec& ys) {
  const std::size_t n = xs.size();
  if (n != ys.size() || n < 2) fail("fit_line: need >= 2 paired points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0) fail("fit_line: degenerate x values");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - (f.intercept + f.slope * xs[i]);
    ssr += e * e;
  }
  f.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
  if (n > 2) {
    f.slope_stderr = std::sqrt(ssr / (static_cast<double>(n) - 2) / sxx);
    const double t = student_t_975(static_cast<int>(n) - 2);
    f.slope_ci = {f.slope - t * f.slope_stderr, f.slope + t * f.slope_stderr};
  } else {
    f.slope_stderr = 0;
    f.slope_ci = {f.slope, f.slope};
  }
  return f;
}

double log_mean_exp(const Vec& a) {
  if (a.empty()) fail("log_mean_exp: empty input");
  const double amax = *std::max_element(a.begin(), a.end());
  if (!std::isfinite(amax)) return amax;
  double s = 0;
  for (double v : a) s += std::exp(v - amax);
  return amax + std::log(s / static_cast<double>(a.size()));
}

double log_mean_exp_jackknife_stderr(const Vec& a) {
  const std::size_t n = a.size();
  if (n < 2) fail("log_mean_exp_jackknife_stderr: need >= 2 values");
  const double amax = *std::max_element(a.begin(), a.end());
  double s = 0;
  for (double v : a) s += std::exp(v - amax);
  Vec loo(n);
  for (std::size_t i = 0; i < n; ++i)
    loo[i] = amax + std::log((s - std::exp(a[i] - amax)) / static_cast<double>(n - 1));
  double m = 0;
  for (double v : loo) m += v;
  m /= static_cast<double>(n);
  double var = 0;
  for (double v : loo) var += (v - m) * (v - m);
  return std::sqrt(var * (static_cast<double>(n) - 1) / static_cast<double>(n));
}

double ess_exp_weights(const Vec& a) {
  if (a.empty()) fail("ess_exp_weights: empty input");
  const double amax = *std::max_element(a.begin(), a.end());
  double s1 = 0, s2 = 0;
  for (double v : a) {
    const double w = std::exp(v - amax);
    s1 += w;
    s2 += w * w;
  }
  return s1 * s1 / s2;
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1, qam = a - 1;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  fail("reg_inc_beta: continued fraction did not converge");
}

}  // namespace

double reg_inc_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) fail("reg_inc_beta: parameters must be positive");
  if (x < 0 || x > 1) fail("reg_inc_beta: x outside [0,1]");
  if (x == 0) return 0;
  if (x == 1) return 1;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1) / (a + b + 2)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double reg_inc_beta_inv(double a, double b, double p) {
  if (p < 0 || p > 1) fail("reg_inc_beta_inv: p outside [0,1]");
  if (p == 0) return 0;
  if (p == 1) return 1;
  double lo = 0, hi = 1;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (reg_inc_beta(a, b, mid) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-16) break;
  }
  return 0.5 * (lo + hi);
}

double quantile(Vec samples, double q) {
  if (samples.empty()) fail("quantile: empty sample");
  if (q < 0 || q > 1) fail("quantile: q outside [0,1]");
  std::sort(samples.begin(), samples.end());
  const double h = q * (static_cast<double>(samples.size()) - 1);
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= samples.size()) return samples.back();
  const double frac = h - static_cast<double>(i);
  return samples[i] * (1 - frac) + samples[i + 1] * frac;
}

double student_t_975(int dof) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                 2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                 2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                 2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) fail("student_t_975: dof must be >= 1");
  if (dof <= 30) return table[dof - 1];
  // Cornish-Fisher style tail correction; exact enough for reporting CIs.
  return 1.959964 + 2.372 / static_cast<double>(dof);
}

}  // namespace spikelab
