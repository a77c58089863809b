// Small statistics toolbox used by experiments and tests: binomial interval
// estimates, KS distance against the standard normal, least-squares lines
// with slope confidence intervals, log-mean-exp with jackknife errors,
// effective sample size of exponential weights, and the regularized
// incomplete beta function (which is also the latitude CDF on the sphere).
#pragma once

#include <cstddef>

#include "spikelab/common.hpp"

namespace spikelab {

struct Interval {
  double lo = 0;
  double hi = 0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

// Wilson score interval for a binomial proportion at normal quantile z
// (z = 1.96 for 95%).
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96);

double normal_cdf(double z);

// sup_t |F_hat(t) - Phi(t)| for the empirical CDF of `samples` (any order).
double ks_statistic_normal(Vec samples);

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double slope_stderr = 0;
  Interval slope_ci;  // 95% (Student-t when dof available, else normal)
  double r2 = 0;
};
LineFit fit_line(const Vec& xs, const Vec& ys);

// log( (1/n) sum_i exp(a_i) ), overflow-safe.
double log_mean_exp(const Vec& a);

// Leave-one-out jackknife standard error of log_mean_exp(a).
double log_mean_exp_jackknife_stderr(const Vec& a);

// Kish effective sample size of weights w_i = exp(a_i): (sum w)^2 / sum w^2.
double ess_exp_weights(const Vec& a);

// Regularized incomplete beta function I_x(a,b), a,b > 0, x in [0,1].
// Continued-fraction evaluation (Lentz), accurate to ~1e-14.
double reg_inc_beta(double a, double b, double x);

// Inverse of x -> reg_inc_beta(a, b, x) on [0,1].
double reg_inc_beta_inv(double a, double b, double p);

// q-quantile (linear interpolation) of a sample; sorts a copy.
double quantile(Vec samples, double q);

// Two-sided 97.5% Student-t quantile for `dof` degrees of freedom.
double student_t_975(int dof);

}  // namespace spikelab
