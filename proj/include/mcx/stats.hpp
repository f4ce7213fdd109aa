#pragma once

#include <vector>

namespace mcx {

// Regularized lower incomplete gamma P(a, x). Absolute error below 1e-12
// over the ranges used here (a = df/2 with df up to a few hundred).
double gamma_p(double a, double x);

// CDF of the chi-square distribution with df degrees of freedom.
double chi2_cdf(double x, int df);

// Standard normal CDF.
double normal_cdf(double x);

// Standard normal quantile (inverse CDF), Wichura's AS 241 (PPND16).
// p must lie in (0, 1).
double normal_quantile(double p);

// Kolmogorov-Smirnov distance of a sample against the standard normal CDF.
// The sample is copied and sorted internally.
double ks_distance_normal(std::vector<double> sample);

struct Interval {
  double lo;
  double hi;
};

// Wald confidence interval: estimate +/- z_{1-alpha/2} * se.
// level is clamped to at most 1 - 1e-12.
Interval wald_ci(double estimate, double se, double level = 0.95);

}  // namespace mcx
