#pragma once

// Small statistical helpers: chi-square tails, sample quantiles, and
// Kolmogorov-Smirnov distances.

#include <functional>
#include <span>
#include <vector>

namespace longtail {

/// Pr(chi2_df > w); 1 for w <= 0.
double chi2_sf(double w, double df);
/// Upper quantile: x with Pr(chi2_df <= x) = p.
double chi2_quantile(double p, double df);
double normal_cdf(double z);

/// Sample quantile (linear interpolation between order statistics).
double sample_quantile(std::vector<double> xs, double p);
double sample_quantile_sorted(std::span<const double> sorted, double p);
double mean(std::span<const double> xs);
/// Unbiased sample variance.
double variance(std::span<const double> xs);

/// One-sample KS distance sup |F_n - F|.
double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf);
/// Two-sample KS distance.
double ks_distance(std::vector<double> a, std::vector<double> b);
/// Asymptotic Kolmogorov p-value for a one-sample statistic on n points.
double ks_pvalue(double d, std::size_t n);
/// Asymptotic two-sample p-value.
double ks_pvalue_two_sample(double d, std::size_t n, std::size_t m);

}  // namespace longtail
