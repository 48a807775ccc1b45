#pragma once

// Log-likelihood under truncation and censoring, maximum likelihood fits,
// endpoint profiles and nested-model tests.
//
// Thresholds are excess thresholds in the same units as the records: a fit
// "above v" keeps records with lifetime > v and re-expresses every bound
// relative to v.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longtail/lexis.hpp"
#include "longtail/models.hpp"
#include "longtail/optimize.hpp"
#include "longtail/rng.hpp"

namespace longtail {

struct ThresholdedData {
  std::vector<LifetimeRecord> records;
  std::size_t n_below = 0;     // at or below the threshold, or censored there
  std::size_t n_ties = 0;      // observed exactly at the threshold
  std::size_t n_straddle = 0;  // interval-censored across the threshold
};

ThresholdedData above_threshold(std::span<const LifetimeRecord> records, double v);

/// Contribution of one record: log Pr(T in censoring set) - log Pr(T in
/// truncation set).
double record_loglik(const Model& model, const LifetimeRecord& record);

struct LoglikEval {
  double value = 0.0;
  std::vector<std::size_t> offending;  // records whose contribution is not finite
};

/// Sum of record contributions; -inf (with the offending indices) when a
/// record is impossible under the model or params violate constraints.
LoglikEval loglik_detail(const ModelSpec& spec, const ParamVector& params,
                         std::span<const LifetimeRecord> records);
/// Parallel over records for large inputs; summation order is fixed.
double loglik(const ModelSpec& spec, const ParamVector& params,
              std::span<const LifetimeRecord> records);
double loglik(const Model& model, std::span<const LifetimeRecord> records);
double loglik_serial(const Model& model, std::span<const LifetimeRecord> records);

struct FitOptions {
  int starts = 5;  // deterministic multistart count
  bool information = true;
  bool boundary_fits = true;  // also fit with nonnegative parameters fixed at 0
  std::vector<ParamVector> extra_starts;
  OptimizeOptions optimizer;
};

struct FitResult {
  ModelSpec spec;
  ParamVector mle;
  double loglik = -kInf;
  /// Observed information for the parameters not fixed at a boundary, on
  /// the original scale (rows/cols follow `free_params`).
  std::vector<std::vector<double>> observed_information;
  std::vector<std::size_t> free_params;
  /// Delta-method covariance over all parameters (zero rows for fixed ones).
  std::vector<std::vector<double>> covariance;
  std::vector<double> std_errors;
  bool converged = false;
  bool at_boundary = false;
  std::vector<std::string> boundary_params;
  std::size_t n_used = 0;
  std::size_t n_dropped = 0;
  std::size_t n_ties = 0;
  double threshold = 0.0;
  double gradient_norm = 0.0;
  int evaluations = 0;
  std::string message;
};

/// Maximum likelihood fit above `threshold`. Needs at least 3 usable records
/// (DataError otherwise). Non-convergence is reported through `converged`.
FitResult fit_mle(const ModelSpec& spec, std::span<const LifetimeRecord> records,
                  double threshold = 0.0, const FitOptions& opts = {});

std::vector<FitResult> threshold_scan(const ModelSpec& spec, std::span<const LifetimeRecord> records,
                                      std::span<const double> thresholds,
                                      const FitOptions& opts = {});

// ---------------------------------------------------------------------------

struct ProfileLimit {
  double level = 0.95;
  double lower = kNaN;
  double upper = kInf;
  bool lower_at_grid_edge = false;  // profile never dropped below the cut
  bool upper_unbounded = true;
};

/// Profile log-likelihood for the GP endpoint psi (on the age scale
/// origin + excess).
struct ProfileTrace {
  std::string parameter = "psi";
  double origin = 0.0;
  double threshold = 0.0;
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> sigma;  // maximising scale at each grid point
  double psi_hat = kInf;      // +inf when the unconstrained shape is >= 0
  double loglik_max = -kInf;  // unconstrained GP maximum
  double xi_hat = 0.0;
  std::vector<ProfileLimit> limits;
};

/// Records are excess times above `origin`; the fit is above the excess
/// threshold `threshold`. An empty grid selects 200 log-spaced points.
ProfileTrace profile_endpoint(std::span<const LifetimeRecord> records, double threshold,
                              double origin, std::vector<double> grid = {},
                              std::vector<double> levels = {0.95});

// ---------------------------------------------------------------------------

enum class Calibration { chi2, half_chi2, bootstrap };

std::string_view to_string(Calibration c);
Calibration calibration_from_string(std::string_view s);

struct TestResult {
  std::string null_model;
  std::string alt_model;
  std::string method = "lrt";
  double statistic = 0.0;
  double df = 1.0;
  Calibration calibration = Calibration::chi2;
  double p_asymptotic = 1.0;
  std::optional<double> p_bootstrap;
  std::size_t B = 0;
  std::uint64_t seed = 0;
  std::size_t failures = 0;
  bool degenerate = false;
  double loglik0 = kNaN;
  double loglik1 = kNaN;
  std::vector<double> replicate_statistics;
};

/// Asymptotic calibration of a nested pair and the embedding of null
/// parameters into the alternative. Throws std::invalid_argument when the
/// pair is not nested.
struct NestedPair {
  Calibration calibration = Calibration::chi2;
  double df = 1.0;
  ParamVector embed(const ParamVector& null_params) const;
  ModelSpec null_spec, alt_spec;
};
NestedPair nested_pair(const ModelSpec& spec0, const ModelSpec& spec1);

/// p-value for a statistic under a chi2 or half-chi2 reference.
double lrt_pvalue(double w, Calibration calibration, double df);

TestResult lrt_nested(const ModelSpec& spec0, const ModelSpec& spec1,
                      std::span<const LifetimeRecord> records, double threshold = 0.0);

/// Parametric bootstrap from the fitted null, reusing each record's
/// truncation and censoring configuration. Replicate b uses Rng(seed, b).
/// Throws NumericError when more than 2% of replicate fits fail.
TestResult bootstrap_lrt(const ModelSpec& spec0, const ModelSpec& spec1,
                         std::span<const LifetimeRecord> records, std::size_t B,
                         std::uint64_t seed, double threshold = 0.0);

/// One draw per record from `model` with that record's truncation set,
/// then the record's censoring applied (administrative limit or bin width).
std::vector<LifetimeRecord> simulate_like(const Model& model,
                                          std::span<const LifetimeRecord> records, Rng& rng);

// ---------------------------------------------------------------------------

struct ShapeTestResult {
  FitResult fit;                  // piecewise GP with K pieces
  std::vector<FitResult> nulls;   // null fits for k = 1..K-1
  std::vector<TestResult> tests;  // xi_k = ... = xi_K against the full model
};

/// Piecewise GP above thresholds[0] with breakpoints at each threshold.
/// Throws DataError when an inter-threshold interval holds no deaths.
ShapeTestResult nc_fit_and_shape_test(std::span<const LifetimeRecord> records,
                                      std::span<const double> thresholds,
                                      const FitOptions& opts = {});

enum class GroupMethod { lrt, wald };

/// Tests equality of the model across groups: labels[i] is the group of
/// records[i]. LRT uses chi2 with (m - 1) k df; Wald compares each group's
/// MLE with the first group's through their covariances.
TestResult group_comparison(std::span<const LifetimeRecord> records,
                            std::span<const std::string> labels, const ModelSpec& spec,
                            double threshold = 0.0, GroupMethod method = GroupMethod::lrt);

}  // namespace longtail
