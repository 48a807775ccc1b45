#pragma once

// Nonparametric lifetime estimates: product-limit under left truncation and
// right censoring, and the Turnbull EM estimator for general interval
// censoring and truncation.

#include <span>
#include <string>
#include <vector>

#include "longtail/lexis.hpp"

namespace longtail {

struct NPEstimate {
  std::string method;
  std::vector<double> support;
  std::vector<double> mass;
  std::vector<double> survivor;    // S just after each support point
  std::vector<double> cum_hazard;  // running sum of the discrete hazards
  std::vector<double> variance;    // Greenwood (product-limit) or mass variance (EM)
  std::vector<double> at_risk;     // product-limit only
  std::vector<double> events;      // product-limit only
  std::vector<bool> interior;      // EM: atom with positive mass and a variance
  double loglik = 0.0;
  long iterations = 0;
  bool converged = true;
  bool mass_deficit = false;
  double deficit = 0.0;            // 1 - sum of masses
  std::vector<double> loglik_trace;

  /// Right-continuous survivor step function.
  [[nodiscard]] double survivor_at(double t) const;
};

/// Product-limit estimate. Records must be observed or right-censored with a
/// truncation set [a, inf); throws std::invalid_argument otherwise.
NPEstimate kaplan_meier(std::span<const LifetimeRecord> records);

/// Support atoms for the EM: distinct observed times, left ends of censoring
/// intervals, and a point just past each right-censoring time.
std::vector<double> turnbull_support(std::span<const LifetimeRecord> records);

/// Records expressed as contiguous ranges [begin, end) of support indices.
struct IndexedData {
  std::size_t J = 0;
  std::vector<std::size_t> c_offset, t_offset;  // size n + 1
  std::vector<std::pair<std::size_t, std::size_t>> c_ranges, t_ranges;
  [[nodiscard]] std::size_t size() const { return c_offset.empty() ? 0 : c_offset.size() - 1; }
};

/// Maps censoring and truncation sets onto the support. Observed times must
/// be support points; censoring sets must lie inside truncation sets.
/// Throws DataError naming the first inconsistent record.
IndexedData index_records(std::span<const LifetimeRecord> records, std::span<const double> support);

/// sum_i log Pr(C_i) - log Pr(T_i) under masses f.
double em_loglik(const IndexedData& data, std::span<const double> f);
/// One EM update f -> out. The serial form evaluates the expected counts
/// atom by atom; the parallel form uses prefix sums per record and a
/// difference-array scatter, and is independent of the thread count.
void em_step_serial(const IndexedData& data, std::span<const double> f, std::span<double> out);
void em_step_parallel(const IndexedData& data, std::span<const double> f, std::span<double> out);

struct TurnbullOptions {
  double tol = 1e-9;
  long max_iter = 100000;
  bool keep_trace = false;
  bool serial = false;  // use the serial reference step
  /// Squared extrapolation between EM steps, falling back to the plain
  /// steps whenever it would leave the simplex or lower the likelihood.
  bool accelerate = true;
};

/// Turnbull EM from uniform masses. Throws InternalError if the
/// log-likelihood ever decreases. `iterations` counts EM steps.
NPEstimate turnbull_em(std::span<const LifetimeRecord> records, std::vector<double> support,
                       const TurnbullOptions& opts = {});

}  // namespace longtail
