#pragma once

// Simulation experiments on the Lexis plane: cohort generation under
// interval truncation, left truncation with right censoring and extinct
// cohort selection, plus the tabulation study and the truncation tilt.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longtail/lexis.hpp"
#include "longtail/models.hpp"
#include "longtail/rng.hpp"

namespace longtail {

/// Piecewise-linear intensity nu(x) >= 0 between the first and last knot,
/// zero elsewhere.
class RateFunction {
 public:
  RateFunction() = default;
  /// Throws std::invalid_argument unless knots are increasing, values are
  /// nonnegative and the sizes match (at least two knots).
  RateFunction(std::vector<double> knots, std::vector<double> values);

  static RateFunction constant(double lo, double hi, double rate) { return {{lo, hi}, {rate, rate}}; }

  [[nodiscard]] double operator()(double x) const;
  /// Exact integral over [a, b] (a <= b); zero outside the knots.
  [[nodiscard]] double integral(double a, double b) const;
  [[nodiscard]] double lower() const { return knots_.front(); }
  [[nodiscard]] double upper() const { return knots_.back(); }
  [[nodiscard]] double max_value() const;
  [[nodiscard]] bool empty() const { return knots_.empty(); }
  [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }

  /// Poisson process on the knot window, by thinning; sorted.
  std::vector<double> sample_process(Rng& rng) const;

 private:
  std::vector<double> knots_, values_;
};

struct CohortSimConfig {
  double years = 20.0;         // entries on [0, years)
  double mean_annual = 150.0;  // Poisson mean per calendar year
  ModelSpec law = ModelSpec::of(Family::exponential);
  ParamVector params{1.4426950408889634};
  std::optional<RateFunction> entry_rate;  // replaces uniform yearly entries
  double c1 = 0.0;                         // sampling window, same time axis
  double c2 = 20.0;
  std::uint64_t seed = 1;
  std::size_t replicates = 1000;

  /// Throws std::invalid_argument on nonpositive counts or an invalid law.
  void validate() const;
};

struct SimIndividual {
  double entry = 0.0;  // date at which the origin age is reached
  double lifetime = 0.0;
  long cohort = 0;     // floor(entry)
};

struct CohortSample {
  std::vector<SimIndividual> truth;
  /// Deaths in [c1, c2], truncated to [max(0, c1 - x), c2 - x].
  std::vector<LifetimeRecord> interval_truncated;
  /// Alive at c1 and entered before c2, truncated at max(0, c1 - x), right
  /// censored at c2 - x.
  std::vector<LifetimeRecord> ltrc;
  /// Deaths in cohorts up to b*, the cohort before the first one with a
  /// survivor at c2. Truncation is [0, c2 - x]; analyses that ignore it
  /// replace the set by the half-line.
  std::vector<LifetimeRecord> extinct;
  std::optional<long> b_star;  // empty when the first cohort has a survivor
};

/// Replicate `replicate` of the configuration, from Rng(seed, replicate).
CohortSample simulate_cohorts(const CohortSimConfig& config, std::size_t replicate = 0);

struct EstimatorSummary {
  std::string name;
  std::vector<double> estimates;  // one per retained replicate
  double mean = kNaN;
  double bias = kNaN;
  double variance = kNaN;
  double se_mean = kNaN;  // standard error of the mean
  double z_bias = kNaN;   // bias / se_mean
  double min = kNaN, q25 = kNaN, median = kNaN, q75 = kNaN, max = kNaN;
};

EstimatorSummary summarize_estimates(std::string name, std::vector<double> estimates, double truth);

struct ExtinctCohortResult {
  double truth = 0.0;  // exponential scale
  std::vector<EstimatorSummary> estimators;  // naive, extinct_truncated, full_truncated
  std::size_t replicates = 0;
  std::size_t dropped = 0;  // replicates without an extinct cohort
  std::vector<std::size_t> replicate_index;  // replicate behind each estimate
};

/// Per replicate: (i) mean lifetime of extinct-cohort deaths, (ii) the
/// exponential MLE of those deaths truncated to [0, c2 - x], (iii) the
/// exponential MLE of all deaths before c2 under the same truncation.
/// Requires an exponential law.
ExtinctCohortResult extinct_cohort_experiment(const CohortSimConfig& config);

struct TabulationConfig {
  std::size_t n = 513;
  double sigma = 1.546;
  double xi = -0.108;
  double origin = 110.0;      // age of excess time zero
  double entry_span = 20.0;   // x uniform on [0, entry_span]
  double c2 = 26.0;           // right truncation at c2 - x
  double bin_width = 1.0;     // 0 disables tabulation
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
};

struct TabulationResult {
  double psi_true = kNaN;
  std::vector<double> exact, binned;  // endpoint estimates (inf when xi_hat >= 0)
  std::vector<double> xi_exact, xi_binned;
  double median_exact = kNaN, median_binned = kNaN;
  // Central 75% and 95% limits.
  double exact_75_lo = kNaN, exact_75_hi = kNaN, exact_95_lo = kNaN, exact_95_hi = kNaN;
  double binned_75_lo = kNaN, binned_75_hi = kNaN, binned_95_lo = kNaN, binned_95_hi = kNaN;
  double frac_exact_above_150 = kNaN, frac_binned_above_150 = kNaN;
  double ks_distance = kNaN;
  std::size_t failures = 0;
};

/// Right-truncated GP samples analysed exactly and after tabulation into
/// bins of `bin_width`. Throws NumericError when more than 2% of fits fail.
TabulationResult tabulation_experiment(const TabulationConfig& config);

/// Density of excess lifetimes of deaths in [c1, c2] when entries arrive at
/// rate nu: f(t) w(t) with w(t) = int_{c1-t}^{c2-t} nu, normalised over the
/// span of t_grid. Throws std::invalid_argument when w vanishes there.
std::vector<double> tilted_density(const Model& law, const RateFunction& nu, double c1, double c2,
                                   std::span<const double> t_grid);

/// Built-in experiment settings by name ("appendix_b", "japan_tabulation").
CohortSimConfig appendix_b_config();
TabulationConfig japan_tabulation_config();

}  // namespace longtail
