#pragma once

// Parametric lifetime families on the excess-time axis. Every family is
// expressed through its hazard h and cumulative hazard H; survivor, density,
// quantiles and sampling derive from those two.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "longtail/core.hpp"
#include "longtail/rng.hpp"

namespace longtail {

enum class Family {
  exponential,
  gompertz,
  gompertz_makeham,
  logistic_beard,
  gen_pareto,
  ext_gp,
  weibull_gp,
  piecewise_gp,
  gev,
};

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

/// Family plus its fixed structural settings. `threshold` is the age (years)
/// at which excess time starts; `pieces` holds the piecewise-GP breakpoints
/// in excess time, starting at 0.
struct ModelSpec {
  Family family = Family::exponential;
  double threshold = 0.0;
  std::vector<double> pieces;

  static ModelSpec of(Family f) { return ModelSpec{f, 0.0, {}}; }
  static ModelSpec piecewise(std::vector<double> breakpoints) {
    return ModelSpec{Family::piecewise_gp, 0.0, std::move(breakpoints)};
  }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Parameter values in the family's canonical order (see param_names):
///   exponential       sigma
///   gompertz          sigma, beta
///   gompertz_makeham  sigma, beta, lambda
///   logistic_beard    lambda, A, B, gamma      (gamma = beta/sigma)
///   gen_pareto        sigma, xi
///   ext_gp            sigma, beta, xi
///   weibull_gp        sigma, beta, xi
///   piecewise_gp      sigma1, xi1, ..., xiK
///   gev               eta, tau, xi
struct ParamVector {
  std::vector<double> values;

  ParamVector() = default;
  ParamVector(std::initializer_list<double> v) : values(v) {}
  explicit ParamVector(std::vector<double> v) : values(std::move(v)) {}

  [[nodiscard]] std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

std::vector<std::string> param_names(const ModelSpec& spec);
std::size_t param_count(const ModelSpec& spec);

/// Empty if `params` satisfies the family constraints, otherwise the reason.
std::optional<std::string> constraint_violation(const ModelSpec& spec, const ParamVector& params);

/// A validated (spec, params) pair with all distribution functions.
class Model {
 public:
  /// Throws std::invalid_argument when the parameters violate constraints.
  Model(ModelSpec spec, ParamVector params);

  [[nodiscard]] const ModelSpec& spec() const { return spec_; }
  [[nodiscard]] const ParamVector& params() const { return params_; }

  /// Support (lower, upper); upper is +inf for unbounded families.
  [[nodiscard]] double support_lower() const;
  [[nodiscard]] double support_upper() const;
  [[nodiscard]] bool in_support(double t) const;

  // Non-throwing kernels: outside the support the cumulative hazard is 0
  // below and +inf above, and log_hazard is -inf.
  [[nodiscard]] double cum_hazard(double t) const;
  [[nodiscard]] double log_hazard(double t) const;
  [[nodiscard]] double log_survivor(double t) const { return -cum_hazard(t); }
  [[nodiscard]] double survivor(double t) const;
  [[nodiscard]] double cdf(double t) const { return 1.0 - survivor(t); }
  [[nodiscard]] double log_density(double t) const;
  /// log Pr(lo < T <= hi), evaluated without cancellation in the tail.
  [[nodiscard]] double log_prob(double lo, double hi) const;
  /// log Pr(T in set).
  [[nodiscard]] double log_prob(const IntervalSet& set) const;

  // Throwing evaluations (std::domain_error outside the support).
  [[nodiscard]] double hazard(double t) const;
  [[nodiscard]] double density(double t) const;

  /// t such that H(t) = h, for h in [0, inf].
  [[nodiscard]] double inv_cum_hazard(double h) const;
  /// Throws std::domain_error unless p in (0, 1).
  [[nodiscard]] double quantile(double p) const;

  /// Derivative of the reciprocal hazard at u (the penultimate GP shape).
  [[nodiscard]] double penultimate_shape(double u) const;

  /// One draw, restricted to `truncation` when given, by inversion.
  double draw(Rng& rng) const;
  double draw(Rng& rng, const IntervalSet& truncation) const;

 private:
  double gp_piece_cum_hazard(std::size_t k, double s) const;
  double piece_sigma(std::size_t k) const;
  std::size_t piece_index(double t) const;
  double invert_numerically(double h) const;

  ModelSpec spec_;
  ParamVector params_;
  std::vector<double> piece_sigma_;  // piecewise_gp scales sigma_k
  std::vector<double> piece_cumh_;   // H at each breakpoint
};

// Free-function forms of the catalogue operations.
double hazard(const ModelSpec& spec, const ParamVector& params, double t);
double survivor(const ModelSpec& spec, const ParamVector& params, double t);
double density(const ModelSpec& spec, const ParamVector& params, double t);
double quantile(const ModelSpec& spec, const ParamVector& params, double p);
double penultimate_shape(const ModelSpec& spec, const ParamVector& params, double u);

/// n draws; reproducible from `seed`. With a truncation set, draws come from
/// the model conditioned on that set (throws std::domain_error when its
/// probability is below 1e-12).
std::vector<double> sample(const ModelSpec& spec, const ParamVector& params, std::size_t n,
                           std::uint64_t seed, const IntervalSet* truncation = nullptr);
std::vector<double> sample(const Model& model, std::size_t n, Rng& rng,
                           const IntervalSet* truncation = nullptr);

/// GP endpoint u - sigma/xi; +inf when xi >= 0.
double gp_endpoint(double u, double sigma, double xi);

/// Scale of GP exceedances above an extra v: sigma + xi v. Throws
/// std::domain_error when that is not positive.
double gp_threshold_rescale(double sigma, double xi, double v);

struct GevParams {
  double eta = 0.0;
  double tau = 1.0;
  double xi = 0.0;
};

/// GEV for the maximum of N blocks, each GEV(eta, tau, xi).
GevParams gev_rescale(double eta, double tau, double xi, double n_blocks);

}  // namespace longtail
