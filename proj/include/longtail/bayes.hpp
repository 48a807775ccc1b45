#pragma once

// Posterior sampling for exponential, Gompertz and generalized Pareto models
// under maximal data information priors, by the ratio-of-uniforms method.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "longtail/lexis.hpp"
#include "longtail/models.hpp"

namespace longtail {

/// Exponential integral E1(x), x > 0.
double expint_e1(double x);
/// e^x E1(x), stable for large x.
double scaled_expint_e1(double x);

struct PriorSpec {
  Family family = Family::exponential;
  double xi_lower = -1.0;  // generalized Pareto shape restriction
};

/// Log MDI prior up to an additive constant; -inf outside the restricted set.
///   exponential  -log sigma
///   gen_pareto   -log sigma - xi - 1        (xi >= xi_lower)
///   gompertz     -log sigma + e^{1/beta} E1(1/beta)
double mdi_log_prior(const PriorSpec& prior, const ParamVector& params);
double mdi_log_prior(Family family, const ParamVector& params);

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct PosteriorSample {
  std::size_t dim = 0;
  std::vector<std::vector<double>> draws;  // n x dim
  std::vector<double> log_posterior;       // per draw, up to a constant
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t proposals = 0;
  std::vector<std::string> names;
};

struct RouOptions {
  std::size_t streams = 16;  // fixed stream count; output does not depend on threads
  Eigen::VectorXd start;     // near the mode, if known
};

/// Ratio-of-uniforms sampler (r = 1) for an unnormalised log density on R^dim.
/// The target is relocated to its mode and rotated by the Cholesky factor of
/// the Laplace covariance before the bounding box is computed. Throws
/// NumericError when the box is unbounded.
PosteriorSample rou_sample(const LogDensity& log_density, std::size_t dim, std::size_t n,
                           std::uint64_t seed, const RouOptions& opts = {});

/// Posterior draws of (sigma[, beta | xi]) given records above `threshold`.
/// Sampling runs on log sigma (and log beta) with the Jacobian included;
/// the likelihood honours truncation and censoring.
PosteriorSample posterior_sample(const ModelSpec& spec, std::span<const LifetimeRecord> records,
                                 double threshold, std::size_t n, std::uint64_t seed);

struct HazardBand {
  std::vector<double> t;
  std::vector<double> median, lo, hi;
  std::vector<bool> beyond_support;  // some draw has no support at t
  double level = 0.5;
};

/// Pointwise median and central `level` interval of the hazard over draws.
/// Draws whose support ends before t contribute +inf and flag that point.
HazardBand posterior_hazard_band(const PosteriorSample& sample, const ModelSpec& spec,
                                 std::span<const double> t_grid, double level);

}  // namespace longtail
