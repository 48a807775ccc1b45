#pragma once

// Quantile-quantile plotting positions that account for truncation, and
// parametric-bootstrap pointwise bands.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "longtail/likelihood.hpp"
#include "longtail/models.hpp"
#include "longtail/nonparam.hpp"

namespace longtail {

/// A: transformed observations against ordinary positions.
/// B: raw observations against positions adjusted per record (default).
enum class QQStrategy { transformed, adjusted };

std::string_view to_string(QQStrategy s);
QQStrategy qq_strategy_from_string(std::string_view s);

struct QQPoint {
  std::string id;
  std::size_t record = 0;  // index into the input records
  double x = 0.0;          // plotting position
  double y = 0.0;          // observation (raw or transformed)
  double lo = kNaN;        // band, when computed
  double hi = kNaN;
};

struct QQData {
  QQStrategy strategy = QQStrategy::adjusted;
  std::vector<QQPoint> points;
  std::vector<std::size_t> skipped;  // records with negligible truncation mass
  std::vector<std::string> notes;
};

/// Positions for observed records. F0 is the reference model; Fn is a
/// nonparametric estimate from the same records. Censored records inform Fn
/// but are not displayed. Fn is scaled by n/(n+1) below +inf.
QQData qq_positions_truncated(std::span<const LifetimeRecord> records, const Model& F0,
                              const NPEstimate& Fn, QQStrategy strategy = QQStrategy::adjusted);

/// Product-limit estimate when every truncation set is [a, inf), Turnbull EM
/// otherwise.
NPEstimate np_estimate_auto(std::span<const LifetimeRecord> records);

struct QQBandOptions {
  std::size_t B = 199;
  double level = 0.9;
  std::uint64_t seed = 1;
  QQStrategy strategy = QQStrategy::adjusted;
  FitOptions fit;  // refits of F0 inside replicates
};

/// Fits `spec` to the records (excess units, no threshold), computes the
/// positions, and attaches a pointwise band from B datasets simulated from
/// the fit with the records' truncation and censoring. Replicate points are
/// pooled and binned on the grid of original positions; each bin gives the
/// empirical (1-level)/2 and (1+level)/2 quantiles. Throws NumericError if
/// more than 2% of replicate fits fail.
QQData qq_bootstrap_band(const FitResult& fit, std::span<const LifetimeRecord> records,
                         const QQBandOptions& opts);

/// Band value at an arbitrary position, taken from the bin containing x.
std::pair<double, double> band_at(const QQData& qq, double x);

}  // namespace longtail
