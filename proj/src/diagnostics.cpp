#include "longtail/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "longtail/parallel.hpp"
#include "longtail/stats.hpp"

namespace longtail {

std::string_view to_string(QQStrategy s) {
  return s == QQStrategy::transformed ? "transformed" : "adjusted";
}

QQStrategy qq_strategy_from_string(std::string_view s) {
  if (s == "transformed" || s == "A") return QQStrategy::transformed;
  if (s == "adjusted" || s == "B") return QQStrategy::adjusted;
  throw std::invalid_argument("unknown Q-Q strategy '" + std::string(s) + "'");
}

namespace {

// Model probability of [lo, hi] and the inverse of the conditional
// distribution on a truncation set, both on the survivor scale.
double model_mass(const Model& m, double lo, double hi) { return m.survivor(lo) - m.survivor(hi); }

double conditional_inverse(const Model& m, const IntervalSet& set, double q) {
  double total = 0.0;
  for (const auto& iv : set.parts()) total += model_mass(m, iv.lo, iv.hi);
  double target = q * total;
  for (const auto& iv : set.parts()) {
    const double mass = model_mass(m, iv.lo, iv.hi);
    if (target <= mass || &iv == &set.parts().back()) {
      const double s = m.survivor(iv.lo) - std::min(target, mass);
      const double t = s > 0.0 ? m.inv_cum_hazard(-std::log(s)) : m.support_upper();
      return std::clamp(t, iv.lo, iv.hi);
    }
    target -= mass;
  }
  return kNaN;
}

double conditional_cdf(const Model& m, const IntervalSet& set, double y) {
  double total = 0.0, below = 0.0;
  for (const auto& iv : set.parts()) {
    total += model_mass(m, iv.lo, iv.hi);
    if (y > iv.lo) below += model_mass(m, iv.lo, std::min(y, iv.hi));
  }
  return below / total;
}

bool is_untruncated(const Model& m, const IntervalSet& set) {
  return set.size() == 1 && set.lower() <= std::max(0.0, m.support_lower()) && std::isinf(set.upper());
}

}  // namespace

QQData qq_positions_truncated(std::span<const LifetimeRecord> records, const Model& F0,
                              const NPEstimate& Fn, QQStrategy strategy) {
  QQData qq;
  qq.strategy = strategy;
  std::size_t n = 0;
  for (const auto& r : records) n += r.censoring == Censoring::observed;
  const double scale = static_cast<double>(n) / static_cast<double>(n + 1);
  auto fn_tilde = [&](double y) {
    if (std::isinf(y)) return 1.0;
    return (1.0 - Fn.survivor_at(y)) * scale;
  };
  auto quantile0 = [&](double p) {
    if (p <= 0.0) return std::max(0.0, F0.support_lower());
    if (p >= 1.0) return F0.support_upper();
    return F0.quantile(p);
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.censoring != Censoring::observed) continue;
    double total0 = 0.0;
    for (const auto& iv : r.truncation.parts()) total0 += model_mass(F0, iv.lo, iv.hi);
    if (total0 < 1e-14) {
      qq.skipped.push_back(i);
      continue;
    }
    QQPoint p;
    p.id = r.id;
    p.record = i;
    const bool plain = is_untruncated(F0, r.truncation);
    if (strategy == QQStrategy::transformed) {
      p.y = plain ? r.time : quantile0(conditional_cdf(F0, r.truncation, r.time));
    } else {
      p.y = r.time;
      if (plain) {
        p.x = quantile0(fn_tilde(r.time));
      } else {
        double totn = 0.0, belown = 0.0;
        for (const auto& iv : r.truncation.parts()) {
          totn += fn_tilde(iv.hi) - fn_tilde(iv.lo);
          if (r.time > iv.lo) belown += fn_tilde(std::min(r.time, iv.hi)) - fn_tilde(iv.lo);
        }
        if (!(totn > 0.0)) {
          qq.skipped.push_back(i);
          continue;
        }
        p.x = conditional_inverse(F0, r.truncation, std::clamp(belown / totn, 0.0, 1.0));
      }
    }
    qq.points.push_back(p);
  }
  if (strategy == QQStrategy::transformed) {
    std::vector<std::size_t> order(qq.points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return qq.points[a].y < qq.points[b].y; });
    const double m = static_cast<double>(qq.points.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      qq.points[order[k]].x = quantile0(static_cast<double>(k + 1) / (m + 1.0));
    }
  }
  return qq;
}

NPEstimate np_estimate_auto(std::span<const LifetimeRecord> records) {
  const bool ltrc = std::all_of(records.begin(), records.end(), [](const LifetimeRecord& r) {
    return r.censoring != Censoring::interval_censored && r.truncation.size() == 1 &&
           std::isinf(r.truncation.upper());
  });
  if (ltrc) return kaplan_meier(records);
  return turnbull_em(records, {});
}

namespace {

struct Bins {
  std::vector<double> centers;  // sorted positions
  [[nodiscard]] std::size_t find(double x) const {
    const auto it = std::lower_bound(centers.begin(), centers.end(), x);
    if (it == centers.begin()) return 0;
    if (it == centers.end()) return centers.size() - 1;
    const auto k = static_cast<std::size_t>(it - centers.begin());
    return (x - centers[k - 1] <= centers[k] - x) ? k - 1 : k;
  }
};

}  // namespace

QQData qq_bootstrap_band(const FitResult& fit, std::span<const LifetimeRecord> records,
                         const QQBandOptions& opts) {
  const ThresholdedData data = above_threshold(records, fit.threshold);
  const Model F0(fit.spec, fit.mle);
  QQData qq = qq_positions_truncated(data.records, F0, np_estimate_auto(data.records), opts.strategy);
  qq.notes.push_back("pointwise empirical quantiles of pooled bootstrap points on the grid of original positions");
  qq.notes.push_back("dependence between ordered points of one bootstrap sample is ignored");
  if (qq.points.empty() || opts.B == 0) return qq;

  Bins bins;
  for (const auto& p : qq.points) bins.centers.push_back(p.x);
  std::sort(bins.centers.begin(), bins.centers.end());

  FitOptions fopts = opts.fit;
  fopts.information = false;
  if (fopts.extra_starts.empty()) fopts.extra_starts.push_back(fit.mle);
  using Pairs = std::vector<std::pair<double, double>>;
  struct Rep {
    Pairs pts;
    bool ok = false;
  };
  const auto reps = parallel_map<Rep>(opts.B, [&](std::size_t b) {
    Rep rep;
    Rng rng(opts.seed, b);
    const auto sim = simulate_like(F0, data.records, rng);
    FitResult fb;
    try {
      fb = fit_mle(fit.spec, sim, 0.0, fopts);
    } catch (const DataError&) {
      return rep;
    }
    if (!fb.converged) return rep;
    const Model Fb(fit.spec, fb.mle);
    const QQData q = qq_positions_truncated(sim, Fb, np_estimate_auto(sim), opts.strategy);
    for (const auto& p : q.points) rep.pts.emplace_back(p.x, p.y);
    rep.ok = true;
    return rep;
  });
  std::size_t failures = 0;
  std::vector<std::vector<double>> ys(bins.centers.size());
  for (const auto& rep : reps) {
    if (!rep.ok) {
      ++failures;
      continue;
    }
    for (const auto& [x, y] : rep.pts) {
      if (std::isfinite(x) && std::isfinite(y)) ys[bins.find(x)].push_back(y);
    }
  }
  if (static_cast<double>(failures) > 0.02 * static_cast<double>(opts.B)) {
    throw NumericError(std::to_string(failures) + " of " + std::to_string(opts.B) +
                       " bootstrap refits failed");
  }
  const double plo = 0.5 * (1.0 - opts.level), phi = 1.0 - plo;
  std::vector<double> lo(bins.centers.size(), kNaN), hi(bins.centers.size(), kNaN);
  for (std::size_t k = 0; k < ys.size(); ++k) {
    if (ys[k].empty()) continue;
    std::sort(ys[k].begin(), ys[k].end());
    lo[k] = sample_quantile_sorted(ys[k], plo);
    hi[k] = sample_quantile_sorted(ys[k], phi);
  }
  // Empty bins borrow from the nearest filled one.
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (!std::isnan(lo[k])) continue;
    for (std::size_t dist = 1; dist < lo.size(); ++dist) {
      if (k >= dist && !std::isnan(lo[k - dist]) && !ys[k - dist].empty()) {
        lo[k] = lo[k - dist];
        hi[k] = hi[k - dist];
        break;
      }
      if (k + dist < lo.size() && !ys[k + dist].empty()) {
        lo[k] = lo[k + dist];
        hi[k] = hi[k + dist];
        break;
      }
    }
  }
  for (auto& p : qq.points) {
    const std::size_t k = bins.find(p.x);
    p.lo = lo[k];
    p.hi = hi[k];
  }
  if (failures > 0) qq.notes.push_back(std::to_string(failures) + " replicate refits failed and were skipped");
  return qq;
}

std::pair<double, double> band_at(const QQData& qq, double x) {
  if (qq.points.empty()) return {kNaN, kNaN};
  std::vector<std::size_t> order(qq.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return qq.points[a].x < qq.points[b].x; });
  Bins bins;
  for (auto k : order) bins.centers.push_back(qq.points[k].x);
  const auto& p = qq.points[order[bins.find(x)]];
  return {p.lo, p.hi};
}

}  // namespace longtail
