#include "longtail/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "longtail/parallel.hpp"
#include "longtail/stats.hpp"

namespace longtail {

// ---------------------------------------------------------------------------
// Threshold re-expression and record contributions

ThresholdedData above_threshold(std::span<const LifetimeRecord> records, double v) {
  ThresholdedData out;
  out.records.reserve(records.size());
  for (const auto& r : records) {
    LifetimeRecord s = r;
    switch (r.censoring) {
      case Censoring::observed:
        if (r.time == v) {
          ++out.n_ties;
          continue;
        }
        if (r.time < v) {
          ++out.n_below;
          continue;
        }
        break;
      case Censoring::right_censored:
        if (r.time <= v) {
          ++out.n_below;
          continue;
        }
        break;
      case Censoring::interval_censored:
        if (r.time_upper <= v) {
          ++out.n_below;
          continue;
        }
        if (r.time < v) {
          ++out.n_straddle;
          continue;
        }
        s.time_upper = r.time_upper - v;
        break;
    }
    s.time = r.time - v;
    s.censor_limit = r.censor_limit - v;
    s.truncation = r.truncation.above(v);
    if (s.truncation.empty()) {
      ++out.n_below;
      continue;
    }
    out.records.push_back(std::move(s));
  }
  return out;
}

namespace {

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// log Pr(T in [lo, hi] intersected with the set).
double log_prob_within(const Model& m, const IntervalSet& set, double lo, double hi) {
  double acc = -kInf;
  for (const auto& iv : set.parts()) {
    const double a = std::max(iv.lo, lo);
    const double b = std::min(iv.hi, hi);
    if (a < b) acc = log_add(acc, m.log_prob(a, b));
  }
  return acc;
}

double log_prob_set(const Model& m, const IntervalSet& set) {
  if (set.size() == 1) return m.log_prob(set.parts()[0].lo, set.parts()[0].hi);
  return m.log_prob(set);
}

}  // namespace

double record_loglik(const Model& model, const LifetimeRecord& r) {
  const double log_pt = log_prob_set(model, r.truncation);
  if (!std::isfinite(log_pt)) return -kInf;
  double num = -kInf;
  switch (r.censoring) {
    case Censoring::observed:
      if (!r.truncation.contains(r.time)) return -kInf;
      num = model.log_density(r.time);
      break;
    case Censoring::right_censored:
      num = log_prob_within(model, r.truncation, r.time, kInf);
      break;
    case Censoring::interval_censored:
      num = log_prob_within(model, r.truncation, r.time, r.time_upper);
      break;
  }
  return num - log_pt;
}

double loglik_serial(const Model& model, std::span<const LifetimeRecord> records) {
  double acc = 0.0;
  for (const auto& r : records) acc += record_loglik(model, r);
  return std::isnan(acc) ? -kInf : acc;
}

double loglik(const Model& model, std::span<const LifetimeRecord> records) {
  const std::size_t n = records.size();
  if (n < 4096 || thread_count() <= 1) return loglik_serial(model, records);
  std::vector<double> contrib(n);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (long i = 0; i < count; ++i) contrib[i] = record_loglik(model, records[i]);
  double acc = 0.0;
  for (double c : contrib) acc += c;
  return std::isnan(acc) ? -kInf : acc;
}

double loglik(const ModelSpec& spec, const ParamVector& params,
              std::span<const LifetimeRecord> records) {
  if (constraint_violation(spec, params)) return -kInf;
  return loglik(Model(spec, params), records);
}

LoglikEval loglik_detail(const ModelSpec& spec, const ParamVector& params,
                         std::span<const LifetimeRecord> records) {
  LoglikEval out;
  if (constraint_violation(spec, params)) {
    out.value = -kInf;
    return out;
  }
  const Model m(spec, params);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double c = record_loglik(m, records[i]);
    if (!std::isfinite(c)) out.offending.push_back(i);
    out.value += c;
  }
  if (!out.offending.empty() || std::isnan(out.value)) out.value = -kInf;
  return out;
}

// ---------------------------------------------------------------------------
// Fitting

namespace {

enum class PKind { real, positive, nonneg, shape_floor };

std::vector<PKind> param_kinds(const ModelSpec& spec) {
  using K = PKind;
  switch (spec.family) {
    case Family::exponential: return {K::positive};
    case Family::gompertz: return {K::positive, K::nonneg};
    case Family::gompertz_makeham: return {K::positive, K::nonneg, K::nonneg};
    case Family::logistic_beard: return {K::nonneg, K::positive, K::nonneg, K::positive};
    case Family::gen_pareto: return {K::positive, K::shape_floor};
    case Family::ext_gp: return {K::positive, K::nonneg, K::shape_floor};
    case Family::weibull_gp: return {K::positive, K::positive, K::real};
    case Family::piecewise_gp: {
      std::vector<K> k(1 + spec.pieces.size(), K::shape_floor);
      k[0] = K::positive;
      return k;
    }
    case Family::gev: return {K::real, K::positive, K::real};
  }
  return {};
}

double forward(PKind k, double th) {
  switch (k) {
    case PKind::real: return th;
    case PKind::positive:
    case PKind::nonneg: return std::exp(th);
    case PKind::shape_floor: return -1.0 + std::exp(th);
  }
  return th;
}

double inverse(PKind k, double p) {
  switch (k) {
    case PKind::real: return p;
    case PKind::positive: return std::log(std::max(p, 1e-300));
    case PKind::nonneg: return std::log(std::max(p, 1e-4));
    case PKind::shape_floor: return std::log(std::max(p + 1.0, 1e-6));
  }
  return p;
}

double jacobian(PKind k, double th) {
  switch (k) {
    case PKind::real: return 1.0;
    case PKind::positive:
    case PKind::nonneg:
    case PKind::shape_floor: return std::exp(th);
  }
  return 1.0;
}

// Maps the free vector onto the full parameter vector. src[i] is the free
// index feeding parameter i, or -1 for a parameter fixed at zero.
struct Layout {
  std::vector<int> src;
  std::vector<PKind> kinds;  // per free index

  [[nodiscard]] int free_count() const { return static_cast<int>(kinds.size()); }

  ParamVector expand(const Eigen::VectorXd& th) const {
    ParamVector p(std::vector<double>(src.size(), 0.0));
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] >= 0) p[i] = forward(kinds[src[i]], th[src[i]]);
    }
    return p;
  }

  Eigen::VectorXd contract(const ParamVector& p) const {
    Eigen::VectorXd th = Eigen::VectorXd::Zero(free_count());
    std::vector<double> sum(kinds.size(), 0.0);
    std::vector<int> cnt(kinds.size(), 0);
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i] < 0) continue;
      sum[src[i]] += p[i];
      ++cnt[src[i]];
    }
    for (int j = 0; j < free_count(); ++j) th[j] = inverse(kinds[j], sum[j] / cnt[j]);
    return th;
  }
};

Layout full_layout(const ModelSpec& spec) {
  Layout l;
  l.kinds = param_kinds(spec);
  l.src.resize(l.kinds.size());
  std::iota(l.src.begin(), l.src.end(), 0);
  return l;
}

double typical_scale(std::span<const LifetimeRecord> data) {
  double acc = 0.0;
  for (const auto& r : data) {
    if (r.censoring == Censoring::interval_censored && std::isfinite(r.time_upper)) {
      acc += 0.5 * (r.time + r.time_upper);
    } else {
      acc += r.time;
    }
  }
  const double m = acc / static_cast<double>(std::max<std::size_t>(1, data.size()));
  return m > 0.0 && std::isfinite(m) ? m : 1.0;
}

ParamVector heuristic_start(const ModelSpec& spec, std::span<const LifetimeRecord> data) {
  const double m = typical_scale(data);
  switch (spec.family) {
    case Family::exponential: return {m};
    case Family::gompertz: return {m, 0.1};
    case Family::gompertz_makeham: return {m, 0.1, 0.1 / m};
    case Family::logistic_beard: return {0.2 / m, 0.9 / m, 0.1, 0.1 / m};
    case Family::gen_pareto: return {m, 0.0};
    case Family::ext_gp: return {m, 0.1, 0.0};
    case Family::weibull_gp: return {m, 1.0, 0.0};
    case Family::piecewise_gp: {
      std::vector<double> v(1 + spec.pieces.size(), 0.0);
      v[0] = m;
      return ParamVector(v);
    }
    case Family::gev: {
      double s2 = 0.0;
      for (const auto& r : data) s2 += (r.time - m) * (r.time - m);
      const double sd = std::sqrt(s2 / static_cast<double>(std::max<std::size_t>(1, data.size())));
      return {m, sd > 0.0 ? sd : 1.0, 0.0};
    }
  }
  return {};
}

struct LayoutFit {
  Eigen::VectorXd theta;
  double value = kInf;  // negative loglik
  bool converged = false;
  double gradient_norm = 0.0;
  int evaluations = 0;
};

LayoutFit fit_layout(const ModelSpec& spec, const Layout& layout,
                     std::span<const LifetimeRecord> data, const std::vector<ParamVector>& starts,
                     int n_heuristic, const OptimizeOptions& oopts) {
  const Objective obj = [&](const Eigen::VectorXd& th) {
    const ParamVector p = layout.expand(th);
    if (constraint_violation(spec, p)) return kInf;
    return -loglik(Model(spec, p), data);
  };
  std::vector<Eigen::VectorXd> thetas;
  for (const auto& s : starts) thetas.push_back(layout.contract(s));
  if (n_heuristic > 0) {
    const Eigen::VectorXd base = layout.contract(heuristic_start(spec, data));
    for (int k = 0; k < n_heuristic; ++k) {
      Eigen::VectorXd th = base;
      for (int i = 0; i < th.size() && k > 0; ++i) th[i] += 0.6 * std::sin(1.3 * k * (i + 1) + 0.4 * i);
      thetas.push_back(th);
    }
  }
  LayoutFit best;
  for (const auto& th0 : thetas) {
    if (!std::isfinite(obj(th0))) continue;
    const OptimizeResult r = minimize(obj, th0, oopts);
    best.evaluations += r.evaluations;
    if (r.value < best.value) {
      const int ev = best.evaluations;
      best = {r.x, r.value, r.converged, r.gradient_norm, ev};
    }
  }
  return best;
}

void fill_information(FitResult& out, const ModelSpec& spec, const Layout& layout,
                      const LayoutFit& lf, std::span<const LifetimeRecord> data) {
  const std::size_t P = layout.src.size();
  const int q = layout.free_count();
  out.covariance.assign(P, std::vector<double>(P, 0.0));
  out.std_errors.assign(P, kNaN);
  out.free_params.clear();
  for (std::size_t i = 0; i < P; ++i) {
    if (layout.src[i] >= 0) out.free_params.push_back(i);
  }
  const Objective obj = [&](const Eigen::VectorXd& th) {
    const ParamVector p = layout.expand(th);
    if (constraint_violation(spec, p)) return kInf;
    return -loglik(Model(spec, p), data);
  };
  const Eigen::MatrixXd H = numeric_hessian(obj, lf.theta);
  // A maps free-scale perturbations to the original parameters.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P), q);
  for (std::size_t i = 0; i < P; ++i) {
    const int j = layout.src[i];
    if (j >= 0) A(static_cast<Eigen::Index>(i), j) = jacobian(layout.kinds[j], lf.theta[j]);
  }
  if (out.free_params.size() == static_cast<std::size_t>(q)) {
    const std::size_t m = out.free_params.size();
    out.observed_information.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        const double ja = A(static_cast<Eigen::Index>(out.free_params[a]), static_cast<Eigen::Index>(a));
        const double jb = A(static_cast<Eigen::Index>(out.free_params[b]), static_cast<Eigen::Index>(b));
        out.observed_information[a][b] = H(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) / (ja * jb);
      }
    }
  }
  if (!H.allFinite()) {
    out.message = "information matrix is not finite";
    return;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
    out.message = "observed information is not positive definite";
    return;
  }
  const Eigen::MatrixXd cov_theta = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd cov = A * cov_theta * A.transpose();
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t j = 0; j < P; ++j) {
      out.covariance[i][j] = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    if (layout.src[i] >= 0) out.std_errors[i] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
  }
}

// Fit on already thresholded data with the given layout, trying boundary
// layouts for nonnegative parameters when requested.
FitResult fit_prepared(const ModelSpec& spec, const Layout& layout,
                       std::span<const LifetimeRecord> data, const FitOptions& opts) {
  FitResult out;
  out.spec = spec;
  out.n_used = data.size();

  LayoutFit best = fit_layout(spec, layout, data, opts.extra_starts, opts.starts, opts.optimizer);
  Layout best_layout = layout;

  if (opts.boundary_fits && std::isfinite(best.value)) {
    const auto kinds = param_kinds(spec);
    std::vector<std::size_t> nonneg;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      if (kinds[i] == PKind::nonneg && layout.src[i] >= 0) nonneg.push_back(i);
    }
    const ParamVector interior = layout.expand(best.theta);
    for (unsigned mask = 1; mask < (1u << nonneg.size()); ++mask) {
      std::vector<std::size_t> fixed;
      for (std::size_t b = 0; b < nonneg.size(); ++b) {
        if (mask & (1u << b)) fixed.push_back(nonneg[b]);
      }
      Layout bl = layout;
      // Drop the fixed parameters from the free vector, keeping ties intact.
      std::vector<int> remap(layout.kinds.size(), -1);
      bl.kinds.clear();
      for (std::size_t i = 0; i < layout.src.size(); ++i) {
        if (std::find(fixed.begin(), fixed.end(), i) != fixed.end()) {
          bl.src[i] = -1;
          continue;
        }
        const int j = layout.src[i];
        if (j < 0) continue;
        if (remap[j] < 0) {
          remap[j] = static_cast<int>(bl.kinds.size());
          bl.kinds.push_back(layout.kinds[j]);
        }
        bl.src[i] = remap[j];
      }
      ParamVector start = interior;
      for (auto i : fixed) start[i] = 0.0;
      std::vector<ParamVector> starts{start};
      for (const auto& s : opts.extra_starts) {
        ParamVector t = s;
        for (auto i : fixed) t[i] = 0.0;
        starts.push_back(t);
      }
      LayoutFit bf;
      if (bl.free_count() == 0) {
        const ParamVector p = bl.expand(Eigen::VectorXd());
        bf.theta = Eigen::VectorXd();
        bf.value = constraint_violation(spec, p) ? kInf : -loglik(Model(spec, p), data);
        bf.converged = true;
      } else {
        bf = fit_layout(spec, bl, data, starts, opts.starts > 0 ? 1 : 0, opts.optimizer);
      }
      // Prefer the boundary when it is as good up to rounding: the interior
      // search otherwise drifts towards it on the log scale.
      if (bf.value <= best.value + 1e-9 * std::max(1.0, std::abs(best.value))) {
        bf.evaluations += best.evaluations;
        best = bf;
        best_layout = bl;
      } else {
        best.evaluations += bf.evaluations;
      }
    }
  }

  out.evaluations = best.evaluations;
  if (!std::isfinite(best.value)) {
    out.converged = false;
    out.message = "no starting point gave a finite log-likelihood";
    out.mle = heuristic_start(spec, data);
    return out;
  }
  out.mle = best_layout.expand(best.theta);
  out.loglik = -best.value;
  out.gradient_norm = best.gradient_norm;
  out.converged = best.converged || best.gradient_norm <= 1e-4 * std::max(1.0, std::abs(best.value));
  const auto names = param_names(spec);
  const auto kinds = param_kinds(spec);
  for (std::size_t i = 0; i < best_layout.src.size(); ++i) {
    if (best_layout.src[i] < 0 && kinds[i] == PKind::nonneg && layout.src[i] >= 0) {
      out.at_boundary = true;
      out.boundary_params.push_back(names[i]);
    }
  }
  if (opts.information && best_layout.free_count() > 0) {
    fill_information(out, spec, best_layout, best, data);
  }
  if (!out.converged && out.message.empty()) out.message = "optimizer did not converge";
  return out;
}

}  // namespace

FitResult fit_mle(const ModelSpec& spec, std::span<const LifetimeRecord> records, double threshold,
                  const FitOptions& opts) {
  if (spec.family == Family::piecewise_gp) {
    if (auto why = constraint_violation(spec, ParamVector(std::vector<double>(1 + spec.pieces.size(), 0.5)))) {
      throw std::invalid_argument(*why);
    }
  }
  ThresholdedData data = above_threshold(records, threshold);
  if (data.records.size() < 3) {
    throw DataError("fewer than 3 usable records above threshold " + std::to_string(threshold));
  }
  FitResult out = fit_prepared(spec, full_layout(spec), data.records, opts);
  out.threshold = threshold;
  out.n_dropped = data.n_below + data.n_straddle;
  out.n_ties = data.n_ties;
  return out;
}

std::vector<FitResult> threshold_scan(const ModelSpec& spec, std::span<const LifetimeRecord> records,
                                      std::span<const double> thresholds, const FitOptions& opts) {
  std::vector<FitResult> out;
  for (double v : thresholds) out.push_back(fit_mle(spec, records, v, opts));
  return out;
}

// ---------------------------------------------------------------------------
// Endpoint profile

ProfileTrace profile_endpoint(std::span<const LifetimeRecord> records, double threshold,
                              double origin, std::vector<double> grid,
                              std::vector<double> levels) {
  const ModelSpec gp = ModelSpec::of(Family::gen_pareto);
  const ThresholdedData data = above_threshold(records, threshold);
  if (data.records.size() < 3) {
    throw DataError("fewer than 3 usable records above threshold " + std::to_string(threshold));
  }
  const FitResult full = fit_prepared(gp, full_layout(gp), data.records, FitOptions{});
  const double base = origin + threshold;
  double emax = 0.0;
  for (const auto& r : data.records) emax = std::max(emax, r.time);

  ProfileTrace tr;
  tr.origin = origin;
  tr.threshold = threshold;
  tr.loglik_max = full.loglik;
  tr.xi_hat = full.mle[1];
  tr.psi_hat = base + (tr.xi_hat < 0.0 ? -full.mle[0] / tr.xi_hat : kInf);
  if (tr.xi_hat >= 0.0) tr.psi_hat = kInf;

  struct Point {
    double value;
    double sigma;
  };
  auto profile_at = [&](double psi) -> Point {
    const double e = psi - base;
    if (!(e > emax)) return {-kInf, kNaN};
    auto negll = [&](double log_sigma) {
      const double s = std::exp(log_sigma);
      const ParamVector p{s, -s / e};
      if (constraint_violation(gp, p)) return kInf;
      const double v = -loglik(Model(gp, p), data.records);
      return std::isfinite(v) ? v : 1e300;
    };
    const auto [x, fx] = boost::math::tools::brent_find_minima(negll, std::log(e) - 30.0, std::log(e), 52);
    return {fx >= 1e300 ? -kInf : -fx, std::exp(x)};
  };

  if (grid.empty()) {
    const double lo = emax + 0.01;
    const double hi = std::max(80.0, 2.0 * lo);
    const int n = 200;
    for (int i = 0; i < n; ++i) {
      grid.push_back(base + std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1)));
    }
  }
  if (std::isfinite(tr.psi_hat)) grid.push_back(tr.psi_hat);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  tr.grid = grid;
  for (double psi : grid) {
    const Point pt = profile_at(psi);
    tr.values.push_back(pt.value);
    tr.sigma.push_back(pt.sigma);
  }

  // The unconstrained fit can land marginally below a profile point.
  for (double v : tr.values) tr.loglik_max = std::max(tr.loglik_max, v);

  std::size_t peak = grid.size();
  if (std::isfinite(tr.psi_hat)) {
    peak = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), tr.psi_hat) - grid.begin());
  }
  for (double level : levels) {
    ProfileLimit lim;
    lim.level = level;
    const double cut = tr.loglik_max - 0.5 * chi2_quantile(level, 1.0);
    auto f = [&](double psi) { return profile_at(psi).value - cut; };
    auto solve = [&](double a, double b) {
      boost::math::tools::eps_tolerance<double> tol(40);
      std::uintmax_t it = 100;
      const auto r = boost::math::tools::bisect(f, a, b, tol, it);
      return 0.5 * (r.first + r.second);
    };
    // Lower limit: walk down from the peak.
    std::size_t start = peak == grid.size() ? grid.size() - 1 : peak;
    lim.lower_at_grid_edge = true;
    lim.lower = grid.front();
    for (std::size_t i = start; i-- > 0;) {
      if (tr.values[i] < cut) {
        if (tr.values[i + 1] >= cut) {
          lim.lower = solve(grid[i], grid[i + 1]);
          lim.lower_at_grid_edge = false;
        }
        break;
      }
    }
    if (peak == grid.size() && tr.values.back() < cut) {
      // Whole grid below the cut: the interval starts beyond the grid.
      lim.lower = grid.back();
      lim.lower_at_grid_edge = true;
    }
    lim.upper = kInf;
    lim.upper_unbounded = true;
    if (peak < grid.size()) {
      for (std::size_t i = peak + 1; i < grid.size(); ++i) {
        if (tr.values[i] < cut) {
          lim.upper = solve(grid[i - 1], grid[i]);
          lim.upper_unbounded = false;
          break;
        }
      }
    }
    tr.limits.push_back(lim);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Nested tests

std::string_view to_string(Calibration c) {
  switch (c) {
    case Calibration::chi2: return "chi2";
    case Calibration::half_chi2: return "half_chi2";
    case Calibration::bootstrap: return "bootstrap";
  }
  return "?";
}

Calibration calibration_from_string(std::string_view s) {
  if (s == "chi2") return Calibration::chi2;
  if (s == "half_chi2") return Calibration::half_chi2;
  if (s == "bootstrap") return Calibration::bootstrap;
  throw std::invalid_argument("unknown calibration '" + std::string(s) + "'");
}

ParamVector NestedPair::embed(const ParamVector& q) const {
  using F = Family;
  const F a = null_spec.family, b = alt_spec.family;
  if (a == F::exponential && b == F::gompertz) return {q[0], 0.0};
  if (a == F::gompertz && b == F::gompertz_makeham) return {q[0], q[1], 0.0};
  if (a == F::exponential && b == F::gen_pareto) return {q[0], 0.0};
  if (a == F::gen_pareto && b == F::weibull_gp) return {q[0], 1.0, q[1]};
  if (a == F::gompertz && b == F::ext_gp) return {q[0], q[1], 0.0};
  if (a == F::gen_pareto && b == F::ext_gp) return {q[0], 0.0, q[1]};
  throw InternalError("embed called on an unsupported pair");
}

NestedPair nested_pair(const ModelSpec& spec0, const ModelSpec& spec1) {
  using F = Family;
  NestedPair np;
  np.null_spec = spec0;
  np.alt_spec = spec1;
  const F a = spec0.family, b = spec1.family;
  if ((a == F::exponential && b == F::gompertz) || (a == F::gompertz && b == F::gompertz_makeham) ||
      (a == F::gen_pareto && b == F::ext_gp)) {
    np.calibration = Calibration::half_chi2;
    return np;
  }
  if ((a == F::exponential && b == F::gen_pareto) || (a == F::gen_pareto && b == F::weibull_gp) ||
      (a == F::gompertz && b == F::ext_gp)) {
    np.calibration = Calibration::chi2;
    return np;
  }
  throw std::invalid_argument(std::string(to_string(a)) + " is not nested in " +
                              std::string(to_string(b)));
}

double lrt_pvalue(double w, Calibration calibration, double df) {
  if (!(w > 0.0)) return 1.0;
  if (calibration == Calibration::half_chi2) return 0.5 * chi2_sf(w, df);
  return chi2_sf(w, df);
}

namespace {

// Statistics within rounding of zero count as zero, so that replicate
// comparisons are not decided by optimizer noise.
double clamp_statistic(double w) { return w < 1e-8 ? 0.0 : w; }

struct PairFits {
  FitResult null_fit, alt_fit;
  double w = 0.0;
};

PairFits fit_pair(const NestedPair& np, std::span<const LifetimeRecord> data, const FitOptions& null_opts,
                  FitOptions alt_opts) {
  PairFits pf;
  pf.null_fit = fit_prepared(np.null_spec, full_layout(np.null_spec), data, null_opts);
  if (std::isfinite(pf.null_fit.loglik)) alt_opts.extra_starts.insert(alt_opts.extra_starts.begin(), np.embed(pf.null_fit.mle));
  pf.alt_fit = fit_prepared(np.alt_spec, full_layout(np.alt_spec), data, alt_opts);
  pf.w = clamp_statistic(2.0 * (pf.alt_fit.loglik - pf.null_fit.loglik));
  return pf;
}

}  // namespace

TestResult lrt_nested(const ModelSpec& spec0, const ModelSpec& spec1,
                      std::span<const LifetimeRecord> records, double threshold) {
  const NestedPair np = nested_pair(spec0, spec1);
  const ThresholdedData data = above_threshold(records, threshold);
  if (data.records.size() < 3) throw DataError("fewer than 3 usable records above threshold");
  const PairFits pf = fit_pair(np, data.records, FitOptions{}, FitOptions{});
  if (!pf.null_fit.converged || !pf.alt_fit.converged) {
    throw NumericError("fit did not converge in likelihood ratio test");
  }
  TestResult t;
  t.null_model = std::string(to_string(spec0.family));
  t.alt_model = std::string(to_string(spec1.family));
  t.statistic = pf.w;
  t.df = np.df;
  t.calibration = np.calibration;
  t.p_asymptotic = lrt_pvalue(pf.w, np.calibration, np.df);
  t.loglik0 = pf.null_fit.loglik;
  t.loglik1 = pf.alt_fit.loglik;
  return t;
}

std::vector<LifetimeRecord> simulate_like(const Model& model, std::span<const LifetimeRecord> records,
                                          Rng& rng) {
  std::vector<LifetimeRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const double t = model.draw(rng, r.truncation);
    LifetimeRecord s = r;
    const double limit = r.censoring == Censoring::right_censored ? r.time : r.censor_limit;
    if (r.censoring == Censoring::interval_censored) {
      const double w = r.time_upper - r.time;
      if (std::isfinite(w)) {
        const double lo = r.time + std::floor((t - r.time) / w) * w;
        s.time = std::max(0.0, lo);
        s.time_upper = lo + w;
      } else if (t >= r.time) {
        s.time_upper = kInf;
      } else {
        s.censoring = Censoring::observed;
        s.time = t;
        s.time_upper = kInf;
      }
    } else if (t > limit) {
      s.censoring = Censoring::right_censored;
      s.time = limit;
      s.censor_limit = limit;
    } else {
      s.censoring = Censoring::observed;
      s.time = t;
    }
    out.push_back(std::move(s));
  }
  return out;
}

TestResult bootstrap_lrt(const ModelSpec& spec0, const ModelSpec& spec1,
                         std::span<const LifetimeRecord> records, std::size_t B, std::uint64_t seed,
                         double threshold) {
  const NestedPair np = nested_pair(spec0, spec1);
  const ThresholdedData data = above_threshold(records, threshold);
  if (data.records.size() < 3) throw DataError("fewer than 3 usable records above threshold");
  const PairFits pf = fit_pair(np, data.records, FitOptions{}, FitOptions{});
  if (!pf.null_fit.converged) throw NumericError("null fit did not converge");

  TestResult t;
  t.null_model = std::string(to_string(spec0.family));
  t.alt_model = std::string(to_string(spec1.family));
  t.statistic = pf.w;
  t.df = np.df;
  t.calibration = Calibration::bootstrap;
  t.p_asymptotic = lrt_pvalue(pf.w, np.calibration, np.df);
  t.loglik0 = pf.null_fit.loglik;
  t.loglik1 = pf.alt_fit.loglik;
  t.B = B;
  t.seed = seed;
  if (B == 0) {
    t.p_bootstrap = 1.0;
    t.degenerate = true;
    return t;
  }

  const Model null_model(spec0, pf.null_fit.mle);
  FitOptions rep_null;
  rep_null.starts = 0;
  rep_null.information = false;
  rep_null.extra_starts = {pf.null_fit.mle};
  FitOptions rep_alt;
  // Replicates start the alternative from their own embedded null fit.
  rep_alt.starts = 0;
  rep_alt.information = false;
  {
    // With a single nonnegative parameter the boundary fit is the null fit,
    // and the clamp on w already covers it.
    const auto kinds = param_kinds(spec1);
    if (np.calibration == Calibration::half_chi2 &&
        std::count(kinds.begin(), kinds.end(), PKind::nonneg) == 1) {
      rep_alt.boundary_fits = false;
    }
  }
  t.replicate_statistics = parallel_map<double>(B, [&](std::size_t b) {
    Rng rng(seed, b);
    const auto sim = simulate_like(null_model, data.records, rng);
    const PairFits r = fit_pair(np, sim, rep_null, rep_alt);
    if (!r.null_fit.converged || !r.alt_fit.converged) return kNaN;
    return r.w;
  });
  std::size_t exceed = 0, ok = 0;
  for (double w : t.replicate_statistics) {
    if (std::isnan(w)) {
      ++t.failures;
      continue;
    }
    ++ok;
    if (w >= t.statistic) ++exceed;
  }
  if (static_cast<double>(t.failures) > 0.02 * static_cast<double>(B)) {
    throw NumericError(std::to_string(t.failures) + " of " + std::to_string(B) +
                       " bootstrap replicate fits failed");
  }
  t.p_bootstrap = (1.0 + static_cast<double>(exceed)) / (static_cast<double>(ok) + 1.0);
  return t;
}

// ---------------------------------------------------------------------------
// Piecewise shape tests and group comparisons

ShapeTestResult nc_fit_and_shape_test(std::span<const LifetimeRecord> records,
                                      std::span<const double> thresholds, const FitOptions& opts) {
  if (thresholds.empty()) throw std::invalid_argument("at least one threshold is required");
  for (std::size_t k = 1; k < thresholds.size(); ++k) {
    if (!(thresholds[k] > thresholds[k - 1])) throw std::invalid_argument("thresholds must increase");
  }
  const std::size_t K = thresholds.size();
  const double u1 = thresholds[0];
  for (std::size_t k = 0; k < K; ++k) {
    const double lo = thresholds[k];
    const double hi = k + 1 < K ? thresholds[k + 1] : kInf;
    const auto deaths = std::count_if(records.begin(), records.end(), [&](const LifetimeRecord& r) {
      return r.censoring != Censoring::right_censored && r.time > lo && r.time < hi;
    });
    if (deaths == 0) {
      throw DataError("no deaths in threshold interval [" + std::to_string(lo) + ", " +
                      (std::isfinite(hi) ? std::to_string(hi) : std::string("inf")) + ")");
    }
  }
  std::vector<double> pieces;
  for (double u : thresholds) pieces.push_back(u - u1);
  const ModelSpec spec = ModelSpec::piecewise(pieces);
  const ThresholdedData data = above_threshold(records, u1);
  if (data.records.size() < 3) throw DataError("fewer than 3 usable records above threshold");

  ShapeTestResult out;
  out.fit = fit_prepared(spec, full_layout(spec), data.records, opts);
  out.fit.threshold = u1;
  out.fit.n_dropped = data.n_below + data.n_straddle;
  out.fit.n_ties = data.n_ties;

  for (std::size_t k = 1; k < K; ++k) {
    // Shapes k..K (1-based) share one free parameter.
    Layout l;
    l.kinds.push_back(PKind::positive);
    l.src.push_back(0);
    for (std::size_t j = 1; j <= K; ++j) {
      const std::size_t free_j = std::min(j, k);
      if (free_j == l.kinds.size()) l.kinds.push_back(PKind::shape_floor);
      l.src.push_back(static_cast<int>(free_j));
    }
    FitOptions nopts = opts;
    nopts.extra_starts.push_back(out.fit.mle);
    FitResult nf = fit_prepared(spec, l, data.records, nopts);
    nf.threshold = u1;
    if (nf.loglik > out.fit.loglik) {
      FitOptions fopts = opts;
      fopts.extra_starts.push_back(nf.mle);
      FitResult refit = fit_prepared(spec, full_layout(spec), data.records, fopts);
      refit.threshold = u1;
      refit.n_dropped = out.fit.n_dropped;
      refit.n_ties = out.fit.n_ties;
      if (refit.loglik > out.fit.loglik) out.fit = refit;
    }
    out.nulls.push_back(std::move(nf));
  }
  for (std::size_t k = 1; k < K; ++k) {
    TestResult t;
    t.null_model = "piecewise_gp equal shapes from piece " + std::to_string(k);
    t.alt_model = "piecewise_gp";
    t.df = static_cast<double>(K - k);
    t.calibration = Calibration::chi2;
    t.loglik0 = out.nulls[k - 1].loglik;
    t.loglik1 = out.fit.loglik;
    t.statistic = clamp_statistic(2.0 * (t.loglik1 - t.loglik0));
    t.p_asymptotic = lrt_pvalue(t.statistic, Calibration::chi2, t.df);
    out.tests.push_back(t);
  }
  return out;
}

TestResult group_comparison(std::span<const LifetimeRecord> records,
                            std::span<const std::string> labels, const ModelSpec& spec,
                            double threshold, GroupMethod method) {
  if (labels.size() != records.size()) {
    throw std::invalid_argument("one group label per record is required");
  }
  std::map<std::string, std::vector<LifetimeRecord>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[labels[i]].push_back(records[i]);
  if (groups.size() < 2) throw DataError("group comparison needs at least two nonempty groups");

  const double m = static_cast<double>(groups.size());
  const double k = static_cast<double>(param_count(spec));
  std::vector<FitResult> fits;
  for (const auto& [name, recs] : groups) {
    FitResult f = fit_mle(spec, recs, threshold);
    if (!f.converged) throw NumericError("fit for group '" + name + "' did not converge");
    fits.push_back(std::move(f));
  }
  TestResult t;
  t.null_model = "common " + std::string(to_string(spec.family));
  t.alt_model = "per-group " + std::string(to_string(spec.family));
  t.df = (m - 1.0) * k;
  t.calibration = Calibration::chi2;

  if (method == GroupMethod::lrt) {
    FitOptions opts;
    for (const auto& f : fits) opts.extra_starts.push_back(f.mle);
    const FitResult pooled = fit_mle(spec, records, threshold, opts);
    if (!pooled.converged) throw NumericError("pooled fit did not converge");
    double sum = 0.0;
    for (const auto& f : fits) sum += f.loglik;
    t.loglik0 = pooled.loglik;
    t.loglik1 = sum;
    t.statistic = clamp_statistic(2.0 * (sum - pooled.loglik));
  } else {
    t.method = "wald";
    const auto K = static_cast<Eigen::Index>(k);
    const Eigen::Index G = static_cast<Eigen::Index>(fits.size()) - 1;
    Eigen::VectorXd d(G * K);
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(G * K, G * K);
    auto cov = [](const FitResult& f) {
      const auto P = static_cast<Eigen::Index>(f.covariance.size());
      Eigen::MatrixXd c(P, P);
      for (Eigen::Index i = 0; i < P; ++i) {
        for (Eigen::Index j = 0; j < P; ++j) c(i, j) = f.covariance[i][j];
      }
      return c;
    };
    const Eigen::MatrixXd c0 = cov(fits[0]);
    for (Eigen::Index g = 0; g < G; ++g) {
      const Eigen::MatrixXd cg = cov(fits[g + 1]);
      for (Eigen::Index i = 0; i < K; ++i) d[g * K + i] = fits[g + 1].mle[i] - fits[0].mle[i];
      for (Eigen::Index h = 0; h < G; ++h) V.block(g * K, h * K, K, K) = c0;
      V.block(g * K, g * K, K, K) += cg;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
    if (ldlt.info() != Eigen::Success || !V.allFinite()) {
      throw NumericError("Wald covariance is singular");
    }
    t.statistic = clamp_statistic(d.dot(ldlt.solve(d)));
  }
  t.p_asymptotic = lrt_pvalue(t.statistic, Calibration::chi2, t.df);
  return t;
}

}  // namespace longtail
