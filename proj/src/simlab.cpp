#include "longtail/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "longtail/likelihood.hpp"
#include "longtail/parallel.hpp"
#include "longtail/stats.hpp"

namespace longtail {

// ---------------------------------------------------------------------------
// RateFunction

RateFunction::RateFunction(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.size() < 2 || knots_.size() != values_.size()) {
    throw std::invalid_argument("rate function needs matching knots and values (at least two)");
  }
  for (std::size_t k = 0; k < knots_.size(); ++k) {
    if (!std::isfinite(knots_[k]) || !std::isfinite(values_[k])) {
      throw std::invalid_argument("rate function knots and values must be finite");
    }
    if (values_[k] < 0.0) throw std::invalid_argument("rate function must be nonnegative");
    if (k > 0 && !(knots_[k] > knots_[k - 1])) {
      throw std::invalid_argument("rate function knots must be increasing");
    }
  }
}

double RateFunction::operator()(double x) const {
  if (knots_.empty() || x < knots_.front() || x > knots_.back()) return 0.0;
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  if (it == knots_.end()) return values_.back();
  const auto k = static_cast<std::size_t>(it - knots_.begin());
  const double w = (x - knots_[k - 1]) / (knots_[k] - knots_[k - 1]);
  return values_[k - 1] + w * (values_[k] - values_[k - 1]);
}

double RateFunction::integral(double a, double b) const {
  if (knots_.empty() || !(b > a)) return 0.0;
  double total = 0.0;
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    const double lo = std::max(a, knots_[k - 1]);
    const double hi = std::min(b, knots_[k]);
    if (hi > lo) total += 0.5 * (hi - lo) * ((*this)(lo) + (*this)(hi));
  }
  return total;
}

double RateFunction::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

std::vector<double> RateFunction::sample_process(Rng& rng) const {
  std::vector<double> xs;
  const double m = max_value();
  if (knots_.empty() || m <= 0.0) return xs;
  const long n = rng.poisson(m * (upper() - lower()));
  for (long i = 0; i < n; ++i) {
    const double x = rng.uniform(lower(), upper());
    if (rng.uniform() * m < (*this)(x)) xs.push_back(x);
  }
  std::sort(xs.begin(), xs.end());
  return xs;
}

// ---------------------------------------------------------------------------
// Cohorts

void CohortSimConfig::validate() const {
  if (!entry_rate) {
    if (!(years >= 0.0) || !std::isfinite(years)) throw std::invalid_argument("years must be finite and >= 0");
    if (!(mean_annual > 0.0)) throw std::invalid_argument("mean annual count must be positive");
  }
  if (!(c2 >= c1)) throw std::invalid_argument("sampling window needs c1 <= c2");
  if (replicates == 0) throw std::invalid_argument("replicate count must be positive");
  if (auto why = constraint_violation(law, params)) throw std::invalid_argument("invalid law: " + *why);
}

CohortSample simulate_cohorts(const CohortSimConfig& config, std::size_t replicate) {
  config.validate();
  const Model law(config.law, config.params);
  Rng rng(config.seed, replicate);
  CohortSample out;

  std::vector<double> entries;
  if (config.entry_rate) {
    entries = config.entry_rate->sample_process(rng);
  } else {
    const auto whole = static_cast<long>(std::ceil(config.years));
    for (long y = 0; y < whole; ++y) {
      const double span = std::min(1.0, config.years - static_cast<double>(y));
      const long count = rng.poisson(config.mean_annual * span);
      for (long i = 0; i < count; ++i) entries.push_back(static_cast<double>(y) + span * rng.uniform());
    }
  }
  out.truth.reserve(entries.size());
  for (double x : entries) {
    out.truth.push_back({x, law.draw(rng), static_cast<long>(std::floor(x))});
  }

  const double c1 = config.c1, c2 = config.c2;
  for (const auto& ind : out.truth) {
    const double death = ind.entry + ind.lifetime;
    if (ind.entry >= c2 || death < c1) continue;
    const double a = std::max(0.0, c1 - ind.entry);
    if (death <= c2) {
      out.interval_truncated.push_back(
          LifetimeRecord::observed(ind.lifetime, IntervalSet{Interval{a, c2 - ind.entry}}));
      out.ltrc.push_back(LifetimeRecord::observed(ind.lifetime, IntervalSet{Interval{a, kInf}}, c2 - ind.entry));
    } else {
      out.ltrc.push_back(LifetimeRecord::right_censored(c2 - ind.entry, IntervalSet{Interval{a, kInf}}));
    }
  }

  if (!out.truth.empty()) {
    long first = out.truth.front().cohort, last = first;
    for (const auto& ind : out.truth) {
      first = std::min(first, ind.cohort);
      last = std::max(last, ind.cohort);
    }
    long earliest_open = last + 1;
    for (const auto& ind : out.truth) {
      if (ind.entry + ind.lifetime > c2) earliest_open = std::min(earliest_open, ind.cohort);
    }
    if (earliest_open > first) {
      out.b_star = earliest_open - 1;
      for (const auto& ind : out.truth) {
        if (ind.cohort <= *out.b_star) {
          out.extinct.push_back(
              LifetimeRecord::observed(ind.lifetime, IntervalSet{Interval{0.0, c2 - ind.entry}}));
        }
      }
    }
  }
  int k = 0;
  for (auto* view : {&out.interval_truncated, &out.ltrc, &out.extinct}) {
    const char* tag = k == 0 ? "it" : (k == 1 ? "lt" : "ex");
    for (std::size_t i = 0; i < view->size(); ++i) (*view)[i].id = std::string(tag) + std::to_string(i);
    ++k;
  }
  return out;
}

EstimatorSummary summarize_estimates(std::string name, std::vector<double> estimates, double truth) {
  EstimatorSummary s;
  s.name = std::move(name);
  s.estimates = std::move(estimates);
  if (s.estimates.empty()) return s;
  s.mean = mean(s.estimates);
  s.bias = s.mean - truth;
  s.variance = variance(s.estimates);
  s.se_mean = std::sqrt(s.variance / static_cast<double>(s.estimates.size()));
  s.z_bias = s.bias / s.se_mean;
  std::vector<double> sorted = s.estimates;
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.q25 = sample_quantile_sorted(sorted, 0.25);
  s.median = sample_quantile_sorted(sorted, 0.5);
  s.q75 = sample_quantile_sorted(sorted, 0.75);
  s.max = sorted.back();
  return s;
}

namespace {

FitOptions light_fit(ParamVector start) {
  FitOptions f;
  f.starts = 1;
  f.information = false;
  f.boundary_fits = false;
  f.extra_starts.push_back(std::move(start));
  return f;
}

}  // namespace

ExtinctCohortResult extinct_cohort_experiment(const CohortSimConfig& config) {
  config.validate();
  if (config.law.family != Family::exponential) {
    throw std::invalid_argument("the extinct-cohort experiment uses an exponential law");
  }
  struct Rep {
    bool ok = false;
    double naive = kNaN, extinct = kNaN, full = kNaN;
  };
  const ModelSpec spec = ModelSpec::of(Family::exponential);
  const auto reps = parallel_map<Rep>(config.replicates, [&](std::size_t r) {
    Rep rep;
    const CohortSample s = simulate_cohorts(config, r);
    if (s.extinct.size() < 3 || s.interval_truncated.size() < 3) return rep;
    double total = 0.0;
    for (const auto& rec : s.extinct) total += rec.time;
    rep.naive = total / static_cast<double>(s.extinct.size());
    const FitResult fe = fit_mle(spec, s.extinct, 0.0, light_fit({rep.naive}));
    const FitResult ff = fit_mle(spec, s.interval_truncated, 0.0, light_fit({rep.naive}));
    if (!fe.converged || !ff.converged) {
      throw NumericError("exponential fit failed in extinct-cohort replicate " + std::to_string(r));
    }
    rep.extinct = fe.mle[0];
    rep.full = ff.mle[0];
    rep.ok = true;
    return rep;
  });
  ExtinctCohortResult res;
  res.truth = config.params[0];
  res.replicates = config.replicates;
  std::vector<double> a, b, c;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    if (!reps[r].ok) {
      ++res.dropped;
      continue;
    }
    res.replicate_index.push_back(r);
    a.push_back(reps[r].naive);
    b.push_back(reps[r].extinct);
    c.push_back(reps[r].full);
  }
  res.estimators.push_back(summarize_estimates("naive_extinct", std::move(a), res.truth));
  res.estimators.push_back(summarize_estimates("extinct_truncated", std::move(b), res.truth));
  res.estimators.push_back(summarize_estimates("full_truncated", std::move(c), res.truth));
  return res;
}

// ---------------------------------------------------------------------------
// Tabulation

TabulationResult tabulation_experiment(const TabulationConfig& cfg) {
  if (cfg.n < 3 || cfg.replicates == 0) throw std::invalid_argument("need n >= 3 and replicates > 0");
  if (!(cfg.bin_width >= 0.0)) throw std::invalid_argument("bin width must be >= 0");
  if (!(cfg.c2 - cfg.entry_span > 0.0)) throw std::invalid_argument("c2 must exceed the entry span");
  const ModelSpec spec = ModelSpec::of(Family::gen_pareto);
  const Model law(spec, {cfg.sigma, cfg.xi});
  struct Rep {
    double exact = kNaN, binned = kNaN, xe = kNaN, xb = kNaN;
    int failures = 0;
  };
  const auto reps = parallel_map<Rep>(cfg.replicates, [&](std::size_t r) {
    Rng rng(cfg.seed, r);
    std::vector<LifetimeRecord> exact, binned;
    exact.reserve(cfg.n);
    binned.reserve(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) {
      const double b = cfg.c2 - cfg.entry_span * rng.uniform();
      const IntervalSet trunc{Interval{0.0, b}};
      const double t = law.draw(rng, trunc);
      exact.push_back(LifetimeRecord::observed(t, trunc));
      if (cfg.bin_width > 0.0) {
        const double lo = std::floor(t / cfg.bin_width) * cfg.bin_width;
        const double hi = std::min(lo + cfg.bin_width, b);
        binned.push_back(hi > lo ? LifetimeRecord::interval_censored(lo, hi, trunc)
                                 : LifetimeRecord::observed(t, trunc));
      }
    }
    Rep rep;
    const FitOptions fo = light_fit({cfg.sigma, cfg.xi});
    auto run = [&](const std::vector<LifetimeRecord>& recs, double& psi, double& xi) {
      const FitResult f = fit_mle(spec, recs, 0.0, fo);
      if (!f.converged) {
        ++rep.failures;
        return;
      }
      xi = f.mle[1];
      psi = gp_endpoint(cfg.origin, f.mle[0], f.mle[1]);
    };
    run(exact, rep.exact, rep.xe);
    if (cfg.bin_width > 0.0) {
      run(binned, rep.binned, rep.xb);
    } else {
      rep.binned = rep.exact;
      rep.xb = rep.xe;
    }
    return rep;
  });

  TabulationResult res;
  res.psi_true = gp_endpoint(cfg.origin, cfg.sigma, cfg.xi);
  for (const auto& rep : reps) {
    res.failures += static_cast<std::size_t>(rep.failures);
    if (!std::isnan(rep.exact)) {
      res.exact.push_back(rep.exact);
      res.xi_exact.push_back(rep.xe);
    }
    if (!std::isnan(rep.binned)) {
      res.binned.push_back(rep.binned);
      res.xi_binned.push_back(rep.xb);
    }
  }
  if (static_cast<double>(res.failures) > 0.02 * 2.0 * static_cast<double>(cfg.replicates)) {
    throw NumericError(std::to_string(res.failures) + " tabulation fits failed");
  }
  auto describe = [](const std::vector<double>& xs, double& med, double& l75, double& h75, double& l95,
                     double& h95, double& frac) {
    if (xs.empty()) return;
    std::vector<double> s = xs;
    std::sort(s.begin(), s.end());
    med = sample_quantile_sorted(s, 0.5);
    l75 = sample_quantile_sorted(s, 0.125);
    h75 = sample_quantile_sorted(s, 0.875);
    l95 = sample_quantile_sorted(s, 0.025);
    h95 = sample_quantile_sorted(s, 0.975);
    const auto above = std::count_if(s.begin(), s.end(), [](double v) { return v > 150.0; });
    frac = static_cast<double>(above) / static_cast<double>(s.size());
  };
  describe(res.exact, res.median_exact, res.exact_75_lo, res.exact_75_hi, res.exact_95_lo, res.exact_95_hi,
           res.frac_exact_above_150);
  describe(res.binned, res.median_binned, res.binned_75_lo, res.binned_75_hi, res.binned_95_lo,
           res.binned_95_hi, res.frac_binned_above_150);
  if (!res.exact.empty() && !res.binned.empty()) res.ks_distance = ks_distance(res.exact, res.binned);
  return res;
}

// ---------------------------------------------------------------------------
// Tilt

std::vector<double> tilted_density(const Model& law, const RateFunction& nu, double c1, double c2,
                                   std::span<const double> t_grid) {
  if (t_grid.empty()) return {};
  if (nu.empty()) throw std::invalid_argument("rate function is empty");
  auto f = [&](double t) { return law.in_support(t) ? std::exp(law.log_density(t)) : 0.0; };
  auto w = [&](double t) { return nu.integral(c1 - t, c2 - t); };
  auto g = [&](double t) { return f(t) * w(t); };

  const auto [mn, mx] = std::minmax_element(t_grid.begin(), t_grid.end());
  const double lo = *mn, hi = *mx;
  // w has kinks where c1 - t or c2 - t crosses a knot.
  std::vector<double> cuts{lo, hi};
  for (double k : nu.knots()) {
    for (double c : {c1 - k, c2 - k}) {
      if (c > lo && c < hi) cuts.push_back(c);
    }
  }
  if (law.support_upper() > lo && law.support_upper() < hi) cuts.push_back(law.support_upper());
  std::sort(cuts.begin(), cuts.end());
  double z = 0.0;
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    if (cuts[k] > cuts[k - 1]) {
      z += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, cuts[k - 1], cuts[k], 15, 1e-12);
    }
  }
  if (!(z > 0.0)) throw std::invalid_argument("tilting weight vanishes over the grid");
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back(g(t) / z);
  return out;
}

// ---------------------------------------------------------------------------

CohortSimConfig appendix_b_config() {
  CohortSimConfig c;
  c.years = 20.0;
  c.mean_annual = 150.0;
  c.law = ModelSpec::of(Family::exponential);
  c.params = ParamVector{1.0 / std::log(2.0)};
  c.c1 = 0.0;
  c.c2 = 20.0;
  c.seed = 1;
  c.replicates = 1000;
  return c;
}

TabulationConfig japan_tabulation_config() { return TabulationConfig{}; }

}  // namespace longtail
