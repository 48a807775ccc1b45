#include "longtail/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "longtail/likelihood.hpp"
#include "longtail/optimize.hpp"
#include "longtail/parallel.hpp"
#include "longtail/rng.hpp"
#include "longtail/stats.hpp"

namespace longtail {

// ---------------------------------------------------------------------------
// Exponential integral

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;

// Series, valid for small x.
double e1_series(double x) {
  double sum = 0.0, term = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= -x / k;
    const double add = term / k;
    sum += add;
    if (std::abs(add) < 1e-17 * std::abs(sum)) break;
  }
  return -kEulerGamma - std::log(x) - sum;
}

// Continued fraction for e^x E1(x), modified Lentz, for x > 1.
double scaled_e1_fraction(double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h;
}

}  // namespace

double expint_e1(double x) {
  if (!(x > 0.0)) throw std::domain_error("E1 requires x > 0");
  if (x <= 1.0) return e1_series(x);
  return scaled_e1_fraction(x) * std::exp(-x);
}

double scaled_expint_e1(double x) {
  if (!(x > 0.0)) throw std::domain_error("E1 requires x > 0");
  if (x <= 1.0) return std::exp(x) * e1_series(x);
  return scaled_e1_fraction(x);
}

// ---------------------------------------------------------------------------
// Priors

double mdi_log_prior(const PriorSpec& prior, const ParamVector& p) {
  switch (prior.family) {
    case Family::exponential:
      if (p.size() != 1 || !(p[0] > 0.0)) return -kInf;
      return -std::log(p[0]);
    case Family::gen_pareto:
      if (p.size() != 2 || !(p[0] > 0.0) || !(p[1] >= prior.xi_lower)) return -kInf;
      return -std::log(p[0]) - p[1] - 1.0;
    case Family::gompertz: {
      if (p.size() != 2 || !(p[0] > 0.0) || !(p[1] >= 0.0)) return -kInf;
      // e^{1/beta} E1(1/beta) -> 0 as beta -> 0.
      const double extra = p[1] == 0.0 ? 0.0 : scaled_expint_e1(1.0 / p[1]);
      return -std::log(p[0]) + extra;
    }
    default:
      throw std::invalid_argument("MDI priors are defined for exponential, gompertz and gen_pareto");
  }
}

double mdi_log_prior(Family family, const ParamVector& params) {
  return mdi_log_prior(PriorSpec{family, -1.0}, params);
}

// ---------------------------------------------------------------------------
// Ratio of uniforms

PosteriorSample rou_sample(const LogDensity& log_density, std::size_t dim, std::size_t n,
                           std::uint64_t seed, const RouOptions& opts) {
  PosteriorSample out;
  out.dim = dim;
  out.seed = seed;
  if (n == 0) return out;
  const auto d = static_cast<Eigen::Index>(dim);
  const double r1 = static_cast<double>(dim) + 1.0;

  // Mode and Laplace covariance.
  const Objective neg = [&](const Eigen::VectorXd& x) { return -log_density(x); };
  const Eigen::VectorXd x0 = opts.start.size() == d ? opts.start : Eigen::VectorXd::Zero(d);
  if (!std::isfinite(neg(x0))) throw NumericError("log density is not finite at the starting point");
  const OptimizeResult mode = minimize(neg, x0);
  const Eigen::VectorXd mu = mode.x;
  const double log_max = -mode.value;
  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(d, d);
  {
    const Eigen::MatrixXd H = numeric_hessian(neg, mu);
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (H.allFinite() && llt.info() == Eigen::Success) {
      const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(d, d));
      Eigen::LLT<Eigen::MatrixXd> lc(cov);
      if (lc.info() == Eigen::Success) L = lc.matrixL();
    }
  }
  // Standardised target h(y) = log g(mu + L y) - log g(mu).
  auto h = [&](const Eigen::VectorXd& y) {
    const double v = log_density(mu + L * y) - log_max;
    return std::isnan(v) ? -kInf : v;
  };

  // Box: u in (0, a], v_i in [b_minus_i, b_plus_i]. The mode gives a = 1 up
  // to optimisation error, so a is recomputed from h near 0.
  double log_a = 0.0;
  {
    const Objective f = [&](const Eigen::VectorXd& y) { return -h(y); };
    const OptimizeResult r = minimize(f, Eigen::VectorXd::Zero(d));
    log_a = std::max(0.0, -r.value) / r1;
  }
  std::vector<double> b_lo(dim), b_hi(dim);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (int sign : {1, -1}) {
      // maximise log(sign y_i) + h(y)/(d+1) over sign*y_i > 0
      const Objective f = [&](const Eigen::VectorXd& z) {
        Eigen::VectorXd y = z;
        y[i] = sign * std::exp(z[i]);
        const double hv = h(y);
        if (hv == -kInf) return kInf;
        return -(z[i] + hv / r1);
      };
      Eigen::VectorXd z0 = Eigen::VectorXd::Zero(d);
      const OptimizeResult r = minimize(f, z0);
      if (!std::isfinite(r.value) || r.x.lpNorm<Eigen::Infinity>() > 50.0) {
        throw NumericError("posterior not RoU-compatible; reparameterize");
      }
      const double b = std::exp(-r.value) * 1.0001;  // small safety margin
      if (sign > 0) {
        b_hi[static_cast<std::size_t>(i)] = b;
      } else {
        b_lo[static_cast<std::size_t>(i)] = -b;
      }
    }
  }

  const std::size_t S = std::max<std::size_t>(1, std::min(opts.streams, n));
  struct Chunk {
    std::vector<std::vector<double>> draws;
    std::vector<double> lp;
    std::size_t proposals = 0;
  };
  const auto chunks = parallel_map<Chunk>(S, [&](std::size_t s) {
    Chunk c;
    const std::size_t begin = s * n / S, end = (s + 1) * n / S;
    Rng rng(seed, s);
    Eigen::VectorXd v(d), y(d);
    while (c.draws.size() < end - begin) {
      ++c.proposals;
      if (c.proposals > 1000 * (end - begin) + 100000) {
        throw NumericError("ratio-of-uniforms acceptance rate collapsed");
      }
      const double log_u = log_a + std::log(rng.uniform());
      const double u = std::exp(log_u);
      for (Eigen::Index i = 0; i < d; ++i) {
        const auto k = static_cast<std::size_t>(i);
        v[i] = b_lo[k] + (b_hi[k] - b_lo[k]) * rng.uniform();
      }
      y = v / u;
      const double hv = h(y);
      if (r1 * log_u <= hv) {
        const Eigen::VectorXd x = mu + L * y;
        c.draws.emplace_back(x.data(), x.data() + d);
        c.lp.push_back(hv + log_max);
      }
    }
    return c;
  });
  for (const auto& c : chunks) {
    out.draws.insert(out.draws.end(), c.draws.begin(), c.draws.end());
    out.log_posterior.insert(out.log_posterior.end(), c.lp.begin(), c.lp.end());
    out.proposals += c.proposals;
  }
  out.acceptance_rate = static_cast<double>(n) / static_cast<double>(out.proposals);
  return out;
}

// ---------------------------------------------------------------------------
// Model posteriors

PosteriorSample posterior_sample(const ModelSpec& spec, std::span<const LifetimeRecord> records,
                                 double threshold, std::size_t n, std::uint64_t seed) {
  const Family fam = spec.family;
  if (fam != Family::exponential && fam != Family::gompertz && fam != Family::gen_pareto) {
    throw std::invalid_argument("posterior sampling supports exponential, gompertz and gen_pareto");
  }
  const ThresholdedData data = above_threshold(records, threshold);
  if (data.records.empty()) throw DataError("no usable records above threshold");
  const std::vector<LifetimeRecord>& recs = data.records;

  // Working scale: log sigma, then log beta (gompertz) or xi (gen_pareto).
  auto to_params = [fam](const Eigen::VectorXd& z) {
    if (fam == Family::exponential) return ParamVector{std::exp(z[0])};
    if (fam == Family::gompertz) return ParamVector{std::exp(z[0]), std::exp(z[1])};
    return ParamVector{std::exp(z[0]), z[1]};
  };
  const LogDensity lp = [&](const Eigen::VectorXd& z) {
    if (!z.allFinite()) return -kInf;
    const ParamVector p = to_params(z);
    const double prior = mdi_log_prior(fam, p);
    if (!std::isfinite(prior)) return -kInf;
    const double ll = loglik(spec, p, recs);
    if (!std::isfinite(ll)) return -kInf;
    double jac = z[0];
    if (fam == Family::gompertz) jac += z[1];
    return ll + prior + jac;
  };

  RouOptions opts;
  FitOptions fopts;
  fopts.information = false;
  fopts.boundary_fits = false;
  const FitResult mle = fit_mle(spec, recs, 0.0, fopts);
  const std::size_t dim = fam == Family::exponential ? 1 : 2;
  opts.start = Eigen::VectorXd(static_cast<Eigen::Index>(dim));
  opts.start[0] = std::log(mle.mle[0]);
  if (fam == Family::gompertz) opts.start[1] = std::log(std::max(mle.mle[1], 1e-3));
  if (fam == Family::gen_pareto) opts.start[1] = std::max(mle.mle[1], -0.9);
  if (!std::isfinite(lp(opts.start))) {
    opts.start[0] = std::log(std::max(1e-3, mle.mle[0]));
    if (dim == 2) opts.start[1] = fam == Family::gompertz ? std::log(0.1) : 0.0;
  }

  PosteriorSample s = rou_sample(lp, dim, n, seed, opts);
  for (auto& row : s.draws) {
    Eigen::VectorXd z = Eigen::Map<Eigen::VectorXd>(row.data(), static_cast<Eigen::Index>(dim));
    const ParamVector p = to_params(z);
    row = p.values;
  }
  s.names = param_names(spec);
  return s;
}

HazardBand posterior_hazard_band(const PosteriorSample& sample, const ModelSpec& spec,
                                 std::span<const double> t_grid, double level) {
  HazardBand band;
  band.level = level;
  band.t.assign(t_grid.begin(), t_grid.end());
  if (sample.draws.empty()) throw std::invalid_argument("hazard band needs at least one draw");
  std::vector<Model> models;
  models.reserve(sample.draws.size());
  for (const auto& row : sample.draws) models.emplace_back(spec, ParamVector(row));
  const double plo = 0.5 * (1.0 - level), phi = 1.0 - plo;
  std::vector<double> hz(models.size());
  for (double t : t_grid) {
    bool flagged = false;
    for (std::size_t k = 0; k < models.size(); ++k) {
      if (models[k].in_support(t)) {
        hz[k] = models[k].hazard(t);
      } else {
        hz[k] = kInf;
        flagged = true;
      }
    }
    std::vector<double> sorted = hz;
    std::sort(sorted.begin(), sorted.end());
    band.median.push_back(sample_quantile_sorted(sorted, 0.5));
    band.lo.push_back(sample_quantile_sorted(sorted, plo));
    band.hi.push_back(sample_quantile_sorted(sorted, phi));
    band.beyond_support.push_back(flagged);
  }
  return band;
}

}  // namespace longtail
