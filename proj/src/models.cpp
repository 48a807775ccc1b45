#include "longtail/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace longtail {

namespace {

// Gompertz cumulative hazard (e^{beta t/sigma} - 1)/beta with a series
// branch for small beta t / sigma.
double gompertz_cumh(double t, double sigma, double beta) {
  const double x = beta * t / sigma;
  if (std::abs(x) < 1e-5) return (t / sigma) * (1.0 + x / 2.0 + x * x / 6.0);
  return std::expm1(x) / beta;
}

double gompertz_inv_cumh(double h, double sigma, double beta) {
  const double y = beta * h;
  if (std::abs(y) < 1e-5) return sigma * h * (1.0 - y / 2.0 + y * y / 3.0);
  return sigma * std::log1p(y) / beta;
}

// GP-type transform: H = log1p(xi z)/xi (z for xi = 0); +inf off support.
double gp_cumh_of(double z, double xi) {
  if (xi == 0.0) return z;
  const double arg = xi * z;
  if (arg <= -1.0) return kInf;
  return std::log1p(arg) / xi;
}

// Inverse of gp_cumh_of: z = expm1(xi h)/xi.
double gp_inv_of(double h, double xi) {
  if (xi == 0.0) return h;
  if (std::isinf(h)) return xi < 0.0 ? -1.0 / xi : kInf;
  return std::expm1(xi * h) / xi;
}

double log_diff_exp_neg(double h_lo, double h_hi) {
  // log(exp(-h_lo) - exp(-h_hi)) for h_lo <= h_hi.
  if (!(h_hi > h_lo)) return -kInf;
  if (std::isinf(h_lo)) return -kInf;
  if (std::isinf(h_hi)) return -h_lo;
  return -h_lo + std::log(-std::expm1(-(h_hi - h_lo)));
}

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::exponential: return "exponential";
    case Family::gompertz: return "gompertz";
    case Family::gompertz_makeham: return "gompertz_makeham";
    case Family::logistic_beard: return "logistic_beard";
    case Family::gen_pareto: return "gen_pareto";
    case Family::ext_gp: return "ext_gp";
    case Family::weibull_gp: return "weibull_gp";
    case Family::piecewise_gp: return "piecewise_gp";
    case Family::gev: return "gev";
  }
  return "?";
}

Family family_from_string(std::string_view s) {
  for (auto f : {Family::exponential, Family::gompertz, Family::gompertz_makeham,
                 Family::logistic_beard, Family::gen_pareto, Family::ext_gp, Family::weibull_gp,
                 Family::piecewise_gp, Family::gev}) {
    if (to_string(f) == s) return f;
  }
  throw std::invalid_argument("unknown family '" + std::string(s) + "'");
}

std::vector<std::string> param_names(const ModelSpec& spec) {
  switch (spec.family) {
    case Family::exponential: return {"sigma"};
    case Family::gompertz: return {"sigma", "beta"};
    case Family::gompertz_makeham: return {"sigma", "beta", "lambda"};
    case Family::logistic_beard: return {"lambda", "A", "B", "gamma"};
    case Family::gen_pareto: return {"sigma", "xi"};
    case Family::ext_gp: return {"sigma", "beta", "xi"};
    case Family::weibull_gp: return {"sigma", "beta", "xi"};
    case Family::piecewise_gp: {
      std::vector<std::string> n{"sigma1"};
      for (std::size_t k = 0; k < spec.pieces.size(); ++k) n.push_back("xi" + std::to_string(k + 1));
      return n;
    }
    case Family::gev: return {"eta", "tau", "xi"};
  }
  return {};
}

std::size_t param_count(const ModelSpec& spec) { return param_names(spec).size(); }

std::optional<std::string> constraint_violation(const ModelSpec& spec, const ParamVector& p) {
  if (p.size() != param_count(spec)) {
    return "expected " + std::to_string(param_count(spec)) + " parameters for " +
           std::string(to_string(spec.family));
  }
  for (double v : p.values) {
    if (!std::isfinite(v)) return "parameters must be finite";
  }
  auto positive = [&](std::size_t i) -> std::optional<std::string> {
    if (!(p[i] > 0.0)) return param_names(spec)[i] + " must be positive";
    return std::nullopt;
  };
  auto nonneg = [&](std::size_t i) -> std::optional<std::string> {
    if (!(p[i] >= 0.0)) return param_names(spec)[i] + " must be nonnegative";
    return std::nullopt;
  };
  std::optional<std::string> r;
  switch (spec.family) {
    case Family::exponential:
    case Family::gen_pareto: return positive(0);
    case Family::gompertz:
      if ((r = positive(0))) return r;
      return nonneg(1);
    case Family::gompertz_makeham:
      if ((r = positive(0)) || (r = nonneg(1))) return r;
      return nonneg(2);
    case Family::logistic_beard:
      if ((r = nonneg(0)) || (r = positive(1)) || (r = nonneg(2))) return r;
      return positive(3);
    case Family::ext_gp:
      if ((r = positive(0))) return r;
      return nonneg(1);
    case Family::weibull_gp:
      if ((r = positive(0))) return r;
      return positive(1);
    case Family::gev: return positive(1);
    case Family::piecewise_gp: {
      if (spec.pieces.empty() || spec.pieces.front() != 0.0) {
        return "piecewise breakpoints must start at 0";
      }
      for (std::size_t k = 1; k < spec.pieces.size(); ++k) {
        if (!(spec.pieces[k] > spec.pieces[k - 1])) return "piecewise breakpoints must increase";
      }
      double s = p[0];
      if (!(s > 0.0)) return "sigma1 must be positive";
      for (std::size_t k = 1; k < spec.pieces.size(); ++k) {
        s += p[k] * (spec.pieces[k] - spec.pieces[k - 1]);
        if (!(s > 0.0)) return "implied scale sigma" + std::to_string(k + 1) + " is not positive";
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

Model::Model(ModelSpec spec, ParamVector params) : spec_(std::move(spec)), params_(std::move(params)) {
  if (auto why = constraint_violation(spec_, params_)) throw std::invalid_argument(*why);
  if (spec_.family == Family::piecewise_gp) {
    const std::size_t K = spec_.pieces.size();
    piece_sigma_.resize(K);
    piece_cumh_.resize(K);
    piece_sigma_[0] = params_[0];
    piece_cumh_[0] = 0.0;
    for (std::size_t k = 1; k < K; ++k) {
      const double width = spec_.pieces[k] - spec_.pieces[k - 1];
      piece_sigma_[k] = piece_sigma_[k - 1] + params_[k] * width;
      piece_cumh_[k] = piece_cumh_[k - 1] + gp_piece_cum_hazard(k - 1, width);
    }
  }
}

double Model::piece_sigma(std::size_t k) const { return piece_sigma_[k]; }

double Model::gp_piece_cum_hazard(std::size_t k, double s) const {
  return gp_cumh_of(s / piece_sigma_[k], params_[k + 1]);
}

std::size_t Model::piece_index(double t) const {
  const auto it = std::upper_bound(spec_.pieces.begin(), spec_.pieces.end(), t);
  return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - spec_.pieces.begin() - 1));
}

double Model::support_lower() const {
  if (spec_.family == Family::gev) {
    const double eta = params_[0], tau = params_[1], xi = params_[2];
    return xi > 0.0 ? eta - tau / xi : -kInf;
  }
  return 0.0;
}

double Model::support_upper() const {
  const auto& p = params_;
  switch (spec_.family) {
    case Family::gen_pareto: return p[1] < 0.0 ? -p[0] / p[1] : kInf;
    case Family::ext_gp: {
      const double sigma = p[0], beta = p[1], xi = p[2];
      if (xi >= 0.0) return kInf;
      if (beta == 0.0) return -sigma / xi;
      return sigma * std::log1p(-beta / xi) / beta;
    }
    case Family::weibull_gp: {
      const double sigma = p[0], beta = p[1], xi = p[2];
      if (xi >= 0.0) return kInf;
      return sigma * std::pow(-1.0 / xi, 1.0 / beta);
    }
    case Family::piecewise_gp: {
      const std::size_t K = spec_.pieces.size();
      const double xi = p[K];
      return xi < 0.0 ? spec_.pieces[K - 1] - piece_sigma_[K - 1] / xi : kInf;
    }
    case Family::gev: return p[2] < 0.0 ? p[0] - p[1] / p[2] : kInf;
    default: return kInf;
  }
}

bool Model::in_support(double t) const {
  if (std::isnan(t)) return false;
  const double lo = support_lower();
  if (spec_.family == Family::gev) return t > lo && t < support_upper();
  return t >= lo && t < support_upper();
}

double Model::cum_hazard(double t) const {
  const auto& p = params_;
  if (spec_.family != Family::gev && t <= 0.0) return 0.0;
  switch (spec_.family) {
    case Family::exponential: return t / p[0];
    case Family::gompertz: return gompertz_cumh(t, p[0], p[1]);
    case Family::gompertz_makeham: return p[2] * t + gompertz_cumh(t, p[0], p[1]);
    case Family::logistic_beard: {
      const double lambda = p[0], A = p[1], B = p[2], gamma = p[3];
      const double x = gamma * t;
      double integral;  // int_0^t e^{gamma s}/(1 + B e^{gamma s}) ds
      if (B == 0.0) {
        integral = std::expm1(x) / gamma;
      } else if (x > 30.0) {
        integral = (x + std::log(B + std::exp(-x)) - std::log1p(B)) / (B * gamma);
      } else {
        integral = std::log1p(B * std::expm1(x) / (1.0 + B)) / (B * gamma);
      }
      return lambda * t + A * integral;
    }
    case Family::gen_pareto: return gp_cumh_of(t / p[0], p[1]);
    case Family::ext_gp: return gp_cumh_of(gompertz_cumh(t, p[0], p[1]), p[2]);
    case Family::weibull_gp: return gp_cumh_of(std::pow(t / p[0], p[1]), p[2]);
    case Family::piecewise_gp: {
      const std::size_t k = piece_index(t);
      return piece_cumh_[k] + gp_piece_cum_hazard(k, t - spec_.pieces[k]);
    }
    case Family::gev: {
      const double eta = p[0], tau = p[1], xi = p[2];
      const double z = (t - eta) / tau;
      double y;  // -log G(t)
      if (xi == 0.0) {
        y = std::exp(-z);
      } else {
        const double arg = 1.0 + xi * z;
        if (arg <= 0.0) return xi > 0.0 ? 0.0 : kInf;
        y = std::exp(-std::log(arg) / xi);
      }
      return -std::log(-std::expm1(-y));
    }
  }
  return kNaN;
}

double Model::log_hazard(double t) const {
  const auto& p = params_;
  if (!in_support(t)) return -kInf;
  switch (spec_.family) {
    case Family::exponential: return -std::log(p[0]);
    case Family::gompertz: return p[1] * t / p[0] - std::log(p[0]);
    case Family::gompertz_makeham: {
      const double x = p[1] * t / p[0];
      return x - std::log(p[0]) + std::log1p(p[2] * p[0] * std::exp(-x));
    }
    case Family::logistic_beard: {
      const double lambda = p[0], A = p[1], B = p[2], gamma = p[3];
      return std::log(lambda + A / (std::exp(-gamma * t) + B));
    }
    case Family::gen_pareto: return -std::log(p[0] + p[1] * t);
    case Family::ext_gp: {
      const double sigma = p[0], beta = p[1], xi = p[2];
      const double g = gompertz_cumh(t, sigma, beta);
      return beta * t / sigma - std::log(sigma) - std::log1p(xi * g);
    }
    case Family::weibull_gp: {
      const double sigma = p[0], beta = p[1], xi = p[2];
      const double w = t / sigma;
      return std::log(beta / sigma) + (beta - 1.0) * std::log(w) - std::log1p(xi * std::pow(w, beta));
    }
    case Family::piecewise_gp: {
      const std::size_t k = piece_index(t);
      return -std::log(piece_sigma_[k] + p[k + 1] * (t - spec_.pieces[k]));
    }
    case Family::gev: {
      const double eta = p[0], tau = p[1], xi = p[2];
      const double z = (t - eta) / tau;
      const double log_y = xi == 0.0 ? -z : -std::log1p(xi * z) / xi;
      const double y = std::exp(log_y);
      // density (1/tau) y^{1+xi} e^{-y} over survivor 1 - e^{-y}
      return -std::log(tau) + (1.0 + xi) * log_y - y - std::log(-std::expm1(-y));
    }
  }
  return kNaN;
}

double Model::survivor(double t) const { return std::exp(-cum_hazard(t)); }

double Model::log_density(double t) const {
  const double lh = log_hazard(t);
  const double ch = cum_hazard(t);
  if (lh == -kInf || ch == kInf) return -kInf;
  return lh - ch;
}

double Model::log_prob(double lo, double hi) const {
  return log_diff_exp_neg(cum_hazard(lo), cum_hazard(hi));
}

double Model::log_prob(const IntervalSet& set) const {
  double acc = -kInf;
  for (const auto& iv : set.parts()) acc = log_sum_exp(acc, log_prob(iv.lo, iv.hi));
  return acc;
}

double Model::hazard(double t) const {
  if (!in_support(t)) throw std::domain_error("t outside the support of " + std::string(to_string(spec_.family)));
  return std::exp(log_hazard(t));
}

double Model::density(double t) const {
  if (!in_support(t)) throw std::domain_error("t outside the support of " + std::string(to_string(spec_.family)));
  return std::exp(log_density(t));
}

double Model::inv_cum_hazard(double h) const {
  const auto& p = params_;
  if (h <= 0.0) return std::max(0.0, support_lower()) == 0.0 && spec_.family != Family::gev ? 0.0 : support_lower();
  if (std::isinf(h)) return support_upper();
  switch (spec_.family) {
    case Family::exponential: return p[0] * h;
    case Family::gompertz: return gompertz_inv_cumh(h, p[0], p[1]);
    case Family::gen_pareto: return p[0] * gp_inv_of(h, p[1]);
    case Family::ext_gp: return gompertz_inv_cumh(gp_inv_of(h, p[2]), p[0], p[1]);
    case Family::weibull_gp: return p[0] * std::pow(gp_inv_of(h, p[2]), 1.0 / p[1]);
    case Family::piecewise_gp: {
      const auto it = std::upper_bound(piece_cumh_.begin(), piece_cumh_.end(), h);
      const std::size_t k = static_cast<std::size_t>(it - piece_cumh_.begin() - 1);
      return spec_.pieces[k] + piece_sigma_[k] * gp_inv_of(h - piece_cumh_[k], p[k + 1]);
    }
    case Family::gev: {
      const double eta = p[0], tau = p[1], xi = p[2];
      const double y = -std::log(-std::expm1(-h));  // -log G
      const double z = xi == 0.0 ? -std::log(y) : std::expm1(-xi * std::log(y)) / xi;
      return eta + tau * z;
    }
    case Family::gompertz_makeham:
    case Family::logistic_beard: return invert_numerically(h);
  }
  return kNaN;
}

// Safeguarded Newton on H(t) = h; H is increasing with derivative e^{log h}.
double Model::invert_numerically(double h) const {
  double lo = 0.0, hi = 1.0;
  while (cum_hazard(hi) < h) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return kInf;
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = cum_hazard(t) - h;
    if (f == 0.0) return t;
    if (f > 0.0) hi = t; else lo = t;
    const double step = f / std::exp(log_hazard(t));
    double next = t - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * std::max(1.0, std::abs(t)) || hi - lo <= 1e-15 * hi) {
      return next;
    }
    t = next;
  }
  return t;
}

double Model::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile requires p in (0, 1)");
  return inv_cum_hazard(-std::log1p(-p));
}

double Model::penultimate_shape(double u) const {
  const auto& p = params_;
  if (!in_support(u) || (spec_.family != Family::gev && u < 0.0)) {
    throw std::domain_error("penultimate shape requires u inside the support");
  }
  switch (spec_.family) {
    case Family::exponential: return 0.0;
    case Family::gompertz:
    case Family::gompertz_makeham: {
      const double sigma = p[0], beta = p[1];
      const double lambda = spec_.family == Family::gompertz ? 0.0 : p[2];
      const double e = std::exp(-beta * u / sigma);
      const double d = 1.0 + lambda * sigma * e;
      return -beta * e / (d * d);
    }
    case Family::gen_pareto: return p[1];
    case Family::ext_gp: return (p[2] - p[1]) * std::exp(-p[1] * u / p[0]);
    case Family::weibull_gp: {
      if (!(u > 0.0)) throw std::domain_error("weibull_gp penultimate shape requires u > 0");
      const double sigma = p[0], beta = p[1], xi = p[2];
      const double w = std::pow(u / sigma, beta);
      return (xi * w - beta + 1.0) / (beta * w);
    }
    case Family::piecewise_gp: return p[piece_index(u) + 1];
    case Family::logistic_beard:
    case Family::gev: {
      const double step = 1e-5 * std::max(1.0, std::abs(u));
      const double lo = spec_.family == Family::gev ? u - step : std::max(0.0, u - step);
      const double hi = u + step;
      return (std::exp(-log_hazard(hi)) - std::exp(-log_hazard(lo))) / (hi - lo);
    }
  }
  return kNaN;
}

double Model::draw(Rng& rng) const {
  if (spec_.family == Family::piecewise_gp) {
    // Pick the piece with probability p_k - p_{k+1}, then draw the truncated
    // GP inside it.
    const std::size_t K = spec_.pieces.size();
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double s_lo = std::exp(-piece_cumh_[k]);
      const double s_hi = k + 1 < K ? std::exp(-piece_cumh_[k + 1]) : 0.0;
      cum += s_lo - s_hi;
      if (u <= cum || k + 1 == K) {
        const double width = k + 1 < K ? spec_.pieces[k + 1] - spec_.pieces[k] : kInf;
        const double d = k + 1 < K ? gp_piece_cum_hazard(k, width) : kInf;
        const double frac = -std::expm1(-d);
        const double e = -std::log1p(-rng.uniform() * frac);
        return spec_.pieces[k] + piece_sigma_[k] * gp_inv_of(e, params_[k + 1]);
      }
    }
  }
  return inv_cum_hazard(rng.exponential());
}

double Model::draw(Rng& rng, const IntervalSet& truncation) const {
  const auto& parts = truncation.parts();
  std::vector<double> logw(parts.size());
  double total = -kInf;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    logw[i] = log_prob(parts[i].lo, parts[i].hi);
    total = log_sum_exp(total, logw[i]);
  }
  if (!(total > std::log(1e-12))) {
    throw std::domain_error("truncation set has probability below 1e-12 under the model");
  }
  std::size_t pick = parts.size() - 1;
  if (parts.size() > 1) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      cum += std::exp(logw[i] - total);
      if (u <= cum) {
        pick = i;
        break;
      }
    }
  }
  const Interval iv = parts[pick];
  const double h_lo = cum_hazard(iv.lo);
  const double d = cum_hazard(iv.hi) - h_lo;
  const double frac = std::isinf(d) ? 1.0 : -std::expm1(-d);
  const double e = -std::log1p(-rng.uniform() * frac);
  const double t = inv_cum_hazard(h_lo + e);
  return std::clamp(t, iv.lo, iv.hi);
}

// ---------------------------------------------------------------------------

double hazard(const ModelSpec& spec, const ParamVector& params, double t) {
  return Model(spec, params).hazard(t);
}

double survivor(const ModelSpec& spec, const ParamVector& params, double t) {
  return Model(spec, params).survivor(t);
}

double density(const ModelSpec& spec, const ParamVector& params, double t) {
  return Model(spec, params).density(t);
}

double quantile(const ModelSpec& spec, const ParamVector& params, double p) {
  return Model(spec, params).quantile(p);
}

double penultimate_shape(const ModelSpec& spec, const ParamVector& params, double u) {
  return Model(spec, params).penultimate_shape(u);
}

std::vector<double> sample(const Model& model, std::size_t n, Rng& rng, const IntervalSet* truncation) {
  std::vector<double> out;
  out.reserve(n);
  if (truncation) {
    // Fail early on a negligible set even when n == 0.
    if (!(model.log_prob(*truncation) > std::log(1e-12))) {
      throw std::domain_error("truncation set has probability below 1e-12 under the model");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(truncation ? model.draw(rng, *truncation) : model.draw(rng));
  }
  return out;
}

std::vector<double> sample(const ModelSpec& spec, const ParamVector& params, std::size_t n,
                           std::uint64_t seed, const IntervalSet* truncation) {
  Rng rng(seed);
  return sample(Model(spec, params), n, rng, truncation);
}

double gp_endpoint(double u, double sigma, double xi) {
  if (xi >= 0.0) return kInf;
  return u - sigma / xi;
}

double gp_threshold_rescale(double sigma, double xi, double v) {
  const double s = sigma + xi * v;
  if (!(s > 0.0)) throw std::domain_error("v beyond support");
  return s;
}

GevParams gev_rescale(double eta, double tau, double xi, double n_blocks) {
  if (!(n_blocks > 0.0) || !(tau > 0.0)) {
    throw std::invalid_argument("gev_rescale requires N > 0 and tau > 0");
  }
  const double logn = std::log(n_blocks);
  if (xi == 0.0) return {eta + tau * logn, tau, 0.0};
  return {eta + tau * std::expm1(xi * logn) / xi, tau * std::exp(xi * logn), xi};
}

}  // namespace longtail
