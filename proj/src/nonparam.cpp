#include "longtail/nonparam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "longtail/parallel.hpp"

namespace longtail {

double NPEstimate::survivor_at(double t) const {
  const auto it = std::upper_bound(support.begin(), support.end(), t);
  if (it == support.begin()) return 1.0;
  return survivor[static_cast<std::size_t>(it - support.begin() - 1)];
}

// ---------------------------------------------------------------------------
// Product-limit

NPEstimate kaplan_meier(std::span<const LifetimeRecord> records) {
  std::vector<double> entry, exit;
  std::vector<bool> died;
  for (const auto& r : records) {
    if (r.censoring == Censoring::interval_censored) {
      throw std::invalid_argument("kaplan_meier does not accept interval-censored records");
    }
    if (r.truncation.size() != 1 || std::isfinite(r.truncation.upper())) {
      throw std::invalid_argument("kaplan_meier needs truncation sets of the form [a, inf)");
    }
    entry.push_back(r.truncation.lower());
    exit.push_back(r.time);
    died.push_back(r.censoring == Censoring::observed);
  }
  std::vector<double> times;
  for (std::size_t i = 0; i < exit.size(); ++i) {
    if (died[i]) times.push_back(exit[i]);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  NPEstimate est;
  est.method = "kaplan_meier";
  double S = 1.0, H = 0.0, green = 0.0;
  for (double t : times) {
    double r = 0.0, d = 0.0;
    for (std::size_t i = 0; i < exit.size(); ++i) {
      if (entry[i] < t && t <= exit[i]) ++r;
      if (died[i] && exit[i] == t) ++d;
    }
    if (r == 0.0) {
      // Nobody at risk: the estimate cannot continue past this point.
      est.mass_deficit = true;
      break;
    }
    const double h = d / r;
    est.support.push_back(t);
    est.mass.push_back(S * h);
    S *= 1.0 - h;
    H += h;
    if (h < 1.0) green += h / (r * (1.0 - h));
    est.survivor.push_back(S);
    est.cum_hazard.push_back(H);
    est.variance.push_back(S > 0.0 ? S * S * green : 0.0);
    est.at_risk.push_back(r);
    est.events.push_back(d);
  }
  est.deficit = S;
  if (S > 1e-12) est.mass_deficit = true;
  est.interior.assign(est.support.size(), true);
  return est;
}

// ---------------------------------------------------------------------------
// Turnbull EM

std::vector<double> turnbull_support(std::span<const LifetimeRecord> records) {
  std::vector<double> s;
  for (const auto& r : records) {
    switch (r.censoring) {
      case Censoring::observed:
      case Censoring::interval_censored: s.push_back(r.time); break;
      case Censoring::right_censored: s.push_back(r.time + 1e-6 * std::max(1.0, std::abs(r.time))); break;
    }
  }
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

namespace {

// Support indices with lo <= s < hi (closed_hi: lo <= s <= hi).
std::pair<std::size_t, std::size_t> index_range(std::span<const double> s, double lo, double hi,
                                                bool closed_lo, bool closed_hi) {
  const auto b = closed_lo ? std::lower_bound(s.begin(), s.end(), lo)
                           : std::upper_bound(s.begin(), s.end(), lo);
  const auto e = closed_hi ? std::upper_bound(s.begin(), s.end(), hi)
                           : std::lower_bound(s.begin(), s.end(), hi);
  const auto bi = static_cast<std::size_t>(b - s.begin());
  const auto ei = static_cast<std::size_t>(std::max(b, e) - s.begin());
  return {bi, ei};
}

bool covered(std::size_t j, const std::vector<std::pair<std::size_t, std::size_t>>& ranges,
             std::size_t from, std::size_t to) {
  for (std::size_t k = from; k < to; ++k) {
    if (ranges[k].first <= j && j < ranges[k].second) return true;
  }
  return false;
}

}  // namespace

IndexedData index_records(std::span<const LifetimeRecord> records, std::span<const double> support) {
  if (!std::is_sorted(support.begin(), support.end()) ||
      std::adjacent_find(support.begin(), support.end()) != support.end()) {
    throw std::invalid_argument("support must be strictly increasing");
  }
  IndexedData d;
  d.J = support.size();
  d.c_offset.push_back(0);
  d.t_offset.push_back(0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string who = "record " + std::to_string(i) + (r.id.empty() ? "" : " (" + r.id + ")");
    const std::size_t t_from = d.t_ranges.size();
    for (const auto& iv : r.truncation.parts()) {
      const auto rg = index_range(support, iv.lo, iv.hi, true, true);
      if (rg.first < rg.second) d.t_ranges.push_back(rg);
    }
    switch (r.censoring) {
      case Censoring::observed: {
        const auto it = std::lower_bound(support.begin(), support.end(),
                                         r.time - 1e-12 * std::max(1.0, std::abs(r.time)));
        if (it == support.end() || std::abs(*it - r.time) > 1e-12 * std::max(1.0, std::abs(r.time))) {
          throw DataError(who + ": observed time is not a support point");
        }
        const auto j = static_cast<std::size_t>(it - support.begin());
        d.c_ranges.emplace_back(j, j + 1);
        break;
      }
      case Censoring::right_censored:
        d.c_ranges.push_back(index_range(support, r.time, kInf, false, false));
        break;
      case Censoring::interval_censored:
        d.c_ranges.push_back(index_range(support, r.time, r.time_upper, true, false));
        break;
    }
    if (d.c_ranges.back().first >= d.c_ranges.back().second) {
      throw DataError(who + ": censoring set contains no support point");
    }
    for (std::size_t j = d.c_ranges.back().first; j < d.c_ranges.back().second; ++j) {
      if (!covered(j, d.t_ranges, t_from, d.t_ranges.size())) {
        throw DataError(who + ": censoring set is not inside the truncation set");
      }
    }
    d.c_offset.push_back(d.c_ranges.size());
    d.t_offset.push_back(d.t_ranges.size());
  }
  return d;
}

namespace {

constexpr double kTiny = 1e-300;

double range_sum(const std::vector<double>& prefix, std::pair<std::size_t, std::size_t> rg) {
  return prefix[rg.second] - prefix[rg.first];
}

std::vector<double> prefix_of(std::span<const double> f) {
  std::vector<double> p(f.size() + 1, 0.0);
  for (std::size_t j = 0; j < f.size(); ++j) p[j + 1] = p[j] + f[j];
  return p;
}

}  // namespace

double em_loglik(const IndexedData& d, std::span<const double> f) {
  const auto prefix = prefix_of(f);
  double ll = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double pc = 0.0, pt = 0.0;
    for (std::size_t k = d.c_offset[i]; k < d.c_offset[i + 1]; ++k) pc += range_sum(prefix, d.c_ranges[k]);
    for (std::size_t k = d.t_offset[i]; k < d.t_offset[i + 1]; ++k) pt += range_sum(prefix, d.t_ranges[k]);
    ll += std::log(pc) - std::log(pt);
  }
  return ll;
}

void em_step_serial(const IndexedData& d, std::span<const double> f, std::span<double> out) {
  const std::size_t J = d.J;
  std::vector<double> counts(J, 0.0);
  std::vector<char> in_c(J), in_t(J);
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::fill(in_c.begin(), in_c.end(), 0);
    std::fill(in_t.begin(), in_t.end(), 0);
    for (std::size_t k = d.c_offset[i]; k < d.c_offset[i + 1]; ++k) {
      for (std::size_t j = d.c_ranges[k].first; j < d.c_ranges[k].second; ++j) in_c[j] = 1;
    }
    for (std::size_t k = d.t_offset[i]; k < d.t_offset[i + 1]; ++k) {
      for (std::size_t j = d.t_ranges[k].first; j < d.t_ranges[k].second; ++j) in_t[j] = 1;
    }
    double pc = 0.0, pt = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      if (in_c[j]) pc += f[j];
      if (in_t[j]) pt += f[j];
    }
    pc = std::max(pc, kTiny);
    pt = std::max(pt, kTiny);
    // Membership probabilities plus the ghosts outside the truncation set.
    for (std::size_t j = 0; j < J; ++j) {
      if (in_c[j]) counts[j] += f[j] / pc;
      if (!in_t[j]) counts[j] += f[j] / pt;
    }
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (std::size_t j = 0; j < J; ++j) out[j] = counts[j] / total;
}

void em_step_parallel(const IndexedData& d, std::span<const double> f, std::span<double> out) {
  const std::size_t J = d.J;
  const auto prefix = prefix_of(f);
  const std::size_t n = d.size();
  std::vector<double> a(n), b(n);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static) num_threads(thread_count()) if (n > 2048)
  for (long li = 0; li < count; ++li) {
    const auto i = static_cast<std::size_t>(li);
    double pc = 0.0, pt = 0.0;
    for (std::size_t k = d.c_offset[i]; k < d.c_offset[i + 1]; ++k) pc += range_sum(prefix, d.c_ranges[k]);
    for (std::size_t k = d.t_offset[i]; k < d.t_offset[i + 1]; ++k) pt += range_sum(prefix, d.t_ranges[k]);
    a[i] = 1.0 / std::max(pc, kTiny);
    b[i] = 1.0 / std::max(pt, kTiny);
  }
  // Difference array: +a on censoring ranges, +b everywhere except the
  // truncation ranges.
  std::vector<double> diff(J + 1, 0.0);
  double ghost_all = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = d.c_offset[i]; k < d.c_offset[i + 1]; ++k) {
      diff[d.c_ranges[k].first] += a[i];
      diff[d.c_ranges[k].second] -= a[i];
    }
    ghost_all += b[i];
    for (std::size_t k = d.t_offset[i]; k < d.t_offset[i + 1]; ++k) {
      diff[d.t_ranges[k].first] -= b[i];
      diff[d.t_ranges[k].second] += b[i];
    }
  }
  double run = ghost_all, total = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    run += diff[j];
    out[j] = f[j] * std::max(run, 0.0);
    total += out[j];
  }
  for (std::size_t j = 0; j < J; ++j) out[j] /= total;
}

namespace {

void em_information(NPEstimate& est, const IndexedData& d) {
  const std::size_t J = d.J;
  const auto& f = est.mass;
  est.interior.assign(J, false);
  est.variance.assign(J, kNaN);
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < J; ++j) {
    if (f[j] > 1e-8) idx.push_back(j);
  }
  if (idx.size() < 2) {
    if (idx.size() == 1) {
      est.interior[idx[0]] = true;
      est.variance[idx[0]] = 0.0;
    }
    return;
  }
  const auto m = static_cast<Eigen::Index>(idx.size());
  // Hessian of the log-likelihood in the interior masses. Each record adds
  // a constant over products of its contiguous index ranges, accumulated as
  // rectangles in a 2-D difference array.
  const auto prefix = prefix_of(f);
  auto interior_range = [&](std::pair<std::size_t, std::size_t> r) {
    const auto lo = std::lower_bound(idx.begin(), idx.end(), r.first) - idx.begin();
    const auto hi = std::lower_bound(idx.begin(), idx.end(), r.second) - idx.begin();
    return std::pair<Eigen::Index, Eigen::Index>{lo, hi};
  };
  Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(m + 1, m + 1);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> rs;
  auto add_blocks = [&](std::size_t begin, std::size_t end,
                        const std::vector<std::pair<std::size_t, std::size_t>>& ranges, double sign) {
    double p = 0.0;
    rs.clear();
    for (std::size_t k = begin; k < end; ++k) {
      p += range_sum(prefix, ranges[k]);
      const auto r = interior_range(ranges[k]);
      if (r.first < r.second) rs.push_back(r);
    }
    const double w = sign / (p * p);
    for (const auto& [a0, a1] : rs) {
      for (const auto& [b0, b1] : rs) {
        diff(a0, b0) += w;
        diff(a0, b1) -= w;
        diff(a1, b0) -= w;
        diff(a1, b1) += w;
      }
    }
  };
  for (std::size_t i = 0; i < d.size(); ++i) {
    add_blocks(d.c_offset[i], d.c_offset[i + 1], d.c_ranges, -1.0);
    add_blocks(d.t_offset[i], d.t_offset[i + 1], d.t_ranges, 1.0);
  }
  for (Eigen::Index a = 0; a <= m; ++a) {
    for (Eigen::Index b = 1; b <= m; ++b) diff(a, b) += diff(a, b - 1);
  }
  for (Eigen::Index a = 1; a <= m; ++a) diff.row(a) += diff.row(a - 1);
  const Eigen::MatrixXd h = diff.topLeftCorner(m, m);
  // Eliminate the last interior atom through the sum constraint.
  const Eigen::Index q = m - 1;
  Eigen::MatrixXd hq(q, q);
  for (Eigen::Index a = 0; a < q; ++a) {
    for (Eigen::Index b = 0; b < q; ++b) hq(a, b) = h(a, b) - h(a, q) - h(q, b) + h(q, q);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(-hq);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) return;
  const Eigen::MatrixXd V = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
  for (Eigen::Index a = 0; a < q; ++a) {
    est.variance[idx[static_cast<std::size_t>(a)]] = V(a, a);
    est.interior[idx[static_cast<std::size_t>(a)]] = true;
  }
  est.variance[idx.back()] = V.sum();
  est.interior[idx.back()] = true;
}

}  // namespace

NPEstimate turnbull_em(std::span<const LifetimeRecord> records, std::vector<double> support,
                       const TurnbullOptions& opts) {
  if (support.empty()) support = turnbull_support(records);
  const IndexedData d = index_records(records, support);
  const std::size_t J = support.size();
  std::vector<double> f(J, 1.0 / static_cast<double>(J)), next(J);

  NPEstimate est;
  est.method = "turnbull_em";
  est.support = support;
  double ll = em_loglik(d, f);
  if (opts.keep_trace) est.loglik_trace.push_back(ll);
  est.converged = false;
  long it = 0;
  auto step = [&](const std::vector<double>& from, std::vector<double>& to) {
    if (opts.serial) {
      em_step_serial(d, from, to);
    } else {
      em_step_parallel(d, from, to);
    }
    ++it;
  };
  auto checked = [&](double before, double after) {
    if (after < before - 1e-9 * std::max(1.0, std::abs(before))) {
      throw InternalError("EM log-likelihood decreased at iteration " + std::to_string(it));
    }
  };
  auto accept = [&](std::vector<double>& g, double ll_g) {
    f.swap(g);
    ll = ll_g;
    if (opts.keep_trace) est.loglik_trace.push_back(ll);
  };
  std::vector<double> f2(J), g(J);
  while (it < opts.max_iter) {
    step(f, next);
    const double ll1 = em_loglik(d, next);
    checked(ll, ll1);
    double change = 0.0;
    for (std::size_t j = 0; j < J; ++j) change = std::max(change, std::abs(next[j] - f[j]));
    if (change < opts.tol || !opts.accelerate) {
      accept(next, ll1);
      if (change < opts.tol) {
        est.converged = true;
        break;
      }
      continue;
    }
    // Squared extrapolation (SQUAREM, S3 step length) from two EM steps,
    // kept only when it stays on the simplex and beats the plain double step.
    step(next, f2);
    const double ll2 = em_loglik(d, f2);
    checked(ll1, ll2);
    double rr = 0.0, vv = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double r = next[j] - f[j];
      const double v = f2[j] - 2.0 * next[j] + f[j];
      rr += r * r;
      vv += v * v;
    }
    const double alpha = vv > 0.0 ? std::min(-1.0, -std::sqrt(rr / vv)) : -1.0;
    bool inside = alpha < -1.0;
    for (std::size_t j = 0; j < J && inside; ++j) {
      const double r = next[j] - f[j];
      const double v = f2[j] - 2.0 * next[j] + f[j];
      g[j] = f[j] - 2.0 * alpha * r + alpha * alpha * v;
      inside = g[j] >= 0.0 && std::isfinite(g[j]);
    }
    if (inside && it < opts.max_iter) {
      step(g, next);
      const double ll3 = em_loglik(d, next);
      if (ll3 >= ll2) {
        accept(next, ll3);
        continue;
      }
    }
    accept(f2, ll2);
  }
  est.iterations = it;
  est.loglik = ll;
  est.mass = f;
  double S = 1.0, H = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const double h = S > 0.0 ? std::min(1.0, f[j] / S) : 0.0;
    S = std::max(0.0, S - f[j]);
    H += h;
    est.survivor.push_back(S);
    est.cum_hazard.push_back(H);
  }
  est.deficit = 1.0 - std::accumulate(f.begin(), f.end(), 0.0);
  em_information(est, d);
  return est;
}

}  // namespace longtail
