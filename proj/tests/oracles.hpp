// Independent reference computations shared by the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "longtail/nonparam.hpp"
#include "longtail/rng.hpp"

namespace oracle {

using longtail::IndexedData;
using longtail::Interval;
using longtail::IntervalSet;
using longtail::LifetimeRecord;

/// Global maximiser of em_loglik over the probability simplex: a full grid
/// with step 1/coarse, then pairwise mass transfers with a shrinking step.
inline std::vector<double> simplex_argmax(const IndexedData& d, int coarse = 100) {
  const std::size_t J = d.J;
  std::vector<double> best(J, 1.0 / static_cast<double>(J)), f(J);
  double best_ll = longtail::em_loglik(d, best);
  std::vector<int> k(J, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t j, int left) {
    if (j + 1 == J) {
      k[j] = left;
      for (std::size_t i = 0; i < J; ++i) f[i] = k[i] / static_cast<double>(coarse);
      const double ll = longtail::em_loglik(d, f);
      if (ll > best_ll) {
        best_ll = ll;
        best = f;
      }
      return;
    }
    for (int v = 0; v <= left; ++v) {
      k[j] = v;
      rec(j + 1, left - v);
    }
  };
  rec(0, coarse);
  for (double h = 0.5 / coarse; h > 1e-9; h *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::size_t a = 0; a < J; ++a) {
        for (std::size_t b = 0; b < J; ++b) {
          if (a == b) continue;
          const double step = std::min(h, best[a]);
          if (step <= 0.0) continue;
          f = best;
          f[a] -= step;
          f[b] += step;
          const double ll = longtail::em_loglik(d, f);
          if (ll > best_ll + 1e-15) {
            best_ll = ll;
            best = f;
            moved = true;
          }
        }
      }
    }
  }
  return best;
}

struct EmInstance {
  std::vector<double> support;
  std::vector<LifetimeRecord> records;
};

/// Small instance on atoms 1..J with mixed censoring and truncation. Every
/// atom carries one untruncated exact death, so the maximum is attained in
/// the interior of the simplex.
inline EmInstance random_em_instance(longtail::Rng& rng) {
  EmInstance in;
  const int J = rng.uniform() < 0.5 ? 3 : 4;
  for (int j = 1; j <= J; ++j) in.support.push_back(j);
  auto atom = [&](int lo, int hi) { return lo + static_cast<int>(rng.uniform() * (hi - lo + 1)); };
  auto trunc_around = [&](int lo, int hi) {
    const double a = rng.uniform() < 0.4 ? 0.0 : atom(1, lo) - 0.5;
    const double b = rng.uniform() < 0.4 ? longtail::kInf : atom(hi, J) + 0.5;
    if (rng.uniform() < 0.2 && lo >= 3) {
      return IntervalSet{Interval{0.5, 1.5}, Interval{lo - 0.5, b}};
    }
    return IntervalSet{Interval{a, b}};
  };
  for (int j = 1; j <= J; ++j) in.records.push_back(LifetimeRecord::observed(j));
  const int extra = 3 + static_cast<int>(rng.uniform() * 4);
  for (int e = 0; e < extra; ++e) {
    const double u = rng.uniform();
    if (u < 0.4) {
      const int lo = atom(1, J - 1), hi = atom(lo + 1, J);
      in.records.push_back(LifetimeRecord::interval_censored(lo, hi + 0.5, trunc_around(lo, hi)));
    } else if (u < 0.7) {
      const int c = atom(1, J - 1);
      in.records.push_back(LifetimeRecord::right_censored(c + 0.5, IntervalSet{Interval{0.0, longtail::kInf}}));
    } else {
      const int j = atom(1, J);
      in.records.push_back(LifetimeRecord::observed(j, trunc_around(j, j)));
    }
  }
  return in;
}

}  // namespace oracle
