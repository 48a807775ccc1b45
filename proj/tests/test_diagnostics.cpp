#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "longtail/diagnostics.hpp"
#include "longtail/stats.hpp"

using namespace longtail;

namespace {

const ModelSpec kExp = ModelSpec::of(Family::exponential);

std::vector<LifetimeRecord> truncated_exp(std::size_t n, double sigma, std::uint64_t seed) {
  const Model law(kExp, {sigma});
  Rng rng(seed);
  std::vector<LifetimeRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 2.0);
    const IntervalSet tr{Interval{a, a + rng.uniform(0.5, 3.0)}};
    out.push_back(LifetimeRecord::observed(law.draw(rng, tr), tr));
  }
  return out;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("without truncation both strategies give classical positions") {
  const Model F0(kExp, {1.3});
  Rng rng(1);
  std::vector<LifetimeRecord> recs;
  for (int i = 0; i < 250; ++i) recs.push_back(LifetimeRecord::observed(1.1 * rng.exponential()));
  const NPEstimate Fn = np_estimate_auto(recs);
  const QQData a = qq_positions_truncated(recs, F0, Fn, QQStrategy::transformed);
  const QQData b = qq_positions_truncated(recs, F0, Fn, QQStrategy::adjusted);
  REQUIRE(a.points.size() == 250);
  REQUIRE(b.points.size() == 250);
  std::vector<double> sorted;
  for (const auto& r : recs) sorted.push_back(r.time);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 250; ++i) {
    const double y = recs[i].time;
    const auto rank = static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), y) - sorted.begin() + 1);
    const double classical = F0.quantile(rank / 251.0);
    CHECK(a.points[i].y == y);
    CHECK(b.points[i].y == y);
    CHECK(a.points[i].x == doctest::Approx(classical).epsilon(1e-12));
    CHECK(b.points[i].x == doctest::Approx(classical).epsilon(1e-12));
    CHECK(a.points[i].x == doctest::Approx(b.points[i].x).epsilon(1e-12));
  }
  CHECK(to_string(QQStrategy::adjusted) == "adjusted");
  CHECK(qq_strategy_from_string("A") == QQStrategy::transformed);
  CHECK(qq_strategy_from_string("B") == QQStrategy::adjusted);
}

TEST_CASE("adjusted positions under interval truncation are not monotone") {
  const auto recs = truncated_exp(300, 1.4, 2);
  const Model F0(kExp, {1.4});
  const QQData q = qq_positions_truncated(recs, F0, np_estimate_auto(recs), QQStrategy::adjusted);
  std::vector<std::pair<double, double>> yx;
  for (const auto& p : q.points) yx.emplace_back(p.y, p.x);
  std::sort(yx.begin(), yx.end());
  bool decreasing_step = false;
  for (std::size_t k = 1; k < yx.size(); ++k) decreasing_step |= yx[k].second < yx[k - 1].second;
  CHECK(decreasing_step);
  for (const auto& p : q.points) CHECK(recs[p.record].truncation.contains(p.x));
}

TEST_CASE("transformed values under the null lie on the diagonal") {
  const auto recs = truncated_exp(10000, 1.4, 3);
  const Model F0(kExp, {1.4});
  const QQData q = qq_positions_truncated(recs, F0, NPEstimate{}, QQStrategy::transformed);
  std::vector<double> x, y;
  for (const auto& p : q.points) {
    x.push_back(p.x);
    y.push_back(p.y);
  }
  CHECK(correlation(x, y) > 0.99);
  // The transformed values follow F0 itself.
  CHECK(ks_pvalue(ks_statistic(y, [&](double t) { return F0.cdf(t); }), y.size()) > 0.001);
}

TEST_CASE("positions scale with the time unit when F0 is refitted") {
  auto recs = truncated_exp(200, 1.4, 4);
  const FitResult f1 = fit_mle(kExp, recs);
  const QQData a = qq_positions_truncated(recs, Model(kExp, f1.mle), np_estimate_auto(recs));
  const double c = 12.0;
  for (auto& r : recs) {
    r.time *= c;
    r.truncation = r.truncation.scaled(c);
  }
  const FitResult f2 = fit_mle(kExp, recs);
  const QQData b = qq_positions_truncated(recs, Model(kExp, f2.mle), np_estimate_auto(recs));
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(b.points[i].x == doctest::Approx(c * a.points[i].x).epsilon(1e-6));
  }
}

TEST_CASE("records with negligible truncation mass are skipped") {
  std::vector<LifetimeRecord> recs = truncated_exp(20, 1.0, 5);
  recs.push_back(LifetimeRecord::observed(60.0, IntervalSet{Interval{59.0, 61.0}}));
  const Model F0(kExp, {1.0});
  const QQData q = qq_positions_truncated(recs, F0, np_estimate_auto(recs));
  CHECK(q.skipped == std::vector<std::size_t>{20});
  CHECK(q.points.size() == 20);
}

TEST_CASE("bootstrap bands") {
  const auto recs = truncated_exp(120, 1.4, 6);
  const FitResult fit = fit_mle(kExp, recs);
  QQBandOptions o;
  o.B = 60;
  o.seed = 7;
  SUBCASE("level 0 collapses to the pooled median") {
    o.level = 0.0;
    const QQData q = qq_bootstrap_band(fit, recs, o);
    for (const auto& p : q.points) CHECK(p.lo == p.hi);
  }
  SUBCASE("bands are nested in the level") {
    o.level = 0.5;
    const QQData narrow = qq_bootstrap_band(fit, recs, o);
    o.level = 0.9;
    const QQData wide = qq_bootstrap_band(fit, recs, o);
    REQUIRE(narrow.points.size() == wide.points.size());
    for (std::size_t i = 0; i < wide.points.size(); ++i) {
      CHECK(wide.points[i].lo <= narrow.points[i].lo);
      CHECK(wide.points[i].hi >= narrow.points[i].hi);
      CHECK(narrow.points[i].lo <= narrow.points[i].hi);
    }
    CHECK(band_at(wide, wide.points[0].x) == std::pair{wide.points[0].lo, wide.points[0].hi});
    CHECK(wide.notes.size() >= 2);
  }
  SUBCASE("same seed, same band") {
    const QQData a = qq_bootstrap_band(fit, recs, o);
    const QQData b = qq_bootstrap_band(fit, recs, o);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i].lo == b.points[i].lo);
      CHECK(a.points[i].hi == b.points[i].hi);
    }
  }
}
