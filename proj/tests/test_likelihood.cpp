#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "longtail/likelihood.hpp"

using namespace longtail;

namespace {

const ModelSpec kExp = ModelSpec::of(Family::exponential);
const ModelSpec kGP = ModelSpec::of(Family::gen_pareto);

struct Ltrc {
  std::vector<LifetimeRecord> records;
  double closed_form = 0.0;
};

// Left-truncated, right-censored exponential sample and its closed-form MLE.
Ltrc ltrc_instance(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  const double sigma = rng.uniform(0.5, 3.0);
  Ltrc out;
  double exposure = 0.0, deaths = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 4.0);
    const double t = a + sigma * rng.exponential();
    const double c = a + rng.uniform(0.5, 3.0 * sigma);
    const IntervalSet tr{Interval{a, kInf}};
    if (t <= c) {
      out.records.push_back(LifetimeRecord::observed(t, tr));
      exposure += t - a;
      deaths += 1.0;
    } else {
      out.records.push_back(LifetimeRecord::right_censored(c, tr));
      exposure += c - a;
    }
  }
  out.closed_form = exposure / deaths;
  return out;
}

std::vector<LifetimeRecord> truncated_gp(std::size_t n, std::uint64_t seed, double sigma = 1.5, double xi = -0.1) {
  const Model law(kGP, {sigma, xi});
  Rng rng(seed);
  std::vector<LifetimeRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 2.0);
    const IntervalSet tr{Interval{a, a + rng.uniform(3.0, 8.0)}};
    out.push_back(LifetimeRecord::observed(law.draw(rng, tr), tr));
  }
  return out;
}

std::vector<LifetimeRecord> scaled(std::vector<LifetimeRecord> recs, double c) {
  for (auto& r : recs) {
    r.time *= c;
    if (std::isfinite(r.time_upper)) r.time_upper *= c;
    if (std::isfinite(r.censor_limit)) r.censor_limit *= c;
    r.truncation = r.truncation.scaled(c);
  }
  return recs;
}

}  // namespace

TEST_CASE("untruncated contributions are log densities") {
  const Model m(kGP, {1.3, -0.05});
  for (double t : {0.1, 1.0, 4.0}) {
    CHECK(record_loglik(m, LifetimeRecord::observed(t)) == doctest::Approx(m.log_density(t)).epsilon(1e-14));
    CHECK(record_loglik(m, LifetimeRecord::right_censored(t)) == doctest::Approx(-m.cum_hazard(t)).epsilon(1e-14));
  }
}

TEST_CASE("observation-scheme contributions") {
  const Model m(ModelSpec::of(Family::gompertz), {1.2, 0.3});
  SUBCASE("interval truncation") {
    const auto r = LifetimeRecord::observed(2.0, IntervalSet{Interval{1.0, 5.0}});
    CHECK(record_loglik(m, r) == doctest::Approx(m.log_density(2.0) - std::log(m.survivor(1.0) - m.survivor(5.0))));
  }
  SUBCASE("left truncation with right censoring") {
    const auto r = LifetimeRecord::right_censored(3.0, IntervalSet{Interval{1.0, kInf}});
    CHECK(record_loglik(m, r) == doctest::Approx(std::log(m.survivor(3.0) / m.survivor(1.0))));
  }
  SUBCASE("union of two truncation intervals") {
    const IntervalSet tr{Interval{0.5, 1.0}, Interval{2.0, 4.0}};
    const auto r = LifetimeRecord::observed(2.5, tr);
    const double mass = m.survivor(0.5) - m.survivor(1.0) + m.survivor(2.0) - m.survivor(4.0);
    CHECK(record_loglik(m, r) == doctest::Approx(m.log_density(2.5) - std::log(mass)));
  }
  SUBCASE("zero-probability truncation set") {
    const Model gp(kGP, {1.0, -0.5});
    std::vector<LifetimeRecord> recs{LifetimeRecord::observed(0.5),
                                     LifetimeRecord::observed(3.0, IntervalSet{Interval{2.5, 4.0}})};
    const auto e = loglik_detail(kGP, {1.0, -0.5}, recs);
    CHECK(e.value == -kInf);
    REQUIRE(e.offending.size() == 1);
    CHECK(e.offending[0] == 1);
    CHECK(record_loglik(gp, recs[0]) == doctest::Approx(gp.log_density(0.5)));
  }
  SUBCASE("constraint violations give minus infinity") {
    std::vector<LifetimeRecord> recs{LifetimeRecord::observed(1.0)};
    CHECK(loglik(kExp, {-1.0}, recs) == -kInf);
  }
}

TEST_CASE("yearly cells under right truncation match a cell-probability sum") {
  const Model law(kGP, {1.546, -0.108});
  Rng rng(3);
  std::vector<LifetimeRecord> recs;
  double brute = 0.0;
  const Model m(kGP, {1.4, -0.09});
  for (int i = 0; i < 400; ++i) {
    const double b = rng.uniform(2.0, 10.0);
    const IntervalSet tr{Interval{0.0, b}};
    const double t = law.draw(rng, tr);
    const double lo = std::floor(t), hi = std::min(lo + 1.0, b);
    recs.push_back(LifetimeRecord::interval_censored(lo, hi, tr));
    brute += std::log((m.survivor(lo) - m.survivor(hi)) / (1.0 - m.survivor(b)));
  }
  const double ll = loglik(m, recs);
  CHECK(std::isfinite(ll));
  CHECK(ll == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("left-truncated right-censored exponential MLE is closed form") {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const Ltrc inst = ltrc_instance(s, 60 + 10 * s);
    const FitResult fit = fit_mle(kExp, inst.records);
    REQUIRE(fit.converged);
    CHECK(std::abs(fit.mle[0] - inst.closed_form) <= 1e-8 * inst.closed_form);
  }
}

TEST_CASE("untruncated exponential MLE is the sample mean") {
  Rng rng(8);
  std::vector<LifetimeRecord> recs;
  double sum = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double t = 2.3 * rng.exponential();
    sum += t;
    recs.push_back(LifetimeRecord::observed(t));
  }
  const FitResult fit = fit_mle(kExp, recs);
  CHECK(std::abs(fit.mle[0] - sum / 500.0) <= 1e-10 * fit.mle[0]);
  REQUIRE(fit.std_errors.size() == 1);
  CHECK(fit.std_errors[0] == doctest::Approx(fit.mle[0] / std::sqrt(500.0)).epsilon(1e-4));
}

TEST_CASE("log-likelihood is invariant to ordering and splitting") {
  auto recs = truncated_gp(300, 4);
  const ParamVector p{1.4, -0.07};
  const double whole = loglik(kGP, p, recs);
  const std::span<const LifetimeRecord> all(recs);
  CHECK(loglik(kGP, p, all.first(120)) + loglik(kGP, p, all.subspan(120)) == doctest::Approx(whole).epsilon(1e-13));
  Rng rng(2);
  std::shuffle(recs.begin(), recs.end(), rng);
  CHECK(loglik(kGP, p, recs) == doctest::Approx(whole).epsilon(1e-13));
}

TEST_CASE("fits are equivariant under a change of time unit") {
  const auto recs = truncated_gp(400, 6);
  const double c = kDaysPerYear;
  const auto days = scaled(recs, c);
  const FitResult a = fit_mle(kGP, recs);
  const FitResult b = fit_mle(kGP, days);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK(b.mle[0] == doctest::Approx(c * a.mle[0]).epsilon(1e-6));
  CHECK(b.mle[1] == doctest::Approx(a.mle[1]).epsilon(1e-6));
  const TestResult ta = lrt_nested(kExp, kGP, recs);
  const TestResult tb = lrt_nested(kExp, kGP, days);
  CHECK(tb.statistic == doctest::Approx(ta.statistic).epsilon(1e-6));
  CHECK(tb.p_asymptotic == doctest::Approx(ta.p_asymptotic).epsilon(1e-6));
  const FitResult ga = fit_mle(ModelSpec::of(Family::gompertz), recs);
  const FitResult gb = fit_mle(ModelSpec::of(Family::gompertz), days);
  CHECK(gb.mle[0] == doctest::Approx(c * ga.mle[0]).epsilon(1e-6));
  CHECK(gb.mle[1] == doctest::Approx(ga.mle[1]).epsilon(1e-5));
}

TEST_CASE("threshold handling") {
  std::vector<LifetimeRecord> recs{
      LifetimeRecord::observed(0.5, IntervalSet{Interval{0.0, 5.0}}),
      LifetimeRecord::observed(1.0, IntervalSet{Interval{0.0, 5.0}}),  // tie at the threshold
      LifetimeRecord::observed(2.5, IntervalSet{Interval{0.2, 5.0}}),
      LifetimeRecord::observed(3.5, IntervalSet{Interval{1.5, 6.0}}),
      LifetimeRecord::right_censored(0.8, IntervalSet{Interval{0.0, kInf}}),
      LifetimeRecord::right_censored(4.0, IntervalSet{Interval{0.0, kInf}}),
      LifetimeRecord::interval_censored(0.5, 1.5, IntervalSet{Interval{0.0, 5.0}}),
  };
  const ThresholdedData d = above_threshold(recs, 1.0);
  CHECK(d.n_ties == 1);
  CHECK(d.records.size() == 3);
  CHECK(d.n_straddle == 1);
  CHECK(d.records[0].time == doctest::Approx(1.5));
  CHECK(d.records[0].truncation.parts()[0] == Interval{0.0, 4.0});
  CHECK(d.records[1].truncation.parts()[0] == Interval{0.5, 5.0});
  CHECK(d.records[2].censoring == Censoring::right_censored);
  CHECK(d.records[2].time == doctest::Approx(3.0));
  CHECK_THROWS_AS(fit_mle(kExp, std::span<const LifetimeRecord>(recs).first(2), 0.0), DataError);
}

TEST_CASE("GP fit is consistent on a large untruncated sample") {
  const auto x = sample(kGP, {1.5, -0.1}, 100000, 12);
  std::vector<LifetimeRecord> recs;
  recs.reserve(x.size());
  for (double t : x) recs.push_back(LifetimeRecord::observed(t));
  const FitResult fit = fit_mle(kGP, recs);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.mle[0] - 1.5) < 3.0 * fit.std_errors[0]);
  CHECK(std::abs(fit.mle[1] + 0.1) < 3.0 * fit.std_errors[1]);
  CHECK(fit.gradient_norm < 1e-4 * std::max(1.0, std::abs(fit.loglik)));
}

TEST_CASE("threshold scan reports one fit per threshold") {
  const auto recs = truncated_gp(500, 13);
  const std::vector<double> us{0.0, 0.5, 1.0};
  const auto scan = threshold_scan(kGP, recs, us);
  REQUIRE(scan.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(scan[k].threshold == us[k]);
  CHECK(scan[0].n_used > scan[2].n_used);
  // Threshold stability: the shape should not move much when the law is GP.
  CHECK(std::abs(scan[0].mle[1] - scan[2].mle[1]) < 0.3);
}

TEST_CASE("boundary fits are flagged") {
  // Exponential data fitted by Gompertz usually sit at beta = 0.
  Rng rng(14);
  std::vector<LifetimeRecord> recs;
  for (int i = 0; i < 200; ++i) recs.push_back(LifetimeRecord::observed(2.0 * rng.exponential()));
  const FitResult g = fit_mle(ModelSpec::of(Family::gompertz), recs);
  const FitResult e = fit_mle(kExp, recs);
  CHECK(g.loglik >= e.loglik - 1e-8);
  if (g.at_boundary) {
    CHECK(g.boundary_params == std::vector<std::string>{"beta"});
    CHECK(g.loglik == doctest::Approx(e.loglik).epsilon(1e-9));
  }
}
