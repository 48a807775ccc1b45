#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "longtail/likelihood.hpp"
#include "longtail/stats.hpp"

using namespace longtail;

namespace {

const ModelSpec kExp = ModelSpec::of(Family::exponential);
const ModelSpec kGom = ModelSpec::of(Family::gompertz);
const ModelSpec kGP = ModelSpec::of(Family::gen_pareto);

std::vector<LifetimeRecord> draw_records(const Model& law, std::size_t n, std::uint64_t seed, double window = 6.0) {
  Rng rng(seed);
  std::vector<LifetimeRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 2.0);
    const IntervalSet tr{Interval{a, a + window}};
    out.push_back(LifetimeRecord::observed(law.draw(rng, tr), tr));
  }
  return out;
}

}  // namespace

TEST_CASE("asymptotic p-values") {
  CHECK(lrt_pvalue(0.0, Calibration::half_chi2, 1) == 1.0);
  CHECK(lrt_pvalue(0.0, Calibration::chi2, 1) == 1.0);
  CHECK(lrt_pvalue(7.98, Calibration::half_chi2, 1) == doctest::Approx(0.002).epsilon(0.25));
  CHECK(std::round(lrt_pvalue(7.98, Calibration::half_chi2, 1) * 1000) == 2.0);
  CHECK(std::round(lrt_pvalue(7.43, Calibration::chi2, 1) * 1000) == 6.0);
  CHECK(lrt_pvalue(3.841458820694124, Calibration::chi2, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(lrt_pvalue(-1e-9, Calibration::half_chi2, 1) == 1.0);
}

TEST_CASE("nesting rules") {
  const NestedPair g = nested_pair(kExp, kGom);
  CHECK(g.calibration == Calibration::half_chi2);
  CHECK(g.df == 1.0);
  CHECK(g.embed({1.7}) == ParamVector{1.7, 0.0});
  const NestedPair p = nested_pair(kExp, kGP);
  CHECK(p.calibration == Calibration::chi2);
  CHECK(p.embed({1.7}) == ParamVector{1.7, 0.0});
  CHECK_THROWS_AS(nested_pair(kGom, kGP), std::invalid_argument);
  CHECK_THROWS_AS(nested_pair(kGP, kExp), std::invalid_argument);
}

TEST_CASE("likelihood ratio statistic") {
  const auto recs = draw_records(Model(kGP, {1.4, -0.15}), 400, 3);
  const TestResult t = lrt_nested(kExp, kGP, recs);
  CHECK(t.statistic >= 0.0);
  CHECK(t.statistic == doctest::Approx(2.0 * (t.loglik1 - t.loglik0)).epsilon(1e-12));
  CHECK(t.p_asymptotic == doctest::Approx(chi2_sf(t.statistic, 1.0)));
  CHECK(t.p_asymptotic >= 0.0);
  CHECK(t.p_asymptotic <= 1.0);
}

TEST_CASE("parametric bootstrap") {
  const auto recs = draw_records(Model(kExp, {1.4}), 150, 4);
  SUBCASE("same seed, same result; p-value formula") {
    const TestResult a = bootstrap_lrt(kExp, kGom, recs, 39, 17);
    const TestResult b = bootstrap_lrt(kExp, kGom, recs, 39, 17);
    CHECK(a.replicate_statistics == b.replicate_statistics);
    REQUIRE(a.p_bootstrap.has_value());
    CHECK(*a.p_bootstrap == *b.p_bootstrap);
    const auto exceed = std::count_if(a.replicate_statistics.begin(), a.replicate_statistics.end(),
                                      [&](double w) { return w >= a.statistic; });
    CHECK(*a.p_bootstrap == doctest::Approx((1.0 + exceed) / (1.0 + a.replicate_statistics.size())));
    CHECK(a.B == 39);
    CHECK(a.seed == 17);
    CHECK(a.calibration == Calibration::bootstrap);
    const TestResult c = bootstrap_lrt(kExp, kGom, recs, 39, 18);
    CHECK(c.replicate_statistics != a.replicate_statistics);
  }
  SUBCASE("B = 0 is degenerate") {
    const TestResult z = bootstrap_lrt(kExp, kGom, recs, 0, 1);
    CHECK(z.degenerate);
    CHECK(*z.p_bootstrap == 1.0);
  }
  SUBCASE("simulated datasets keep each record's scheme") {
    Rng rng(2);
    const auto sim = simulate_like(Model(kExp, {1.4}), recs, rng);
    REQUIRE(sim.size() == recs.size());
    for (std::size_t i = 0; i < sim.size(); ++i) {
      CHECK(sim[i].truncation == recs[i].truncation);
      CHECK(sim[i].truncation.contains(sim[i].time));
    }
  }
}

TEST_CASE("endpoint profile") {
  const auto recs = draw_records(Model(kGP, {1.546, -0.108}), 513, 5, 12.0);
  const ProfileTrace tr = profile_endpoint(recs, 0.0, 110.0, {}, {0.5, 0.95});
  const FitResult fit = fit_mle(kGP, recs);
  CHECK(tr.xi_hat == doctest::Approx(fit.mle[1]).epsilon(1e-4));
  CHECK(std::abs(tr.loglik_max - fit.loglik) < 1e-6);
  CHECK(*std::max_element(tr.values.begin(), tr.values.end()) <= tr.loglik_max + 1e-9);
  if (std::isfinite(tr.psi_hat)) {
    CHECK(tr.psi_hat == doctest::Approx(gp_endpoint(110.0, fit.mle[0], fit.mle[1])).epsilon(1e-5));
    const auto at = std::find(tr.grid.begin(), tr.grid.end(), tr.psi_hat) - tr.grid.begin();
    CHECK(std::abs(tr.values[at] - fit.loglik) < 1e-6);
  }
  REQUIRE(tr.limits.size() == 2);
  CHECK(tr.limits[1].lower <= tr.limits[0].lower);
  CHECK(tr.limits[1].upper >= tr.limits[0].upper);
  double emax = 0.0;
  for (const auto& r : recs) emax = std::max(emax, r.time);
  CHECK(tr.limits[1].lower > 110.0 + emax);

  SUBCASE("grid points at or below the sample maximum are undefined") {
    const ProfileTrace t2 = profile_endpoint(recs, 0.0, 110.0, {110.0 + emax - 0.1, 110.0 + emax + 5.0});
    CHECK(t2.values.front() == -kInf);
    CHECK(std::isfinite(t2.values.back()));
  }
  SUBCASE("positive fitted shape leaves the upper limit open") {
    const auto heavy = draw_records(Model(kGP, {1.0, 0.3}), 300, 6, 30.0);
    const ProfileTrace t3 = profile_endpoint(heavy, 0.0, 110.0);
    REQUIRE(t3.xi_hat > 0.0);
    CHECK(t3.psi_hat == kInf);
    CHECK(std::isfinite(t3.limits[0].lower));
    CHECK(t3.limits[0].upper_unbounded);
  }
}

TEST_CASE("equal-shape tests with a piecewise GP") {
  SUBCASE("a single threshold is the plain GP fit") {
    const auto recs = draw_records(Model(kGP, {1.5, -0.1}), 400, 7);
    const std::vector<double> u{0.5};
    const ShapeTestResult s = nc_fit_and_shape_test(recs, u);
    const FitResult g = fit_mle(kGP, recs, 0.5);
    CHECK(s.fit.loglik == doctest::Approx(g.loglik).epsilon(1e-8));
    CHECK(s.fit.mle[0] == doctest::Approx(g.mle[0]).epsilon(1e-5));
    CHECK(s.fit.mle[1] == doctest::Approx(g.mle[1]).epsilon(1e-5));
    CHECK(s.tests.empty());
  }
  SUBCASE("Gompertz data show increasing fitted shapes") {
    const auto x = sample(ModelSpec::of(Family::gompertz_makeham), {1.0, 2.0, 0.0}, 200000, 8);
    std::vector<LifetimeRecord> recs;
    for (double t : x) recs.push_back(LifetimeRecord::observed(t));
    const std::vector<double> u{0.5, 0.75, 1.0};
    const ShapeTestResult s = nc_fit_and_shape_test(recs, u);
    REQUIRE(s.fit.converged);
    REQUIRE(s.fit.mle.size() == 4);
    CHECK(s.fit.mle[1] < s.fit.mle[2]);
    CHECK(s.fit.mle[2] < s.fit.mle[3]);
    CHECK(s.fit.mle[3] < 0.0);
    REQUIRE(s.tests.size() == 2);
    CHECK(s.tests[0].df == 2.0);
    CHECK(s.tests[1].df == 1.0);
    CHECK(s.tests[0].p_asymptotic < 0.01);
  }
  SUBCASE("an empty interval is an error") {
    std::vector<LifetimeRecord> recs;
    for (double t : {0.1, 0.2, 0.3, 0.4, 0.5, 3.1, 3.2, 3.3, 3.4, 3.5}) recs.push_back(LifetimeRecord::observed(t));
    const std::vector<double> u{0.0, 1.0, 2.0};
    CHECK_THROWS_AS(nc_fit_and_shape_test(recs, u), DataError);
  }
}

TEST_CASE("group comparison") {
  SUBCASE("duplicated data give w = 0") {
    auto recs = draw_records(Model(kExp, {1.4}), 100, 9);
    const auto copy = recs;
    recs.insert(recs.end(), copy.begin(), copy.end());
    std::vector<std::string> labels(200, "a");
    std::fill(labels.begin() + 100, labels.end(), "b");
    const TestResult t = group_comparison(recs, labels, kExp);
    CHECK(t.statistic == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
    CHECK(t.p_asymptotic > 0.999);
    CHECK(t.df == 1.0);
  }
  SUBCASE("groups with different scales are separated") {
    auto a = draw_records(Model(kExp, {1.15}), 253, 10, 50.0);
    const auto b = draw_records(Model(kExp, {1.64}), 262, 11, 50.0);
    a.insert(a.end(), b.begin(), b.end());
    std::vector<std::string> labels(a.size(), "A");
    std::fill(labels.begin() + 253, labels.end(), "B");
    const TestResult w = group_comparison(a, labels, kExp, 0.0, GroupMethod::wald);
    const TestResult l = group_comparison(a, labels, kExp, 0.0, GroupMethod::lrt);
    CHECK(w.method == "wald");
    CHECK(w.p_asymptotic < 0.01);
    CHECK(l.p_asymptotic < 0.01);
  }
  SUBCASE("p-values are uniform under the null") {
    std::vector<double> ps;
    for (std::uint64_t r = 0; r < 300; ++r) {
      auto recs = draw_records(Model(kExp, {1.4}), 120, 1000 + r);
      std::vector<std::string> labels(recs.size());
      for (std::size_t i = 0; i < recs.size(); ++i) labels[i] = i % 3 == 0 ? "x" : (i % 3 == 1 ? "y" : "z");
      const TestResult t = group_comparison(recs, labels, kExp);
      CHECK(t.df == 2.0);
      ps.push_back(t.p_asymptotic);
    }
    CHECK(ks_pvalue(ks_statistic(ps, [](double p) { return std::clamp(p, 0.0, 1.0); }), ps.size()) > 0.01);
  }
  SUBCASE("a single group is rejected") {
    const auto recs = draw_records(Model(kExp, {1.4}), 10, 12);
    const std::vector<std::string> labels(10, "a");
    CHECK_THROWS(group_comparison(recs, labels, kExp));
  }
}
