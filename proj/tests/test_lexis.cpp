#include <doctest.h>

#include "longtail/lexis.hpp"
#include "longtail/rng.hpp"

using namespace longtail;

namespace {

CalendarDate d(const char* iso) { return CalendarDate::parse(iso); }

SamplingFrame single(FrameKind kind, const char* c1, const char* c2) {
  SamplingFrame f;
  f.kind = kind;
  f.c1 = d(c1);
  f.c2 = d(c2);
  return f;
}

SamplingFrame dual(const char* c1, const char* c2, const char* d1, const char* d2) {
  SamplingFrame f = single(FrameKind::idl_dual, c1, c2);
  f.d1 = d(d1);
  f.d2 = d(d2);
  f.validate();
  return f;
}

// Day-resolution scan of the dual-window Lexis region for one trajectory.
bool brute_observable(CalendarDate x105, const SamplingFrame& f, std::int64_t s) {
  const CalendarDate x110 = x105.plus_years(5);
  const CalendarDate death = x105 + s;
  if (death < x110) return *f.d1 <= death && death <= *f.d2;
  return f.c1 <= death && death <= f.c2;
}

}  // namespace

TEST_CASE("dates round-trip through ISO text and keep calendar order") {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const auto days = static_cast<std::int64_t>(rng.uniform(0.0, 90000.0));
    const CalendarDate a{days};
    CHECK(CalendarDate::parse(a.iso()) == a);
    CHECK(CalendarDate{days + 1} > a);
  }
  CHECK(d("1800-01-01").days_since_epoch() == 0);
  CHECK(d("1800-03-01") - d("1800-02-28") == 1);  // 1800 is not a leap year
  CHECK(d("2000-03-01") - d("2000-02-28") == 2);
  CHECK(d("2000-02-29").plus_years(1) == d("2001-03-01"));
}

TEST_CASE("malformed dates are data errors") {
  CHECK_THROWS_AS(d("2020-02-30"), DataError);
  CHECK_THROWS_AS(d("2020/01/01"), DataError);
  CHECK_THROWS_AS(d("yesterday"), DataError);
}

TEST_CASE("excess interval of a single window") {
  const SamplingFrame f = single(FrameKind::interval_truncated, "2000-01-01", "2010-01-01");
  SUBCASE("entry two years before a ten-year window") {
    const CalendarDate x = f.c1.plus_years(-2);
    const Interval iv = excess_interval(x, f);
    CHECK(iv.lo == static_cast<double>(f.c1 - x));
    CHECK(iv.hi == static_cast<double>(f.c2 - x));
    CHECK(iv.lo == 730.0);
    CHECK(d("1998-01-01").plus_years(12) - x == static_cast<std::int64_t>(iv.hi));
  }
  SUBCASE("entry at the window start") {
    const Interval iv = excess_interval(f.c1, f);
    CHECK(iv.lo == 0.0);
    CHECK(iv.hi == static_cast<double>(f.c2 - f.c1));
  }
  SUBCASE("entry at or after c2") {
    CHECK_THROWS_WITH_AS(excess_interval(f.c2, f), "trajectory cannot intersect observation region", DataError);
  }
}

TEST_CASE("oldest possible age of a 1910 birth with c2 on 31 December 2017") {
  SamplingFrame f = single(FrameKind::interval_truncated, "2000-01-01", "2017-12-31");
  const CalendarDate birth = d("1910-01-01");
  const Interval iv = excess_interval(birth.plus_years(105), f);
  const double max_age = 105.0 + iv.hi / kDaysPerYear;
  CHECK(max_age < 108.0);
  CHECK(max_age > 107.99);
}

TEST_CASE("excess interval is translation equivariant") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    SamplingFrame f = single(FrameKind::interval_truncated, "1990-01-01", "2005-06-30");
    const CalendarDate x = f.c1 + static_cast<std::int64_t>(rng.uniform(-4000, 5000));
    const auto shift = static_cast<std::int64_t>(rng.uniform(-20000, 20000));
    const Interval a = excess_interval(x, f);
    f.c1 = f.c1 + shift;
    f.c2 = f.c2 + shift;
    CHECK(excess_interval(x + shift, f) == a);
  }
}

TEST_CASE("dual-window observable sets match a day-resolution scan") {
  const SamplingFrame frames[] = {
      dual("2000-01-01", "2010-12-31", "1995-01-01", "2005-12-31"),  // d1 < c1
      dual("2003-01-01", "2015-12-31", "2001-06-01", "2008-12-31"),  // d2 < c2
      dual("2000-01-01", "2010-12-31", "2002-01-01", "2004-12-31"),
  };
  for (const auto& f : frames) {
    for (std::int64_t off = -4000; off <= 6000; off += 37) {
      const CalendarDate x105 = f.c1 + off;
      const IntervalSet set = idl_observable_set(x105, f);
      const std::int64_t split = x105.plus_years(5) - x105;
      for (std::int64_t s = 0; s <= 9000; ++s) {
        if (s == split) continue;  // boundary day belongs to either piece
        REQUIRE_MESSAGE(set.contains(static_cast<double>(s)) == brute_observable(x105, f, s),
                        "x105=" << x105.iso() << " s=" << s);
      }
      CHECK(set.size() <= 2);
    }
  }
}

TEST_CASE("trajectory A: x105 < d1 < x110 < c1 gives two pieces") {
  const SamplingFrame f = dual("2000-01-01", "2010-12-31", "1995-01-01", "2005-12-31");
  const CalendarDate x105 = d("1993-06-01");
  const IntervalSet s = idl_observable_set(x105, f);
  REQUIRE(s.size() == 2);
  CHECK(s.parts()[0].lo == static_cast<double>(*f.d1 - x105));
  CHECK(s.parts()[0].hi == static_cast<double>(x105.plus_years(5) - x105));
  CHECK(s.parts()[1].lo == static_cast<double>(f.c1 - x105));
  CHECK(s.parts()[1].hi == static_cast<double>(f.c2 - x105));
}

TEST_CASE("trajectory before both windows is unobservable") {
  const SamplingFrame f = dual("2000-01-01", "2010-12-31", "1995-01-01", "2005-12-31");
  CHECK(idl_observable_set(d("2011-02-01"), f).empty());
}

TEST_CASE("aligned dual windows reduce to the single window") {
  const SamplingFrame f = dual("2000-01-01", "2010-12-31", "2000-01-01", "2010-12-31");
  SamplingFrame s = single(FrameKind::interval_truncated, "2000-01-01", "2010-12-31");
  for (std::int64_t off = -3000; off < f.c2 - f.c1; off += 11) {
    const CalendarDate x = f.c1 + off;
    const IntervalSet set = idl_observable_set(x, f);
    REQUIRE(set.size() == 1);
    CHECK(set.parts()[0] == excess_interval(x, s));
  }
}

TEST_CASE("frame metadata validation") {
  CHECK_THROWS_AS(parse_frames(R"({"F": {"kind": "interval_truncated", "c1": "2010-01-01", "c2": "2000-01-01"}})"),
                  DataError);
  CHECK_THROWS_AS(parse_frames(R"({"F": {"kind": "idl_dual", "c1": "2000-01-01", "c2": "2010-01-01"}})"),
                  DataError);
  CHECK_THROWS_AS(parse_frames("[1, 2]"), DataError);
  const auto fr = parse_frames(R"({"F": {"kind": "left_trunc_right_cens", "c1": "2000-01-01", "c2": "2010-01-01", "u0": 108}})");
  CHECK(fr.at("F").origin_age == 108.0);
}

TEST_CASE("CSV ingestion maps rows to records") {
  const auto frames = parse_frames(R"({
    "F": {"kind": "interval_truncated", "c1": "2000-01-01", "c2": "2010-12-31"},
    "L": {"kind": "left_trunc_right_cens", "c1": "2000-01-01", "c2": "2010-12-31"}
  })");
  const CalendarDate birth = d("1893-06-01");
  const CalendarDate x = birth.plus_years(105);
  const CalendarDate death = d("2004-08-13");
  const std::int64_t age_days = death - birth;
  const std::int64_t alive_days = d("2010-12-31") - d("1900-02-02");
  const std::string csv =
      "id,birth_date,event_age_days,event_type,frame_id,sex\n"
      "a,1893-06-01," + std::to_string(age_days) + ",death,F,f\n"
      "b,1893-06-01,45000,death,F,m\n"                       // dies after c2
      "c,1900-02-02," + std::to_string(alive_days) + ",alive,L,f\n"
      "d,1900-02-02,100,death,F,f\n"                         // below the origin age
      "e,1893-06-01,nope,death,F,f\n"
      "f,1893-06-01,40000,death,Z,f\n";
  const IngestResult r = ingest_csv_text(csv, frames);
  REQUIRE(r.records.size() == 2);
  const LifetimeRecord& a = r.records[0];
  CHECK(a.id == "a");
  CHECK(a.censoring == Censoring::observed);
  CHECK(a.time == static_cast<double>(death - x));
  REQUIRE(a.truncation.size() == 1);
  CHECK(a.truncation.parts()[0].lo == static_cast<double>(d("2000-01-01") - x));
  CHECK(a.truncation.parts()[0].hi == static_cast<double>(d("2010-12-31") - x));
  CHECK(a.covariates.at("sex") == "f");
  const LifetimeRecord& c = r.records[1];
  CHECK(c.censoring == Censoring::right_censored);
  CHECK(std::isinf(c.truncation.upper()));
  CHECK(c.time == c.censor_limit);
  REQUIRE(r.diagnostics.size() == 4);
  CHECK(r.diagnostics[0].row == 2);
  CHECK(r.diagnostics[0].message == "death date falls outside the sampling frame");
  CHECK(r.diagnostics[1].message.find("negative excess age") != std::string::npos);
  CHECK(r.diagnostics[3].message.find("unknown frame_id") != std::string::npos);
  for (const auto& rec : r.records) {
    if (rec.censoring == Censoring::observed) CHECK(rec.truncation.contains(rec.time));
  }
}

TEST_CASE("whole-year ages become interval-censored records") {
  const auto frames = parse_frames(R"({"F": {"kind": "interval_truncated", "c1": "2000-01-01", "c2": "2010-12-31"}})");
  const IngestResult r = ingest_csv_text("id,birth_date,event_age_years,event_type,frame_id\nq,1895-03-10,108,death,F\n", frames);
  REQUIRE(r.records.size() == 1);
  const auto& q = r.records[0];
  const CalendarDate birth = d("1895-03-10");
  const CalendarDate x = birth.plus_years(105);
  CHECK(q.censoring == Censoring::interval_censored);
  CHECK(q.time == static_cast<double>(birth.plus_years(108) - x));
  CHECK(q.time_upper == static_cast<double>(birth.plus_years(109) - x));
}

TEST_CASE("header problems are hard errors") {
  const auto frames = parse_frames(R"({"F": {"kind": "interval_truncated", "c1": "2000-01-01", "c2": "2010-12-31"}})");
  CHECK_THROWS_AS(ingest_csv_text("id,event_type,frame_id\n", frames), DataError);
  CHECK_THROWS_AS(ingest_csv_text("", frames), DataError);
  CHECK_THROWS_AS(ingest_csv("/nonexistent/file.csv", frames), DataError);
}

TEST_CASE("rescaling converts days to years") {
  const auto r = LifetimeRecord::observed(730.5, IntervalSet{Interval{365.25, 3652.5}});
  const auto y = rescale_times(std::vector{r}, 1.0 / kDaysPerYear);
  CHECK(y[0].time == doctest::Approx(2.0));
  CHECK(y[0].truncation.parts()[0].lo == doctest::Approx(1.0));
  CHECK(y[0].truncation.parts()[0].hi == doctest::Approx(10.0));
}

TEST_CASE("a death on the origin birthday has zero excess") {
  const auto frames = parse_frames(R"({"F": {"kind": "interval_truncated", "c1": "2000-01-01", "c2": "2010-12-31"}})");
  const CalendarDate birth = d("1900-02-24");
  const auto days = birth.plus_years(105) - birth;
  const IngestResult r = ingest_csv_text(
      "id,birth_date,event_age_days,event_type,frame_id\nz,1900-02-24," + std::to_string(days) + ",death,F\n", frames);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].time == 0.0);
  CHECK(r.diagnostics.empty());
}
