#pragma once

// Lexis-diagram bookkeeping: calendar dates, sampling frames, per-record
// truncation sets, and CSV ingestion of lifetime datasets.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "longtail/core.hpp"

namespace longtail {

/// Proleptic Gregorian date stored as whole days since 1800-01-01.
class CalendarDate {
 public:
  constexpr CalendarDate() = default;
  constexpr explicit CalendarDate(std::int64_t days_since_epoch) : days_(days_since_epoch) {}

  static CalendarDate from_ymd(int year, unsigned month, unsigned day);
  /// Parses YYYY-MM-DD; throws DataError on malformed or impossible dates.
  static CalendarDate parse(std::string_view iso);

  [[nodiscard]] constexpr std::int64_t days_since_epoch() const { return days_; }
  [[nodiscard]] std::string iso() const;
  /// Calendar-year shift (a 29 February anniversary lands on 1 March).
  [[nodiscard]] CalendarDate plus_years(int years) const;

  constexpr CalendarDate operator+(std::int64_t d) const { return CalendarDate{days_ + d}; }
  constexpr CalendarDate operator-(std::int64_t d) const { return CalendarDate{days_ - d}; }
  constexpr std::int64_t operator-(CalendarDate other) const { return days_ - other.days_; }
  constexpr auto operator<=>(const CalendarDate&) const = default;

 private:
  std::int64_t days_ = 0;
};

enum class FrameKind { interval_truncated, left_trunc_right_cens, idl_dual };

std::string_view to_string(FrameKind k);
FrameKind frame_kind_from_string(std::string_view s);

/// Calendar windows defining which trajectories are observable. For
/// idl_dual, deaths in [lower_age, split_age) are collected over [d1, d2] and
/// deaths at split_age or above over [c1, c2].
struct SamplingFrame {
  FrameKind kind = FrameKind::interval_truncated;
  CalendarDate c1, c2;
  std::optional<CalendarDate> d1, d2;
  double origin_age = 105.0;  // u0, years
  int lower_age = 105;
  int split_age = 110;

  /// Throws DataError when the window ordering assumptions fail.
  void validate() const;
};

enum class Censoring { observed, right_censored, interval_censored };

std::string_view to_string(Censoring c);
Censoring censoring_from_string(std::string_view s);

/// One individual's excess lifetime above the origin age together with the
/// set of excess times at which the record could have entered the sample.
///
/// Observed records carry `time`; right-censored records are known to exceed
/// `time`, which must equal `censor_limit`; interval-censored records lie in
/// [time, time_upper). `censor_limit` is the administrative censoring time of
/// left-truncated right-censored schemes (infinite otherwise).
struct LifetimeRecord {
  std::string id;
  Censoring censoring = Censoring::observed;
  double time = 0.0;
  double time_upper = kInf;
  IntervalSet truncation = untruncated();
  double censor_limit = kInf;
  std::optional<CalendarDate> entry_date;
  std::map<std::string, std::string> covariates;

  static LifetimeRecord observed(double t, IntervalSet trunc = untruncated(),
                                 double censor_limit = kInf);
  static LifetimeRecord right_censored(double c, IntervalSet trunc = untruncated());
  static LifetimeRecord interval_censored(double lo, double hi,
                                          IntervalSet trunc = untruncated());

  /// Empty when every invariant holds, otherwise a description of the first
  /// violation.
  [[nodiscard]] std::optional<std::string> violation() const;
};

/// Excess-time window [max(0, c1-x), c2-x] of a trajectory reaching the
/// origin age at date x. Throws DataError when x >= c2.
Interval excess_interval(CalendarDate x, const SamplingFrame& frame);

/// Excess ages (days above lower_age) at which a death would be recorded by a
/// dual-window frame. Returns zero, one, or two disjoint intervals.
IntervalSet idl_observable_set(CalendarDate x_lower, const SamplingFrame& frame);

struct IngestDiagnostic {
  std::size_t row = 0;  // 1-based data row (header excluded)
  std::string id;
  std::string message;
};

struct IngestResult {
  std::vector<LifetimeRecord> records;
  std::vector<IngestDiagnostic> diagnostics;
};

/// Reads a frames metadata file: {"frame_id": {"kind": ..., "c1": ..., ...}}.
std::map<std::string, SamplingFrame> load_frames(const std::filesystem::path& path);
std::map<std::string, SamplingFrame> parse_frames(std::string_view json_text);

/// Parses a lifetime CSV. Invalid rows become diagnostics; only an
/// unreadable file or a malformed header throws (DataError).
IngestResult ingest_csv(const std::filesystem::path& path,
                        const std::map<std::string, SamplingFrame>& frames);
IngestResult ingest_csv_text(std::string_view text,
                             const std::map<std::string, SamplingFrame>& frames);

/// Multiplies every time-like quantity by `factor` (e.g. 1/365.25 for
/// days to years).
std::vector<LifetimeRecord> rescale_times(std::span<const LifetimeRecord> records, double factor);

}  // namespace longtail
