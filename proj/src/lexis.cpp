#include "longtail/lexis.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace longtail {

namespace {

namespace chr = std::chrono;

constexpr chr::sys_days kEpoch = chr::sys_days{chr::year{1800} / 1 / 1};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

CalendarDate years_after(CalendarDate d, double years) {
  const double whole = std::floor(years);
  if (whole == years) return d.plus_years(static_cast<int>(whole));
  return d + static_cast<std::int64_t>(std::llround(years * kDaysPerYear));
}

}  // namespace

// ---------------------------------------------------------------------------
// CalendarDate

CalendarDate CalendarDate::from_ymd(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) {
    throw DataError("invalid calendar date " + std::to_string(year) + "-" +
                    std::to_string(month) + "-" + std::to_string(day));
  }
  return CalendarDate{(chr::sys_days{ymd} - kEpoch).count()};
}

CalendarDate CalendarDate::parse(std::string_view iso) {
  const std::string s = trim(iso);
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0, extra = 0;
  std::istringstream in(s);
  in >> y >> dash1 >> m >> dash2 >> d;
  if (!in || dash1 != '-' || dash2 != '-' || (in >> extra) || s.size() < 8) {
    throw DataError("malformed date '" + s + "' (expected YYYY-MM-DD)");
  }
  return from_ymd(y, m, d);
}

std::string CalendarDate::iso() const {
  const chr::year_month_day ymd{kEpoch + chr::days{days_}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

CalendarDate CalendarDate::plus_years(int years) const {
  const chr::year_month_day ymd{kEpoch + chr::days{days_}};
  const auto shifted = ymd + chr::years{years};
  // sys_days normalises an invalid 29 February to 1 March.
  const chr::sys_days s = shifted.ok() ? chr::sys_days{shifted}
                                       : chr::sys_days{shifted.year() / shifted.month() / 1} +
                                             chr::days{static_cast<unsigned>(shifted.day()) - 1};
  return CalendarDate{(s - kEpoch).count()};
}

// ---------------------------------------------------------------------------
// Frames

std::string_view to_string(FrameKind k) {
  switch (k) {
    case FrameKind::interval_truncated: return "interval_truncated";
    case FrameKind::left_trunc_right_cens: return "left_trunc_right_cens";
    case FrameKind::idl_dual: return "idl_dual";
  }
  return "?";
}

FrameKind frame_kind_from_string(std::string_view s) {
  if (s == "interval_truncated") return FrameKind::interval_truncated;
  if (s == "left_trunc_right_cens") return FrameKind::left_trunc_right_cens;
  if (s == "idl_dual") return FrameKind::idl_dual;
  throw DataError("unknown frame kind '" + std::string(s) + "'");
}

void SamplingFrame::validate() const {
  if (!(c1 < c2)) throw DataError("sampling frame requires c1 < c2");
  if (kind == FrameKind::idl_dual) {
    if (!d1 || !d2) throw DataError("idl_dual frame requires d1 and d2");
    if (!(*d1 < *d2)) throw DataError("idl_dual frame requires d1 < d2");
    if (!(c2 > *d1)) throw DataError("idl_dual frame requires c2 > d1");
    if (split_age <= lower_age) throw DataError("idl_dual frame requires split_age > lower_age");
  }
}

std::string_view to_string(Censoring c) {
  switch (c) {
    case Censoring::observed: return "observed";
    case Censoring::right_censored: return "right_censored";
    case Censoring::interval_censored: return "interval_censored";
  }
  return "?";
}

Censoring censoring_from_string(std::string_view s) {
  if (s == "observed") return Censoring::observed;
  if (s == "right_censored") return Censoring::right_censored;
  if (s == "interval_censored") return Censoring::interval_censored;
  throw DataError("unknown censoring type '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Records

LifetimeRecord LifetimeRecord::observed(double t, IntervalSet trunc, double censor_limit) {
  LifetimeRecord r;
  r.censoring = Censoring::observed;
  r.time = t;
  r.truncation = std::move(trunc);
  r.censor_limit = censor_limit;
  return r;
}

LifetimeRecord LifetimeRecord::right_censored(double c, IntervalSet trunc) {
  LifetimeRecord r;
  r.censoring = Censoring::right_censored;
  r.time = c;
  r.censor_limit = c;
  r.truncation = std::move(trunc);
  return r;
}

LifetimeRecord LifetimeRecord::interval_censored(double lo, double hi, IntervalSet trunc) {
  LifetimeRecord r;
  r.censoring = Censoring::interval_censored;
  r.time = lo;
  r.time_upper = hi;
  r.truncation = std::move(trunc);
  return r;
}

std::optional<std::string> LifetimeRecord::violation() const {
  if (truncation.empty()) return "empty truncation set";
  for (const auto& iv : truncation.parts()) {
    if (!(iv.lo >= 0.0) || !std::isfinite(iv.lo) || std::isnan(iv.hi)) {
      return "truncation bounds must be nonnegative and finite below";
    }
  }
  if (!(time >= 0.0) || !std::isfinite(time)) return "time must be nonnegative and finite";
  switch (censoring) {
    case Censoring::observed:
      if (!truncation.contains(time)) return "observed lifetime lies outside its truncation set";
      if (time > censor_limit) return "observed lifetime exceeds its censoring limit";
      break;
    case Censoring::right_censored:
      if (time != censor_limit) return "censoring time differs from censoring limit";
      if (time < truncation.lower()) return "censoring time precedes truncation set";
      break;
    case Censoring::interval_censored: {
      if (!(time < time_upper)) return "interval-censored bounds must satisfy l < r";
      const bool overlaps = std::any_of(
          truncation.parts().begin(), truncation.parts().end(),
          [&](const Interval& iv) { return iv.lo < time_upper && iv.hi >= time; });
      if (!overlaps) return "censoring interval does not meet the truncation set";
      break;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Lexis geometry

Interval excess_interval(CalendarDate x, const SamplingFrame& frame) {
  if (!(x < frame.c2)) throw DataError("trajectory cannot intersect observation region");
  const double a = std::max<double>(0.0, static_cast<double>(frame.c1 - x));
  const double b = static_cast<double>(frame.c2 - x);
  return {a, b};
}

IntervalSet idl_observable_set(CalendarDate x_lower, const SamplingFrame& frame) {
  const CalendarDate x_split = x_lower.plus_years(frame.split_age - frame.lower_age);
  const double s_split = static_cast<double>(x_split - x_lower);
  IntervalSet out;
  // Deaths below the split age enter through [d1, d2].
  if (frame.d1 && frame.d2) {
    const double lo = std::max(0.0, static_cast<double>(*frame.d1 - x_lower));
    const double hi = std::min(s_split, static_cast<double>(*frame.d2 - x_lower));
    if (lo <= hi && lo < s_split) out.add({lo, hi});
  }
  // Deaths at or above the split age enter through [c1, c2].
  const double lo = std::max(s_split, static_cast<double>(frame.c1 - x_lower));
  const double hi = static_cast<double>(frame.c2 - x_lower);
  if (lo <= hi) out.add({lo, hi});
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

std::map<std::string, SamplingFrame> parse_frames(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("frame metadata is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("frame metadata must be a JSON object keyed by frame_id");
  std::map<std::string, SamplingFrame> frames;
  for (const auto& [id, f] : j.items()) {
    try {
      SamplingFrame fr;
      fr.kind = frame_kind_from_string(f.at("kind").get<std::string>());
      fr.c1 = CalendarDate::parse(f.at("c1").get<std::string>());
      fr.c2 = CalendarDate::parse(f.at("c2").get<std::string>());
      if (f.contains("d1")) fr.d1 = CalendarDate::parse(f.at("d1").get<std::string>());
      if (f.contains("d2")) fr.d2 = CalendarDate::parse(f.at("d2").get<std::string>());
      fr.origin_age = f.value("u0", 105.0);
      fr.lower_age = f.value("lower_age", 105);
      fr.split_age = f.value("split_age", 110);
      if (fr.kind == FrameKind::idl_dual) fr.origin_age = fr.lower_age;
      fr.validate();
      frames.emplace(id, fr);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("frame '" + id + "': " + e.what());
    } catch (const DataError& e) {
      throw DataError("frame '" + id + "': " + e.what());
    }
  }
  return frames;
}

std::map<std::string, SamplingFrame> load_frames(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read frame metadata " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_frames(ss.str());
}

namespace {

struct Columns {
  int id = -1, birth = -1, entry = -1, age_days = -1, age_years = -1, event = -1, frame = -1;
  std::vector<std::pair<int, std::string>> covariates;
};

Columns map_header(const std::vector<std::string>& header) {
  Columns c;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const auto& h = header[i];
    if (h == "id") c.id = i;
    else if (h == "birth_date") c.birth = i;
    else if (h == "entry_date") c.entry = i;
    else if (h == "event_age_days") c.age_days = i;
    else if (h == "event_age_years") c.age_years = i;
    else if (h == "event_type") c.event = i;
    else if (h == "frame_id") c.frame = i;
    else c.covariates.emplace_back(i, h);
  }
  if (c.id < 0) throw DataError("CSV header lacks 'id'");
  if ((c.birth < 0) == (c.entry < 0)) {
    throw DataError("CSV header needs exactly one of 'birth_date' or 'entry_date'");
  }
  if ((c.age_days < 0) == (c.age_years < 0)) {
    throw DataError("CSV header needs exactly one of 'event_age_days' or 'event_age_years'");
  }
  if (c.event < 0) throw DataError("CSV header lacks 'event_type'");
  if (c.frame < 0) throw DataError("CSV header lacks 'frame_id'");
  return c;
}

// Builds one record or throws DataError with the per-row message.
LifetimeRecord build_record(const std::vector<std::string>& f, const Columns& col,
                            const std::map<std::string, SamplingFrame>& frames) {
  LifetimeRecord rec;
  rec.id = f[col.id];
  const auto fit = frames.find(f[col.frame]);
  if (fit == frames.end()) throw DataError("unknown frame_id '" + f[col.frame] + "'");
  const SamplingFrame& frame = fit->second;
  const double u0 = frame.origin_age;

  std::optional<CalendarDate> birth;
  CalendarDate x;
  if (col.birth >= 0) {
    birth = CalendarDate::parse(f[col.birth]);
    x = years_after(*birth, u0);
  } else {
    x = CalendarDate::parse(f[col.entry]);
  }
  rec.entry_date = x;

  const std::string& ev = f[col.event];
  if (ev != "death" && ev != "alive") throw DataError("event_type must be 'death' or 'alive'");
  const bool death = ev == "death";

  // Excess-time event: a point or an interval [lo, hi).
  double lo = 0.0, hi = 0.0;
  bool interval = false;
  if (col.age_days >= 0) {
    const auto age = parse_number(f[col.age_days]);
    if (!age || *age < 0) throw DataError("event_age_days must be a nonnegative number");
    lo = birth ? *age - static_cast<double>(x - *birth) : *age - u0 * kDaysPerYear;
    hi = lo;
  } else {
    const auto age = parse_number(f[col.age_years]);
    if (!age || *age < 0 || std::floor(*age) != *age) {
      throw DataError("event_age_years must be a nonnegative whole number");
    }
    interval = true;
    if (birth) {
      lo = static_cast<double>(years_after(*birth, *age) - x);
      hi = static_cast<double>(years_after(*birth, *age + 1) - x);
    } else {
      lo = (*age - u0) * kDaysPerYear;
      hi = (*age + 1 - u0) * kDaysPerYear;
    }
  }
  if (interval ? hi <= 0.0 : lo < 0.0) {
    throw DataError("negative excess age: event occurs below the origin age");
  }
  lo = std::max(lo, 0.0);

  for (const auto& [idx, name] : col.covariates) {
    if (idx < static_cast<int>(f.size())) rec.covariates[name] = f[idx];
  }

  switch (frame.kind) {
    case FrameKind::interval_truncated: {
      if (!death) throw DataError("alive records are not allowed in an interval-truncated frame");
      const Interval iv = excess_interval(x, frame);
      rec.truncation = IntervalSet{iv};
      break;
    }
    case FrameKind::left_trunc_right_cens: {
      const Interval iv = excess_interval(x, frame);
      rec.truncation = IntervalSet{Interval{iv.lo, kInf}};
      rec.censor_limit = iv.hi;
      if (!death) {
        const bool matches = interval ? (lo <= iv.hi && iv.hi < hi + 1.0)
                                      : std::abs(lo - iv.hi) <= 1.0;
        if (!matches) {
          throw DataError("alive record's age does not match the age reached at c2");
        }
        rec.censoring = Censoring::right_censored;
        rec.time = iv.hi;
        if (auto v = rec.violation()) throw DataError(*v);
        return rec;
      }
      break;
    }
    case FrameKind::idl_dual: {
      if (!death) throw DataError("alive records are not allowed in an idl_dual frame");
      rec.truncation = idl_observable_set(x, frame);
      if (rec.truncation.empty()) {
        throw DataError("trajectory cannot intersect observation region");
      }
      break;
    }
  }

  if (interval) {
    rec.censoring = Censoring::interval_censored;
    rec.time = lo;
    rec.time_upper = hi;
  } else {
    rec.censoring = Censoring::observed;
    rec.time = lo;
    if (!rec.truncation.contains(lo)) {
      throw DataError("death date falls outside the sampling frame");
    }
  }
  if (auto v = rec.violation()) throw DataError(*v);
  return rec;
}

}  // namespace

IngestResult ingest_csv_text(std::string_view text,
                             const std::map<std::string, SamplingFrame>& frames) {
  IngestResult result;
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw DataError("CSV is empty (header required)");
  const Columns col = map_header(header);

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_csv_line(line);
    std::string id = col.id < static_cast<int>(fields.size()) ? fields[col.id] : std::string{};
    if (fields.size() != header.size()) {
      result.diagnostics.push_back({row, id, "expected " + std::to_string(header.size()) +
                                                 " fields, found " +
                                                 std::to_string(fields.size())});
      continue;
    }
    try {
      result.records.push_back(build_record(fields, col, frames));
    } catch (const DataError& e) {
      result.diagnostics.push_back({row, id, e.what()});
    }
  }
  return result;
}

IngestResult ingest_csv(const std::filesystem::path& path,
                        const std::map<std::string, SamplingFrame>& frames) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ingest_csv_text(ss.str(), frames);
}

std::vector<LifetimeRecord> rescale_times(std::span<const LifetimeRecord> records, double factor) {
  std::vector<LifetimeRecord> out(records.begin(), records.end());
  for (auto& r : out) {
    r.time *= factor;
    r.time_upper *= factor;
    r.censor_limit *= factor;
    r.truncation = r.truncation.scaled(factor);
  }
  return out;
}

}  // namespace longtail
