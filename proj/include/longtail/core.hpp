#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace longtail {

inline constexpr double kDaysPerYear = 365.25;
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Error categories map onto CLI exit codes: DataError -> 2, NumericError -> 3,
// InternalError -> 4.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Closed interval [lo, hi] on the excess-time axis; hi may be +inf.
struct Interval {
  double lo = 0.0;
  double hi = kInf;

  [[nodiscard]] bool contains(double t) const { return t >= lo && t <= hi; }
  [[nodiscard]] double width() const { return hi - lo; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Sorted union of disjoint intervals. Most records carry one interval; IDL
/// dual-window frames can produce two.
class IntervalSet {
 public:
  IntervalSet() = default;
  explicit IntervalSet(Interval iv) { add(iv); }
  IntervalSet(std::initializer_list<Interval> ivs) {
    for (const auto& iv : ivs) add(iv);
  }

  // Inserts and merges overlapping or touching pieces. Empty intervals
  // (lo > hi) are ignored.
  void add(Interval iv);

  [[nodiscard]] bool empty() const { return parts_.empty(); }
  [[nodiscard]] std::size_t size() const { return parts_.size(); }
  [[nodiscard]] const std::vector<Interval>& parts() const { return parts_; }
  [[nodiscard]] bool contains(double t) const;
  [[nodiscard]] double lower() const;
  [[nodiscard]] double upper() const;

  /// Intersection with (v, inf), shifted so that v maps to 0.
  [[nodiscard]] IntervalSet above(double v) const;
  [[nodiscard]] IntervalSet scaled(double c) const;

  friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

 private:
  std::vector<Interval> parts_;
};

/// Full positive half-line, the truncation set of an untruncated record.
inline IntervalSet untruncated() { return IntervalSet{Interval{0.0, kInf}}; }

}  // namespace longtail
