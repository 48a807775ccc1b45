#include "longtail/core.hpp"

#include <algorithm>

namespace longtail {

void IntervalSet::add(Interval iv) {
  if (!(iv.lo <= iv.hi)) return;
  parts_.push_back(iv);
  std::sort(parts_.begin(), parts_.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& p : parts_) {
    if (!merged.empty() && p.lo <= merged.back().hi) {
      merged.back().hi = std::max(merged.back().hi, p.hi);
    } else {
      merged.push_back(p);
    }
  }
  parts_ = std::move(merged);
}

bool IntervalSet::contains(double t) const {
  return std::any_of(parts_.begin(), parts_.end(),
                     [t](const Interval& iv) { return iv.contains(t); });
}

double IntervalSet::lower() const { return parts_.empty() ? kNaN : parts_.front().lo; }

double IntervalSet::upper() const { return parts_.empty() ? kNaN : parts_.back().hi; }

IntervalSet IntervalSet::above(double v) const {
  IntervalSet out;
  for (const auto& p : parts_) {
    if (p.hi <= v) continue;
    out.parts_.push_back({std::max(p.lo, v) - v, p.hi - v});
  }
  return out;
}

IntervalSet IntervalSet::scaled(double c) const {
  IntervalSet out;
  for (const auto& p : parts_) out.parts_.push_back({p.lo * c, p.hi * c});
  return out;
}

}  // namespace longtail
