#include "fvad/data/timeline.hpp"

#include "fvad/error.hpp"

#include <algorithm>
#include <cmath>

namespace fvad::data {
namespace {

void check_segment(const Segment& s) {
  if (!std::isfinite(s.start) || !std::isfinite(s.end) || !(s.start < s.end)) {
    throw InvalidInput("invalid segment [" + std::to_string(s.start) + ", " +
                       std::to_string(s.end) + ")");
  }
}

std::vector<Segment> normalize(std::vector<Segment> segs) {
  std::sort(segs.begin(), segs.end(),
            [](const Segment& a, const Segment& b) { return a.start < b.start; });
  std::vector<Segment> out;
  for (const Segment& s : segs) {
    if (!out.empty() && s.start <= out.back().end) {
      out.back().end = std::max(out.back().end, s.end);
    } else {
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace

Timeline::Timeline(std::vector<Segment> segments) {
  for (const Segment& s : segments) check_segment(s);
  segments_ = normalize(std::move(segments));
}

double Timeline::duration() const {
  double d = 0.0;
  for (const Segment& s : segments_) d += s.duration();
  return d;
}

void Timeline::add(Segment s) {
  check_segment(s);
  segments_.push_back(s);
  segments_ = normalize(std::move(segments_));
}

Timeline Timeline::unite(const Timeline& other) const {
  std::vector<Segment> all = segments_;
  all.insert(all.end(), other.segments_.begin(), other.segments_.end());
  Timeline out;
  out.segments_ = normalize(std::move(all));
  return out;
}

Timeline Timeline::intersect(const Timeline& other) const {
  Timeline out;
  std::size_t i = 0, j = 0;
  const auto& a = segments_;
  const auto& b = other.segments_;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].start, b[j].start);
    const double hi = std::min(a[i].end, b[j].end);
    if (lo < hi) out.segments_.push_back({lo, hi});
    if (a[i].end < b[j].end) {
      ++i;
    } else {
      ++j;
    }
  }
  return out;
}

Timeline Timeline::complement(double lo, double hi) const {
  Timeline out;
  double cursor = lo;
  for (const Segment& s : segments_) {
    if (s.end <= lo) continue;
    if (s.start >= hi) break;
    if (s.start > cursor) out.segments_.push_back({cursor, s.start});
    cursor = std::max(cursor, s.end);
  }
  if (cursor < hi) out.segments_.push_back({cursor, hi});
  return out;
}

Timeline Timeline::subtract(const Timeline& other) const {
  if (segments_.empty()) return {};
  const double lo = segments_.front().start;
  const double hi = segments_.back().end;
  return intersect(other.complement(lo, hi));
}

Timeline Timeline::clip(double lo, double hi) const {
  if (!(lo < hi)) return {};
  return intersect(Timeline({{lo, hi}}));
}

bool Timeline::contains(double t) const {
  const auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                                   [](double v, const Segment& s) { return v < s.start; });
  if (it == segments_.begin()) return false;
  const Segment& s = *std::prev(it);
  return t >= s.start && t < s.end;
}

std::vector<std::uint8_t> labels_from_timeline(const Timeline& tl, std::int64_t frames,
                                               double hop_ms) {
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(std::max<std::int64_t>(frames, 0)), 0);
  const auto& segs = tl.segments();
  std::size_t k = 0;
  for (std::int64_t t = 0; t < frames; ++t) {
    const double centre = (static_cast<double>(t) + 0.5) * hop_ms / 1000.0;
    while (k < segs.size() && segs[k].end <= centre) ++k;
    if (k < segs.size() && segs[k].start <= centre) labels[t] = 1;
  }
  return labels;
}

Timeline timeline_from_labels(const std::vector<std::uint8_t>& labels, double hop_ms) {
  std::vector<Segment> segs;
  const double hop = hop_ms / 1000.0;
  std::size_t t = 0;
  while (t < labels.size()) {
    if (labels[t] == 0) {
      ++t;
      continue;
    }
    const std::size_t start = t;
    while (t < labels.size() && labels[t] != 0) ++t;
    segs.push_back({static_cast<double>(start) * hop, static_cast<double>(t) * hop});
  }
  return Timeline(std::move(segs));
}

}  // namespace fvad::data
