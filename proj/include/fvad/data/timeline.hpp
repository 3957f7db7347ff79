#pragma once

#include <cstdint>
#include <vector>

namespace fvad::data {

// Half-open interval [start, end) in seconds.
struct Segment {
  double start = 0.0;
  double end = 0.0;

  double duration() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

// Sorted, disjoint speech regions. Construction normalizes: overlapping or
// touching segments are merged.
class Timeline {
 public:
  Timeline() = default;
  // Throws InvalidInput if any segment has start >= end or non-finite bounds.
  explicit Timeline(std::vector<Segment> segments);

  const std::vector<Segment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }
  std::size_t size() const { return segments_.size(); }
  double duration() const;

  void add(Segment s);

  Timeline unite(const Timeline& other) const;
  Timeline intersect(const Timeline& other) const;
  Timeline subtract(const Timeline& other) const;
  // Complement within [lo, hi).
  Timeline complement(double lo, double hi) const;
  Timeline clip(double lo, double hi) const;

  bool contains(double t) const;

  bool operator==(const Timeline&) const = default;

 private:
  std::vector<Segment> segments_;
};

// Frame t is 1 iff its centre (t + 0.5) * hop lies inside a segment.
std::vector<std::uint8_t> labels_from_timeline(const Timeline& tl, std::int64_t frames,
                                               double hop_ms);

// Inverse of labels_from_timeline on the frame grid: each run of ones becomes
// [t0 * hop, t1 * hop).
Timeline timeline_from_labels(const std::vector<std::uint8_t>& labels, double hop_ms);

}  // namespace fvad::data
