#pragma once

#include "fvad/data/timeline.hpp"
#include "fvad/rng.hpp"

namespace gen {

// Up to `max_segments` random segments inside [0, dur), millisecond-aligned
// only when `ms_grid` is set.
inline fvad::data::Timeline timeline(fvad::Rng& rng, double dur, int max_segments,
                                     bool ms_grid = false) {
  fvad::data::Timeline tl;
  const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_segments)));
  for (int i = 0; i < n; ++i) {
    double a = rng.uniform(0.0, dur);
    double b = std::min(dur, a + rng.uniform(0.01, dur / 4));
    if (ms_grid) {
      a = std::round(a * 1000.0) / 1000.0;
      b = std::round(b * 1000.0) / 1000.0;
    }
    if (b > a) tl.add({a, b});
  }
  return tl;
}

// Alternating silence and speech over [0, dur), like a VAD output.
inline fvad::data::Timeline vad_like(fvad::Rng& rng, double dur) {
  fvad::data::Timeline tl;
  double t = rng.uniform(0.0, 2.0);
  while (t < dur) {
    const double end = std::min(dur, t + rng.uniform(0.2, 4.0));
    tl.add({t, end});
    t = end + rng.uniform(0.1, 3.0);
  }
  return tl;
}

}  // namespace gen
