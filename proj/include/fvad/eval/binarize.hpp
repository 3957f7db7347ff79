#pragma once

#include "fvad/data/timeline.hpp"
#include "fvad/model/fusion_vad.hpp"

namespace fvad::eval {

struct BinarizeConfig {
  double onset = 0.5;
  double offset = 0.5;
  double min_on_s = 0.0;
  double min_off_s = 0.0;

  // Throws InvalidConfig unless 0 < offset <= onset < 1 and durations >= 0.
  void validate() const;
};

// Hysteresis: speech starts at p >= onset and ends at the first p < offset.
// Frame t spans [t*hop, (t+1)*hop). Gaps shorter than min_off_s are filled,
// then segments shorter than min_on_s are dropped.
data::Timeline binarize(const model::FrameScores& scores, const BinarizeConfig& cfg);

}  // namespace fvad::eval
