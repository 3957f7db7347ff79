#include "fvad/eval/binarize.hpp"

#include "fvad/error.hpp"

#include <cmath>

namespace fvad::eval {

void BinarizeConfig::validate() const {
  if (!(onset > 0.0 && onset < 1.0)) throw InvalidConfig("onset must be in (0, 1)");
  if (!(offset > 0.0 && offset < 1.0)) throw InvalidConfig("offset must be in (0, 1)");
  if (offset > onset) throw InvalidConfig("offset must not exceed onset");
  if (!(min_on_s >= 0.0) || !(min_off_s >= 0.0)) {
    throw InvalidConfig("minimum durations must be nonnegative");
  }
}

data::Timeline binarize(const model::FrameScores& scores, const BinarizeConfig& cfg) {
  cfg.validate();
  const double hop = scores.hop_ms / 1000.0;
  std::vector<data::Segment> raw;
  bool active = false;
  std::size_t start = 0;
  for (std::size_t t = 0; t < scores.p.size(); ++t) {
    const double p = scores.p[t];
    if (!std::isfinite(p)) throw InvalidInput("binarize: non-finite score");
    if (!active && p >= cfg.onset) {
      active = true;
      start = t;
    } else if (active && p < cfg.offset) {
      active = false;
      raw.push_back({static_cast<double>(start) * hop, static_cast<double>(t) * hop});
    }
  }
  if (active) {
    raw.push_back({static_cast<double>(start) * hop, static_cast<double>(scores.p.size()) * hop});
  }

  std::vector<data::Segment> filled;
  for (const auto& s : raw) {
    if (!filled.empty() && s.start - filled.back().end < cfg.min_off_s) {
      filled.back().end = s.end;
    } else {
      filled.push_back(s);
    }
  }
  std::vector<data::Segment> kept;
  for (const auto& s : filled) {
    if (s.duration() >= cfg.min_on_s) kept.push_back(s);
  }
  return data::Timeline(std::move(kept));
}

}  // namespace fvad::eval
