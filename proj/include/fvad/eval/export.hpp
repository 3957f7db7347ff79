#pragma once

#include "fvad/data/timeline.hpp"

#include "json.hpp"

#include <string>
#include <utility>
#include <vector>

namespace fvad::eval {

struct NamedTimeline {
  std::string name;
  data::Timeline timeline;
};

struct TimelineDocument {
  std::string svg;
  nlohmann::json sidecar;  // {"duration_s", "lanes": [{"name", "color", "segments"}]}
};

// One lane for the reference, then one per hypothesis in input order.
// Lanes named add / concat / xattn get green / red / purple.
TimelineDocument export_timelines(const data::Timeline& ref,
                                  const std::vector<NamedTimeline>& hyps, double duration_s);

}  // namespace fvad::eval
