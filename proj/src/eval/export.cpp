#include "fvad/eval/export.hpp"

#include <algorithm>
#include <cstdio>

namespace fvad::eval {
namespace {

constexpr int kLaneHeight = 28;
constexpr int kLaneGap = 10;
constexpr int kLabelWidth = 110;
constexpr int kPlotWidth = 900;

std::string lane_color(const std::string& name, std::size_t index) {
  if (name == "reference") return "#e6c619";
  if (name.find("add") != std::string::npos) return "#2ca02c";
  if (name.find("concat") != std::string::npos) return "#d62728";
  if (name.find("xattn") != std::string::npos) return "#9467bd";
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"};
  return palette[index % 5];
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

TimelineDocument export_timelines(const data::Timeline& ref,
                                  const std::vector<NamedTimeline>& hyps, double duration_s) {
  std::vector<NamedTimeline> lanes;
  lanes.push_back({"reference", ref});
  lanes.insert(lanes.end(), hyps.begin(), hyps.end());
  const double span = duration_s > 0.0 ? duration_s : 1.0;

  TimelineDocument doc;
  doc.sidecar["duration_s"] = duration_s;
  doc.sidecar["lanes"] = nlohmann::json::array();

  const int height = static_cast<int>(lanes.size()) * (kLaneHeight + kLaneGap) + kLaneGap + 20;
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n",
                kLabelWidth + kPlotWidth + 10, height);
  doc.svg = buf;
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const auto& lane = lanes[i];
    const std::string color = lane_color(lane.name, i);
    const int y = kLaneGap + static_cast<int>(i) * (kLaneHeight + kLaneGap);
    nlohmann::json segs = nlohmann::json::array();
    std::snprintf(buf, sizeof(buf), "  <text x=\"4\" y=\"%d\">%s</text>\n",
                  y + kLaneHeight / 2 + 4, escape(lane.name).c_str());
    doc.svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "  <rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"#f4f4f4\"/>\n",
                  kLabelWidth, y, kPlotWidth, kLaneHeight);
    doc.svg += buf;
    for (const auto& s : lane.timeline.segments()) {
      segs.push_back({s.start, s.end});
      const double x0 = kLabelWidth + kPlotWidth * std::clamp(s.start / span, 0.0, 1.0);
      const double x1 = kLabelWidth + kPlotWidth * std::clamp(s.end / span, 0.0, 1.0);
      std::snprintf(buf, sizeof(buf),
                    "  <rect x=\"%.2f\" y=\"%d\" width=\"%.2f\" height=\"%d\" fill=\"%s\"/>\n", x0,
                    y, std::max(x1 - x0, 0.5), kLaneHeight, color.c_str());
      doc.svg += buf;
    }
    doc.sidecar["lanes"].push_back({{"name", lane.name}, {"color", color}, {"segments", segs}});
  }
  std::snprintf(buf, sizeof(buf), "  <text x=\"%d\" y=\"%d\">0 s</text>\n", kLabelWidth,
                height - 6);
  doc.svg += buf;
  std::snprintf(buf, sizeof(buf), "  <text x=\"%d\" y=\"%d\" text-anchor=\"end\">%.2f s</text>\n",
                kLabelWidth + kPlotWidth, height - 6, duration_s);
  doc.svg += buf;
  doc.svg += "</svg>\n";
  return doc;
}

}  // namespace fvad::eval
