#include "fvad/data/rttm.hpp"

#include "fvad/error.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace fvad::data {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t j = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line_no, const char* what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError("rttm line " + std::to_string(line_no) + ": bad " + what + " '" +
                     std::string(field) + "'");
  }
  return v;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

RttmMap parse_rttm(std::string_view text) {
  std::map<std::string, std::vector<Segment>> raw;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty() || fields[0].front() == '#' || fields[0] != "SPEAKER") continue;
    if (fields.size() < 5) {
      throw ParseError("rttm line " + std::to_string(line_no) + ": expected at least 5 fields");
    }
    const double start = parse_number(fields[3], line_no, "start");
    const double dur = parse_number(fields[4], line_no, "duration");
    if (dur <= 0.0) {
      throw ParseError("rttm line " + std::to_string(line_no) + ": duration must be positive");
    }
    raw[std::string(fields[1])].push_back({start, start + dur});
  }
  RttmMap out;
  for (auto& [id, segs] : raw) out.emplace(id, Timeline(std::move(segs)));
  return out;
}

RttmMap read_rttm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rttm file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rttm(ss.str());
}

std::string serialize_rttm(const RttmMap& timelines) {
  std::string out;
  for (const auto& [id, tl] : timelines) {
    for (const Segment& s : tl.segments()) {
      out += "SPEAKER " + id + " 1 " + format_number(s.start) + " " +
             format_number(s.end - s.start) + " <NA> <NA> speech <NA> <NA>\n";
    }
  }
  return out;
}

}  // namespace fvad::data
