#pragma once

#include "fvad/data/timeline.hpp"

#include <map>
#include <string>
#include <string_view>

namespace fvad::data {

// file id -> speech timeline, speakers collapsed.
using RttmMap = std::map<std::string, Timeline>;

// Reads SPEAKER records; other record types and '#' comments are skipped.
// Throws ParseError (with line number) on malformed fields or duration <= 0.
RttmMap parse_rttm(std::string_view text);
RttmMap read_rttm(const std::string& path);

// One "SPEAKER <file> 1 <start> <dur> <NA> <NA> speech <NA> <NA>" line per segment.
std::string serialize_rttm(const RttmMap& timelines);

}  // namespace fvad::data
