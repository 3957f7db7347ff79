#pragma once

#include "fvad/feature_matrix.hpp"

#include <filesystem>
#include <iosfwd>

namespace fvad::data {

// .fvad layout, all integers u32 little-endian:
//   "FVAD" | version=1 | hop_ms (f32) | T | D | tag_len | tag bytes | T*D f32 row-major
inline constexpr std::uint32_t kFeatureFileVersion = 1;

void write_features(std::ostream& os, const FeatureMatrix& fm);
void save_features(const std::filesystem::path& path, const FeatureMatrix& fm);

// Throws ParseError on a malformed header or short payload.
FeatureMatrix read_features(std::istream& is);
FeatureMatrix load_features(const std::filesystem::path& path);

}  // namespace fvad::data
