#include "fvad/data/feature_file.hpp"

#include "fvad/binary_io.hpp"

#include <fstream>

namespace fvad::data {

void write_features(std::ostream& os, const FeatureMatrix& fm) {
  os.write("FVAD", 4);
  io::put_u32(os, kFeatureFileVersion);
  io::put_f32(os, static_cast<float>(fm.hop_ms));
  io::put_u32(os, static_cast<std::uint32_t>(fm.frames()));
  io::put_u32(os, static_cast<std::uint32_t>(fm.dims()));
  io::put_u32(os, static_cast<std::uint32_t>(fm.source_tag.size()));
  os.write(fm.source_tag.data(), static_cast<std::streamsize>(fm.source_tag.size()));
  for (Eigen::Index i = 0; i < fm.data.size(); ++i) io::put_f32(os, fm.data.data()[i]);
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& fm) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write feature file: " + path.string());
  write_features(os, fm);
  if (!os) throw IoError("failed writing feature file: " + path.string());
}

FeatureMatrix read_features(std::istream& is) {
  if (io::get_bytes(is, 4, "magic") != "FVAD") throw ParseError("feature file: bad magic");
  const std::uint32_t version = io::get_u32(is, "version");
  if (version != kFeatureFileVersion) {
    throw ParseError("feature file: unsupported version " + std::to_string(version));
  }
  FeatureMatrix fm;
  fm.hop_ms = io::get_f32(is, "hop_ms");
  if (!(fm.hop_ms > 0.0)) throw ParseError("feature file: hop_ms must be positive");
  const std::uint32_t frames = io::get_u32(is, "T");
  const std::uint32_t dims = io::get_u32(is, "D");
  const std::uint32_t tag_len = io::get_u32(is, "tag length");
  fm.source_tag = io::get_bytes(is, tag_len, "source tag");
  fm.data.resize(frames, dims);
  for (Eigen::Index i = 0; i < fm.data.size(); ++i) fm.data.data()[i] = io::get_f32(is, "payload");
  return fm;
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature file: " + path.string());
  try {
    return read_features(is);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace fvad::data
