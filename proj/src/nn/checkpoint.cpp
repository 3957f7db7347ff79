#include "fvad/nn/checkpoint.hpp"

#include "fvad/binary_io.hpp"

#include <fstream>

namespace fvad::nn {
namespace {

constexpr char kMagic[] = "FVCK1\n";
constexpr std::size_t kMagicLen = 6;

}  // namespace

void write_checkpoint(std::ostream& os, const ParamStore<float>& params,
                      const nlohmann::json& config) {
  nlohmann::json manifest;
  manifest["config"] = config;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& e : params.entries()) {
    manifest["tensors"].push_back({{"name", e.name}, {"shape", e.shape}});
  }
  const std::string text = manifest.dump();
  os.write(kMagic, kMagicLen);
  io::put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : params.entries()) {
    for (Index i = 0; i < e.value.size(); ++i) io::put_f32(os, e.value.data()[i]);
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params,
                     const nlohmann::json& config) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint: " + path.string());
  write_checkpoint(os, params, config);
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(std::istream& is) {
  if (io::get_bytes(is, kMagicLen, "checkpoint magic") != std::string(kMagic, kMagicLen)) {
    throw ParseError("not an FVCK1 checkpoint");
  }
  const std::uint32_t len = io::get_u32(is, "manifest length");
  const std::string text = io::get_bytes(is, len, "manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  ck.config = manifest.value("config", nlohmann::json::object());
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array()) {
    throw ParseError("checkpoint manifest lacks a tensors list");
  }
  for (const auto& t : manifest["tensors"]) {
    const std::string name = t.at("name").get<std::string>();
    const Shape shape = t.at("shape").get<Shape>();
    const auto [rows, cols] = matrix_dims(shape);
    Matrix<float> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = io::get_f32(is, "tensor data");
    ck.params.add(name, shape, std::move(m));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  return read_checkpoint(is);
}

}  // namespace fvad::nn
