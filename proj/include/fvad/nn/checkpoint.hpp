#pragma once

#include "fvad/nn/tensor.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>

namespace fvad::nn {

// FVCK1 container: the line "FVCK1\n", a u32 little-endian byte length, a
// UTF-8 JSON manifest {"config": ..., "tensors": [{"name", "shape"}, ...]},
// then every tensor as float32 little-endian in manifest order.
struct Checkpoint {
  nlohmann::json config;
  ParamStore<float> params;
};

void write_checkpoint(std::ostream& os, const ParamStore<float>& params,
                      const nlohmann::json& config);
void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params,
                     const nlohmann::json& config);

Checkpoint read_checkpoint(std::istream& is);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fvad::nn
