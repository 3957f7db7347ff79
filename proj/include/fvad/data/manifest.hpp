#pragma once

#include "fvad/data/chunking.hpp"
#include "fvad/data/synthetic.hpp"
#include "fvad/dsp/mfcc.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fvad::data {

// One JSON line of a dataset manifest. Paths are relative to the manifest's
// directory unless absolute. `rttm` names the reference file; when absent,
// "reference.rttm" next to the manifest is used.
struct ManifestEntry {
  std::string file_id;
  std::optional<std::string> wav;
  std::optional<std::string> mfcc_path;
  std::optional<std::string> ptm_path;
  std::string rttm_key;
  std::string split;
  std::optional<std::string> rttm;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// Loads every entry: features from .fvad files, MFCC extracted from the WAV
// when only audio is given, streams aligned, references looked up by
// rttm_key (a missing key means no speech).
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const dsp::MfccConfig& mfcc_cfg = {});

// Writes <id>.mfcc.fvad, <id>.ptm.fvad, reference.rttm and manifest.jsonl into dir.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);

}  // namespace fvad::data
