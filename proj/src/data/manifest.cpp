#include "fvad/data/manifest.hpp"

#include "fvad/data/feature_file.hpp"
#include "fvad/data/rttm.hpp"
#include "fvad/error.hpp"

#include "json.hpp"

#include <fstream>
#include <map>

namespace fvad::data {
namespace {

using nlohmann::json;

std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ManifestEntry e;
      e.file_id = j.at("file_id").get<std::string>();
      e.wav = opt_string(j, "wav");
      e.mfcc_path = opt_string(j, "mfcc_path");
      e.ptm_path = opt_string(j, "ptm_path");
      e.rttm_key = j.value("rttm_key", e.file_id);
      e.split = j.at("split").get<std::string>();
      e.rttm = opt_string(j, "rttm");
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest: " + path.string());
  for (const auto& e : entries) {
    json j;
    j["file_id"] = e.file_id;
    if (e.wav) j["wav"] = *e.wav;
    if (e.mfcc_path) j["mfcc_path"] = *e.mfcc_path;
    if (e.ptm_path) j["ptm_path"] = *e.ptm_path;
    j["rttm_key"] = e.rttm_key;
    j["split"] = e.split;
    if (e.rttm) j["rttm"] = *e.rttm;
    os << j.dump() << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& manifest_path, const dsp::MfccConfig& mfcc_cfg) {
  const auto entries = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::map<std::string, RttmMap> rttm_cache;
  Dataset ds;
  for (const auto& e : entries) {
    const std::string rttm_path = resolve(base, e.rttm.value_or("reference.rttm")).string();
    auto it = rttm_cache.find(rttm_path);
    if (it == rttm_cache.end()) it = rttm_cache.emplace(rttm_path, read_rttm(rttm_path)).first;

    Utterance u;
    u.id = e.file_id;
    if (e.mfcc_path) {
      u.mfcc = load_features(resolve(base, *e.mfcc_path));
    } else if (e.wav) {
      u.mfcc = dsp::extract_mfcc(dsp::read_wav(resolve(base, *e.wav)), mfcc_cfg);
    }
    if (e.ptm_path) u.ptm = load_features(resolve(base, *e.ptm_path));
    if (u.mfcc) u.mfcc->validate();
    if (u.ptm) u.ptm->validate();
    if (u.mfcc && u.ptm) align_streams(*u.mfcc, *u.ptm);
    const auto ref = it->second.find(e.rttm_key);
    if (ref != it->second.end()) u.reference = ref->second;

    if (e.split == "train") {
      ds.train.push_back(std::move(u));
    } else if (e.split == "dev") {
      ds.dev.push_back(std::move(u));
    } else if (e.split == "test") {
      ds.test.push_back(std::move(u));
    } else {
      throw ParseError("manifest entry '" + e.file_id + "' has unknown split '" + e.split + "'");
    }
  }
  return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  RttmMap refs;
  std::vector<ManifestEntry> entries;
  const std::pair<const char*, const std::vector<Utterance>*> splits[] = {
      {"train", &ds.train}, {"dev", &ds.dev}, {"test", &ds.test}};
  for (const auto& [name, utts] : splits) {
    for (const Utterance& u : *utts) {
      ManifestEntry e;
      e.file_id = u.id;
      e.rttm_key = u.id;
      e.split = name;
      e.rttm = "reference.rttm";
      if (u.mfcc) {
        e.mfcc_path = u.id + ".mfcc.fvad";
        save_features(dir / *e.mfcc_path, *u.mfcc);
      }
      if (u.ptm) {
        e.ptm_path = u.id + ".ptm.fvad";
        save_features(dir / *e.ptm_path, *u.ptm);
      }
      refs[u.id] = u.reference;
      entries.push_back(std::move(e));
    }
  }
  std::ofstream os(dir / "reference.rttm");
  if (!os) throw IoError("cannot write " + (dir / "reference.rttm").string());
  os << serialize_rttm(refs);
  write_manifest(dir / "manifest.jsonl", entries);
}

}  // namespace fvad::data
