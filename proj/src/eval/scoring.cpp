#include "fvad/eval/scoring.hpp"

#include "fvad/error.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

namespace fvad::eval {

FileScore score(const data::Timeline& ref_in, const data::Timeline& hyp_in, double file_dur_s,
                const ScoreConfig& cfg) {
  if (!(file_dur_s > 0.0)) throw InvalidInput("score: file duration must be positive");
  data::Timeline universe({{0.0, file_dur_s}});
  data::Timeline ref = ref_in.clip(0.0, file_dur_s);
  data::Timeline hyp = hyp_in.clip(0.0, file_dur_s);
  if (cfg.collar_s > 0.0) {
    std::vector<data::Segment> zone;
    for (const auto& s : ref.segments()) {
      zone.push_back({s.start - cfg.collar_s, s.start + cfg.collar_s});
      zone.push_back({s.end - cfg.collar_s, s.end + cfg.collar_s});
    }
    const data::Timeline no_score(std::move(zone));
    universe = universe.subtract(no_score);
    ref = ref.subtract(no_score);
    hyp = hyp.subtract(no_score);
  }
  FileScore fs;
  fs.total_speech_s = ref.duration();
  fs.total_nonspeech_s = universe.duration() - fs.total_speech_s;
  if (fs.total_speech_s <= 0.0) throw UndefinedMetric("reference contains no speech");
  fs.miss_s = ref.subtract(hyp).duration();
  fs.fa_s = hyp.subtract(ref).duration();
  fs.mr = 100.0 * fs.miss_s / fs.total_speech_s;
  fs.far = 100.0 * fs.fa_s / fs.total_speech_s;
  fs.der = fs.far + fs.mr;
  return fs;
}

DetectionReport score_files(const std::vector<ScoredFile>& files, const ScoreConfig& cfg) {
  std::vector<const ScoredFile*> order;
  for (const auto& f : files) order.push_back(&f);
  std::sort(order.begin(), order.end(),
            [](const ScoredFile* a, const ScoredFile* b) { return a->id < b->id; });

  DetectionReport r;
  for (const ScoredFile* f : order) {
    try {
      const FileScore fs = score(f->ref, f->hyp, f->duration_s, cfg);
      r.per_file[f->id] = fs;
      r.total_speech_s += fs.total_speech_s;
      r.total_nonspeech_s += fs.total_nonspeech_s;
      r.fa_s += fs.fa_s;
      r.miss_s += fs.miss_s;
    } catch (const UndefinedMetric&) {
      std::cerr << "warning: '" << f->id << "' has no reference speech; excluded from scoring\n";
      r.excluded.push_back(f->id);
    }
  }
  if (r.total_speech_s <= 0.0) throw UndefinedMetric("no reference speech in any file");
  r.mr = 100.0 * r.miss_s / r.total_speech_s;
  r.far = 100.0 * r.fa_s / r.total_speech_s;
  r.der = r.far + r.mr;
  return r;
}

nlohmann::json DetectionReport::to_json() const {
  nlohmann::json j;
  j["der"] = der;
  j["far"] = far;
  j["mr"] = mr;
  j["total_speech_s"] = total_speech_s;
  j["total_nonspeech_s"] = total_nonspeech_s;
  j["fa_s"] = fa_s;
  j["miss_s"] = miss_s;
  j["per_file"] = nlohmann::json::object();
  for (const auto& [id, fs] : per_file) {
    j["per_file"][id] = {{"der", fs.der},
                         {"far", fs.far},
                         {"mr", fs.mr},
                         {"total_speech_s", fs.total_speech_s},
                         {"total_nonspeech_s", fs.total_nonspeech_s},
                         {"fa_s", fs.fa_s},
                         {"miss_s", fs.miss_s}};
  }
  j["excluded"] = excluded;
  return j;
}

std::string DetectionReport::to_table() const {
  std::size_t width = 5;
  for (const auto& [id, fs] : per_file) width = std::max(width, id.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-*s %8s %8s %8s\n", static_cast<int>(width), "file", "DER%",
                "FAR%", "MR%");
  out += buf;
  for (const auto& [id, fs] : per_file) {
    std::snprintf(buf, sizeof(buf), "%-*s %8.2f %8.2f %8.2f\n", static_cast<int>(width),
                  id.c_str(), fs.der, fs.far, fs.mr);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-*s %8.2f %8.2f %8.2f\n", static_cast<int>(width), "TOTAL",
                der, far, mr);
  out += buf;
  return out;
}

}  // namespace fvad::eval
