#pragma once

#include "fvad/data/timeline.hpp"

#include "json.hpp"

#include <map>
#include <string>
#include <vector>

namespace fvad::eval {

struct ScoreConfig {
  // Half-width of the no-score zone around every reference boundary.
  double collar_s = 0.0;
};

// Durations in seconds, rates in percent of reference speech.
struct FileScore {
  double total_speech_s = 0.0;
  double total_nonspeech_s = 0.0;
  double fa_s = 0.0;
  double miss_s = 0.0;
  double far = 0.0;
  double mr = 0.0;
  double der = 0.0;
};

struct DetectionReport {
  double far = 0.0;
  double mr = 0.0;
  double der = 0.0;
  double total_speech_s = 0.0;
  double total_nonspeech_s = 0.0;
  double fa_s = 0.0;
  double miss_s = 0.0;
  std::map<std::string, FileScore> per_file;
  // Files without reference speech; not part of the aggregate.
  std::vector<std::string> excluded;

  nlohmann::json to_json() const;
  // Aligned text table: one row per file plus the pooled total.
  std::string to_table() const;
};

// Exact interval algebra. miss = |ref \ hyp|, fa = |hyp \ ref|; both rates
// use reference speech as denominator so der == far + mr. Throws
// UndefinedMetric when the reference holds no speech.
FileScore score(const data::Timeline& ref, const data::Timeline& hyp, double file_dur_s,
                const ScoreConfig& cfg = {});

struct ScoredFile {
  std::string id;
  data::Timeline ref;
  data::Timeline hyp;
  double duration_s = 0.0;
};

// Sums durations over files (in id order) before dividing. Files whose
// reference is empty are excluded with a warning on stderr.
DetectionReport score_files(const std::vector<ScoredFile>& files, const ScoreConfig& cfg = {});

}  // namespace fvad::eval
