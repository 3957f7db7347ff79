#pragma once

#include "fvad/data/chunking.hpp"
#include "fvad/data/timeline.hpp"

#include <cstdint>
#include <vector>

namespace fvad::data {

// Two-stream benchmark with built-in complementary failure modes.
//
// The file is a sequence of events separated by silent gaps. An event is
// either speech or a noise burst; both draw their length from the same
// distribution, so event duration says nothing about the class.
//
//   stream A ("mfcc-like", energy cue): mean kEnergyMean on every dim for
//     speech and bursts alike, 0 in silence.
//   stream B ("ptm-like", contextual cue): mean kSpeechMean on speech,
//     a +/-kBurstMean pattern (first half +, second half -) on bursts,
//     0 in silence. Dropped speech events have their B signal zeroed.
//
// Every frame adds i.i.d. N(0, kNoiseStd^2) noise per dim. A-only models
// cannot tell bursts from speech (false alarms); B-only models cannot tell
// dropped speech from silence (misses); together the four cases separate.
struct SynthSpec {
  std::uint64_t seed = 0;
  int n_files = 20;
  double file_s = 60.0;
  double speech_density = 0.5;
  double noise_burst_rate = 4.0;  // bursts per minute
  double ptm_dropout = 0.15;      // expected fraction of speech with B zeroed
  int d_mfcc_like = 13;
  int d_ptm_like = 32;

  // Throws InvalidConfig, including when density and burst rate cannot both
  // be met (speech_density + kMeanEventS * rate / 60 must stay below 1).
  void validate() const;
};

namespace synth {
inline constexpr double kHopMs = 20.0;
inline constexpr double kEventMinS = 0.5;
inline constexpr double kEventMaxS = 2.5;
inline constexpr double kMeanEventS = 1.5;
inline constexpr double kMinGapS = 0.2;
inline constexpr float kEnergyMean = 1.5f;
inline constexpr float kSpeechMean = 1.0f;
inline constexpr float kBurstMean = 1.0f;
inline constexpr float kNoiseStd = 1.0f;
}  // namespace synth

struct SynthFileInfo {
  Timeline bursts;   // noise-burst events
  Timeline dropped;  // speech events with stream B zeroed
};

struct SynthDataset {
  Dataset data;
  // Indexed like data.train / dev / test.
  std::vector<SynthFileInfo> train_info;
  std::vector<SynthFileInfo> dev_info;
  std::vector<SynthFileInfo> test_info;
};

// Deterministic in spec. Files are split 60/20/20 in generation order.
SynthDataset generate_synthetic(const SynthSpec& spec);

// One file; file_index selects the independent per-file random stream.
Utterance generate_synthetic_file(const SynthSpec& spec, int file_index, SynthFileInfo* info);

}  // namespace fvad::data
