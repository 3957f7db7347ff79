#include "fvad/data/synthetic.hpp"

#include "fvad/error.hpp"
#include "fvad/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fvad::data {
namespace {

struct EventPlan {
  double cycle_s;        // mean event + gap
  double p_speech;       // probability an event is speech
};

EventPlan plan(const SynthSpec& s) {
  // Events arrive every cycle_s on average; speech share and burst rate
  // follow from p_speech * kMeanEventS / cycle_s = density and
  // (1 - p_speech) * 60 / cycle_s = rate.
  const double cycle = 1.0 / (s.noise_burst_rate / 60.0 + s.speech_density / synth::kMeanEventS);
  return {cycle, s.speech_density * cycle / synth::kMeanEventS};
}

std::int64_t to_frames(double seconds) {
  return static_cast<std::int64_t>(std::llround(seconds * 1000.0 / synth::kHopMs));
}

enum class Kind : std::uint8_t { kSilence, kSpeech, kDroppedSpeech, kBurst };

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& m) { throw InvalidConfig("synthetic spec: " + m); };
  if (!(speech_density > 0.0 && speech_density < 1.0)) fail("speech_density must be in (0, 1)");
  if (!(ptm_dropout >= 0.0 && ptm_dropout < 1.0)) fail("ptm_dropout must be in [0, 1)");
  if (!(noise_burst_rate >= 0.0)) fail("noise_burst_rate must be nonnegative");
  if (d_mfcc_like < 1 || d_ptm_like < 1) fail("stream dims must be >= 1");
  if (n_files < 3) fail("need at least 3 files for train/dev/test splits");
  if (!(file_s >= synth::kEventMaxS)) fail("file_s must cover at least one event");
  if (speech_density + synth::kMeanEventS * noise_burst_rate / 60.0 >= 1.0) {
    fail("speech_density and noise_burst_rate leave no room for silence");
  }
}

Utterance generate_synthetic_file(const SynthSpec& spec, int file_index, SynthFileInfo* info) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(file_index)));
  const EventPlan p = plan(spec);
  const double mean_gap = p.cycle_s - synth::kMeanEventS;
  const std::int64_t total = to_frames(spec.file_s);
  const std::int64_t ev_lo = to_frames(synth::kEventMinS);
  const std::int64_t ev_hi = to_frames(synth::kEventMaxS);
  // Gaps are a short floor plus an exponential tail. With bounded gaps, a
  // silent run longer than the maximum gap would give away dropped speech.
  const double gap_floor = std::min(synth::kMinGapS, 0.5 * mean_gap);
  auto next_gap = [&] {
    const double g = gap_floor - (mean_gap - gap_floor) * std::log1p(-rng.uniform());
    return std::max<std::int64_t>(1, to_frames(g));
  };

  std::vector<Kind> kind(static_cast<std::size_t>(total), Kind::kSilence);
  std::vector<Segment> speech, bursts, dropped;
  const double hop_s = synth::kHopMs / 1000.0;
  std::int64_t t = 0;
  while (true) {
    t += next_gap();
    if (t >= total) break;
    const std::int64_t len =
        ev_lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(ev_hi - ev_lo + 1)));
    const std::int64_t end = std::min(total, t + len);
    const bool is_speech = rng.bernoulli(p.p_speech);
    const bool is_dropped = rng.bernoulli(spec.ptm_dropout);
    Kind k = Kind::kBurst;
    const Segment seg{static_cast<double>(t) * hop_s, static_cast<double>(end) * hop_s};
    if (is_speech) {
      speech.push_back(seg);
      k = is_dropped ? Kind::kDroppedSpeech : Kind::kSpeech;
      if (is_dropped) dropped.push_back(seg);
    } else {
      bursts.push_back(seg);
    }
    for (std::int64_t i = t; i < end; ++i) kind[static_cast<std::size_t>(i)] = k;
    t = end;
  }

  const int da = spec.d_mfcc_like;
  const int db = spec.d_ptm_like;
  FeatureMatrix a{RowMatrixF(total, da), synth::kHopMs, "mfcc"};
  FeatureMatrix b{RowMatrixF(total, db), synth::kHopMs, "ptm:synthetic"};
  for (std::int64_t i = 0; i < total; ++i) {
    const Kind k = kind[static_cast<std::size_t>(i)];
    const float energy = k == Kind::kSilence ? 0.0f : synth::kEnergyMean;
    for (int d = 0; d < da; ++d) {
      a.data(i, d) = energy + synth::kNoiseStd * static_cast<float>(rng.normal());
    }
    for (int d = 0; d < db; ++d) {
      float mean = 0.0f;
      if (k == Kind::kSpeech) mean = synth::kSpeechMean;
      if (k == Kind::kBurst) mean = d < db / 2 ? synth::kBurstMean : -synth::kBurstMean;
      b.data(i, d) = mean + synth::kNoiseStd * static_cast<float>(rng.normal());
    }
  }

  char id[32];
  std::snprintf(id, sizeof(id), "synth%04d", file_index);
  Utterance u;
  u.id = id;
  u.mfcc = std::move(a);
  u.ptm = std::move(b);
  u.reference = Timeline(std::move(speech));
  if (info != nullptr) {
    info->bursts = Timeline(std::move(bursts));
    info->dropped = Timeline(std::move(dropped));
  }
  return u;
}

SynthDataset generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const int n_dev = std::max(1, static_cast<int>(std::lround(0.2 * spec.n_files)));
  const int n_test = n_dev;
  const int n_train = spec.n_files - n_dev - n_test;
  SynthDataset out;
  for (int i = 0; i < spec.n_files; ++i) {
    SynthFileInfo info;
    Utterance u = generate_synthetic_file(spec, i, &info);
    if (i < n_train) {
      out.data.train.push_back(std::move(u));
      out.train_info.push_back(std::move(info));
    } else if (i < n_train + n_dev) {
      out.data.dev.push_back(std::move(u));
      out.dev_info.push_back(std::move(info));
    } else {
      out.data.test.push_back(std::move(u));
      out.test_info.push_back(std::move(info));
    }
  }
  return out;
}

}  // namespace fvad::data
