#pragma once

#include "fvad/data/timeline.hpp"
#include "fvad/feature_matrix.hpp"
#include "fvad/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fvad::data {

// One file: its frame-aligned feature streams and reference speech.
struct Utterance {
  std::string id;
  std::optional<FeatureMatrix> mfcc;
  std::optional<FeatureMatrix> ptm;
  Timeline reference;

  // Frame count / hop of the present streams (0 / default if none).
  Eigen::Index frames() const;
  double hop_ms() const;
  double duration_s() const;
  std::vector<std::uint8_t> labels() const;
};

struct Dataset {
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;

  const std::vector<Utterance>& split(const std::string& name) const;
};

// Frame-grid tolerance for streams from different extractors.
inline constexpr Eigen::Index kMaxFrameSkew = 2;

// Truncates both streams to the shorter length when they differ by at most
// kMaxFrameSkew frames; throws FrameGridMismatch otherwise or on unequal hops.
void align_streams(FeatureMatrix& a, FeatureMatrix& b);

struct Chunk {
  std::string file_id;
  double start_s = 0.0;
  Eigen::Index start_frame = 0;
  Eigen::Index frames = 0;
  double hop_ms = kDefaultHopMs;
  std::optional<RowMatrixF> mfcc;
  std::optional<RowMatrixF> ptm;
  std::vector<float> labels;
};

enum class ChunkMode { kTrain, kEval };

// Eval: tiles from frame 0, the final partial chunk keeps its shorter length.
// Train: floor(duration / chunk_s) chunks at uniformly random starts drawn
// from `rng` (one whole-file chunk if the file is shorter than chunk_s).
// Files with no frames are skipped with a warning on stderr.
std::vector<Chunk> make_chunks(const Utterance& utt, double chunk_s, ChunkMode mode,
                               Rng* rng = nullptr);

Eigen::Index chunk_frames(double chunk_s, double hop_ms);

}  // namespace fvad::data
