#include "fvad/data/chunking.hpp"

#include "fvad/error.hpp"

#include <cmath>
#include <iostream>

namespace fvad::data {

Eigen::Index Utterance::frames() const {
  if (mfcc) return mfcc->frames();
  if (ptm) return ptm->frames();
  return 0;
}

double Utterance::hop_ms() const {
  if (mfcc) return mfcc->hop_ms;
  if (ptm) return ptm->hop_ms;
  return kDefaultHopMs;
}

double Utterance::duration_s() const { return static_cast<double>(frames()) * hop_ms() / 1000.0; }

std::vector<std::uint8_t> Utterance::labels() const {
  return labels_from_timeline(reference, frames(), hop_ms());
}

const std::vector<Utterance>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw InvalidInput("unknown split '" + name + "'");
}

void align_streams(FeatureMatrix& a, FeatureMatrix& b) {
  if (a.hop_ms != b.hop_ms) {
    throw FrameGridMismatch("streams '" + a.source_tag + "' and '" + b.source_tag +
                            "' have different hops");
  }
  const Eigen::Index diff = std::abs(a.frames() - b.frames());
  if (diff > kMaxFrameSkew) {
    throw FrameGridMismatch("streams '" + a.source_tag + "' (" + std::to_string(a.frames()) +
                            " frames) and '" + b.source_tag + "' (" +
                            std::to_string(b.frames()) + " frames) are misaligned");
  }
  const Eigen::Index t = std::min(a.frames(), b.frames());
  a.data.conservativeResize(t, Eigen::NoChange);
  b.data.conservativeResize(t, Eigen::NoChange);
}

Eigen::Index chunk_frames(double chunk_s, double hop_ms) {
  return static_cast<Eigen::Index>(std::llround(chunk_s * 1000.0 / hop_ms));
}

namespace {

Chunk cut(const Utterance& utt, const std::vector<std::uint8_t>& labels, Eigen::Index start,
          Eigen::Index len) {
  Chunk c;
  c.file_id = utt.id;
  c.hop_ms = utt.hop_ms();
  c.start_frame = start;
  c.frames = len;
  c.start_s = static_cast<double>(start) * c.hop_ms / 1000.0;
  if (utt.mfcc) c.mfcc = utt.mfcc->data.middleRows(start, len);
  if (utt.ptm) c.ptm = utt.ptm->data.middleRows(start, len);
  c.labels.assign(labels.begin() + start, labels.begin() + start + len);
  return c;
}

}  // namespace

std::vector<Chunk> make_chunks(const Utterance& utt, double chunk_s, ChunkMode mode, Rng* rng) {
  if (!(chunk_s > 0.0)) throw InvalidConfig("chunk_s must be positive");
  std::vector<Chunk> out;
  const Eigen::Index total = utt.frames();
  if (total < 1) {
    std::cerr << "warning: skipping '" << utt.id << "': shorter than one frame\n";
    return out;
  }
  if (utt.mfcc && utt.ptm && utt.mfcc->frames() != utt.ptm->frames()) {
    throw FrameGridMismatch("utterance '" + utt.id + "' has unaligned streams");
  }
  const Eigen::Index len = std::max<Eigen::Index>(1, chunk_frames(chunk_s, utt.hop_ms()));
  const auto labels = utt.labels();

  if (mode == ChunkMode::kEval) {
    for (Eigen::Index start = 0; start < total; start += len) {
      out.push_back(cut(utt, labels, start, std::min(len, total - start)));
    }
    return out;
  }

  if (rng == nullptr) throw InvalidInput("training chunks need a random generator");
  if (total <= len) {
    out.push_back(cut(utt, labels, 0, total));
    return out;
  }
  const auto count = static_cast<Eigen::Index>(std::floor(utt.duration_s() / chunk_s));
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto start = static_cast<Eigen::Index>(rng->below(static_cast<std::uint64_t>(total - len + 1)));
    out.push_back(cut(utt, labels, start, len));
  }
  return out;
}

}  // namespace fvad::data
