#include "doctest.h"

#include "fvad/data/chunking.hpp"
#include "fvad/data/feature_file.hpp"
#include "fvad/data/manifest.hpp"
#include "fvad/data/rttm.hpp"
#include "fvad/data/synthetic.hpp"
#include "fvad/data/timeline.hpp"
#include "fvad/error.hpp"

#include <filesystem>
#include <sstream>

using namespace fvad;
using namespace fvad::data;

namespace {

FeatureMatrix ramp(Eigen::Index frames, Eigen::Index dims, const std::string& tag = "mfcc") {
  FeatureMatrix fm;
  fm.data.resize(frames, dims);
  for (Eigen::Index i = 0; i < fm.data.size(); ++i) fm.data.data()[i] = 0.25f * static_cast<float>(i);
  fm.source_tag = tag;
  return fm;
}

Utterance utterance(double seconds) {
  Utterance u;
  u.id = "u";
  u.mfcc = ramp(static_cast<Eigen::Index>(std::lround(seconds * 50)), 2);
  u.ptm = ramp(u.mfcc->frames(), 3, "ptm:test");
  u.reference = Timeline({{0.5, 1.0}});
  return u;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fvad_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("timeline normalization and algebra") {
  const Timeline a({{2.0, 3.0}, {0.0, 1.0}, {0.5, 1.5}, {3.0, 4.0}});
  REQUIRE(a.size() == 2);
  CHECK(a.segments()[0] == Segment{0.0, 1.5});
  CHECK(a.segments()[1] == Segment{2.0, 4.0});
  CHECK(a.duration() == doctest::Approx(3.5));
  const Timeline b({{1.0, 2.5}});
  CHECK(a.intersect(b) == Timeline({{1.0, 1.5}, {2.0, 2.5}}));
  CHECK(a.subtract(b) == Timeline({{0.0, 1.0}, {2.5, 4.0}}));
  CHECK(a.unite(b) == Timeline({{0.0, 4.0}}));
  CHECK(a.complement(0.0, 5.0) == Timeline({{1.5, 2.0}, {4.0, 5.0}}));
  CHECK(a.clip(1.0, 3.0) == Timeline({{1.0, 1.5}, {2.0, 3.0}}));
  CHECK(a.contains(0.0));
  CHECK_FALSE(a.contains(1.5));
  CHECK_THROWS_AS(Timeline({{1.0, 1.0}}), InvalidInput);
}

TEST_CASE("rttm parsing") {
  SUBCASE("start plus duration") {
    const auto m = parse_rttm("SPEAKER f1 1 0.50 1.25 <NA> <NA> spkA <NA> <NA>\n");
    CHECK(m.at("f1") == Timeline({{0.5, 1.75}}));
  }
  SUBCASE("speaker turns are united") {
    const auto m = parse_rttm(
        "SPEAKER f1 1 0 2 <NA> <NA> a <NA> <NA>\nSPEAKER f1 1 1 2 <NA> <NA> b <NA> <NA>\n");
    CHECK(m.at("f1") == Timeline({{0.0, 3.0}}));
  }
  SUBCASE("empty input, comments and other record types") {
    CHECK(parse_rttm("").empty());
    CHECK(parse_rttm("# comment\nSPKR-INFO f1 1 <NA> <NA> <NA> unknown a <NA> <NA>\n").empty());
  }
  SUBCASE("errors carry the line number") {
    try {
      parse_rttm("SPEAKER f1 1 0 1 <NA> <NA> a <NA> <NA>\nSPEAKER f1 1 x 1 <NA> <NA> a <NA> <NA>\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_rttm("SPEAKER f1 1 0 0 <NA> <NA> a <NA> <NA>\n"), ParseError);
    CHECK_THROWS_AS(parse_rttm("SPEAKER f1 1 0 -1 <NA> <NA> a <NA> <NA>\n"), ParseError);
    CHECK_THROWS_AS(parse_rttm("SPEAKER f1 1 0\n"), ParseError);
  }
}

TEST_CASE("rttm serialize then parse is identity") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    RttmMap m;
    for (int f = 0; f < 3; ++f) {
      Timeline tl;
      double t = 0.0;
      for (int s = 0; s < 5; ++s) {
        t += 0.01 + rng.uniform(0.0, 2.0);
        const double end = t + 0.01 + rng.uniform(0.0, 3.0);
        tl.add({t, end});
        t = end;
      }
      m["file" + std::to_string(f)] = tl;
    }
    CHECK(parse_rttm(serialize_rttm(m)) == m);
  }
}

TEST_CASE("frame labels use half-open intervals at frame centres") {
  CHECK(labels_from_timeline(Timeline({{0.030, 0.050}}), 5, 20.0) ==
        std::vector<std::uint8_t>{0, 1, 0, 0, 0});
  CHECK(labels_from_timeline(Timeline({{0.0, 1.0}}), 50, 20.0) ==
        std::vector<std::uint8_t>(50, 1));
  CHECK(labels_from_timeline(Timeline{}, 7, 20.0) == std::vector<std::uint8_t>(7, 0));
}

TEST_CASE("label duration is within one hop per boundary") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Timeline tl;
    for (int s = 0; s < 6; ++s) {
      const double a = rng.uniform(0.0, 9.5);
      tl.add({a, a + rng.uniform(0.001, 0.5)});
    }
    const auto labels = labels_from_timeline(tl, 500, 20.0);
    double speech = 0.0;
    for (auto l : labels) speech += l * 0.020;
    CHECK(std::abs(speech - tl.duration()) <= 0.020 * 2 * tl.size() + 1e-9);
    CHECK(labels_from_timeline(timeline_from_labels(labels, 20.0), 500, 20.0) == labels);
  }
}

TEST_CASE("feature file round trip is byte identical") {
  const FeatureMatrix fm = ramp(7, 3, "ptm:wavlm");
  std::stringstream ss;
  write_features(ss, fm);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "FVAD");
  CHECK(bytes.size() == 4 + 4 + 4 + 4 + 4 + 4 + 9 + 7 * 3 * 4);
  const FeatureMatrix back = read_features(ss);
  CHECK(back.source_tag == "ptm:wavlm");
  CHECK(back.hop_ms == 20.0);
  CHECK(back.data == fm.data);
  std::stringstream again;
  write_features(again, back);
  CHECK(again.str() == bytes);

  std::stringstream bad_magic("FVAX" + bytes.substr(4));
  CHECK_THROWS_AS(read_features(bad_magic), ParseError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 1));
  CHECK_THROWS_AS(read_features(truncated), ParseError);
}

TEST_CASE("stream alignment tolerates two frames") {
  FeatureMatrix a = ramp(100, 2), b = ramp(102, 3);
  align_streams(a, b);
  CHECK(a.frames() == 100);
  CHECK(b.frames() == 100);
  FeatureMatrix c = ramp(100, 2), d = ramp(103, 3);
  CHECK_THROWS_AS(align_streams(c, d), FrameGridMismatch);
  FeatureMatrix e = ramp(10, 2), f = ramp(10, 2);
  f.hop_ms = 10.0;
  CHECK_THROWS_AS(align_streams(e, f), FrameGridMismatch);
}

TEST_CASE("evaluation chunks tile from zero") {
  const auto ten = make_chunks(utterance(10.0), 2.0, ChunkMode::kEval);
  REQUIRE(ten.size() == 5);
  for (std::size_t i = 0; i < ten.size(); ++i) {
    CHECK(ten[i].frames == 100);
    CHECK(ten[i].start_frame == static_cast<Eigen::Index>(100 * i));
  }
  const auto rem = make_chunks(utterance(2.5), 2.0, ChunkMode::kEval);
  REQUIRE(rem.size() == 2);
  CHECK(rem[0].frames == 100);
  CHECK(rem[1].frames == 25);
  CHECK(rem[1].start_s == doctest::Approx(2.0));
  CHECK(rem[1].mfcc->rows() == 25);
  CHECK(rem[0].labels[25] == 1.0f);
  CHECK(rem[0].labels[24] == 0.0f);
  CHECK(chunk_frames(2.0, 20.0) == 100);
}

TEST_CASE("training chunks are seeded and sized") {
  const Utterance u = utterance(9.0);
  Rng r1(5), r2(5);
  const auto a = make_chunks(u, 2.0, ChunkMode::kTrain, &r1);
  const auto b = make_chunks(u, 2.0, ChunkMode::kTrain, &r2);
  REQUIRE(a.size() == 4);
  REQUIRE(b.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].start_frame == b[i].start_frame);
    CHECK(a[i].frames == 100);
    CHECK(a[i].start_frame + 100 <= 450);
    CHECK(*a[i].mfcc == u.mfcc->data.middleRows(a[i].start_frame, 100));
  }
  Rng r3(5);
  const auto short_file = make_chunks(utterance(1.0), 2.0, ChunkMode::kTrain, &r3);
  REQUIRE(short_file.size() == 1);
  CHECK(short_file[0].frames == 50);

  Utterance empty;
  empty.mfcc = FeatureMatrix{};
  CHECK(make_chunks(empty, 2.0, ChunkMode::kEval).empty());
}

TEST_CASE("synthetic dataset shape and determinism") {
  SynthSpec spec;
  spec.n_files = 10;
  spec.file_s = 20.0;
  const auto a = generate_synthetic(spec);
  CHECK(a.data.train.size() == 6);
  CHECK(a.data.dev.size() == 2);
  CHECK(a.data.test.size() == 2);
  const auto& u = a.data.train.front();
  CHECK(u.mfcc->frames() == 1000);
  CHECK(u.mfcc->dims() == 13);
  CHECK(u.ptm->dims() == 32);
  CHECK(u.ptm->source_tag == "ptm:synthetic");

  const auto b = generate_synthetic(spec);
  CHECK(b.data.test.back().ptm->data == a.data.test.back().ptm->data);
  CHECK(b.data.test.back().reference == a.data.test.back().reference);
  spec.seed = 1;
  const auto c = generate_synthetic(spec);
  CHECK(c.data.test.back().reference != a.data.test.back().reference);
}

TEST_CASE("synthetic spec validation") {
  SynthSpec s;
  s.speech_density = 0.0;
  CHECK_THROWS_AS(s.validate(), InvalidConfig);
  s.speech_density = 1.0;
  CHECK_THROWS_AS(s.validate(), InvalidConfig);
  s.speech_density = 0.95;
  CHECK_THROWS_AS(s.validate(), InvalidConfig);
  s = {};
  s.n_files = 2;
  CHECK_THROWS_AS(s.validate(), InvalidConfig);
  s = {};
  s.d_ptm_like = 0;
  CHECK_THROWS_AS(s.validate(), InvalidConfig);
}

TEST_CASE("synthetic speech density and burst rate") {
  SynthSpec spec;
  spec.file_s = 600.0;
  spec.n_files = 3;
  double speech = 0.0, bursts = 0.0, dropped = 0.0;
  std::size_t n_bursts = 0;
  for (int i = 0; i < 3; ++i) {
    SynthFileInfo info;
    const auto u = generate_synthetic_file(spec, i, &info);
    speech += u.reference.duration();
    dropped += info.dropped.duration();
    bursts += info.bursts.duration();
    n_bursts += info.bursts.size();
    CHECK(u.reference.intersect(info.bursts).empty());
  }
  CHECK(speech / 1800.0 == doctest::Approx(0.5).epsilon(0.1));
  CHECK(n_bursts / 30.0 == doctest::Approx(4.0).epsilon(0.15));
  CHECK(dropped / speech == doctest::Approx(0.15).epsilon(0.35));
}

TEST_CASE("noise bursts look like speech in stream A and not in stream B") {
  SynthSpec spec;
  spec.file_s = 300.0;
  SynthFileInfo info;
  const auto u = generate_synthetic_file(spec, 0, &info);
  const auto speech = labels_from_timeline(u.reference.subtract(info.dropped), u.frames(), 20.0);
  const auto burst = labels_from_timeline(info.bursts, u.frames(), 20.0);
  const auto any = labels_from_timeline(u.reference, u.frames(), 20.0);

  auto frame_mean = [&](const FeatureMatrix& fm, const std::vector<std::uint8_t>& mask, bool on) {
    double s = 0.0;
    long n = 0;
    for (Eigen::Index t = 0; t < fm.frames(); ++t) {
      if ((mask[t] != 0) != on) continue;
      s += fm.data.row(t).cast<double>().mean();
      ++n;
    }
    return s / n;
  };
  std::vector<std::uint8_t> not_speech(any.size());
  for (std::size_t i = 0; i < any.size(); ++i) not_speech[i] = any[i] ? 0 : 1;

  // sigma is the per-dimension noise std.
  const double sigma = synth::kNoiseStd;
  CHECK(std::abs(frame_mean(*u.mfcc, burst, true) - frame_mean(*u.mfcc, speech, true)) < 2 * sigma);
  CHECK(std::abs(frame_mean(*u.ptm, burst, true) - frame_mean(*u.ptm, not_speech, true)) < 2 * sigma);
  CHECK(std::abs(frame_mean(*u.ptm, burst, true) - frame_mean(*u.ptm, speech, true)) > 0.5 * sigma);
}

TEST_CASE("without bursts or dropout either stream is linearly separable") {
  SynthSpec spec;
  spec.noise_burst_rate = 0.0;
  spec.ptm_dropout = 0.0;
  spec.n_files = 5;
  spec.file_s = 120.0;
  const auto ds = generate_synthetic(spec);
  for (bool use_a : {true, false}) {
    // Oracle: class means from the training files, threshold at the midpoint
    // along the mean difference.
    const Eigen::Index d = use_a ? 13 : 32;
    Eigen::VectorXd mu[2] = {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
    double n[2] = {0, 0};
    for (const auto& u : ds.data.train) {
      const auto& fm = use_a ? *u.mfcc : *u.ptm;
      const auto l = u.labels();
      for (Eigen::Index t = 0; t < fm.frames(); ++t) {
        mu[l[t]] += fm.data.row(t).cast<double>().transpose();
        n[l[t]] += 1;
      }
    }
    mu[0] /= n[0];
    mu[1] /= n[1];
    const Eigen::VectorXd w = mu[1] - mu[0];
    const double bias = -0.5 * w.dot(mu[0] + mu[1]);
    long correct = 0, total = 0;
    for (const auto* split : {&ds.data.dev, &ds.data.test}) {
      for (const auto& u : *split) {
        const auto& fm = use_a ? *u.mfcc : *u.ptm;
        const auto l = u.labels();
        for (Eigen::Index t = 0; t < fm.frames(); ++t) {
          const bool pred = fm.data.row(t).cast<double>().dot(w) + bias > 0;
          correct += pred == (l[t] == 1);
          ++total;
        }
      }
    }
    CHECK_MESSAGE(static_cast<double>(correct) / total > 0.99, (use_a ? "stream A" : "stream B"));
  }
}

TEST_CASE("manifest and dataset round trip") {
  SynthSpec spec;
  spec.n_files = 5;
  spec.file_s = 10.0;
  const auto ds = generate_synthetic(spec).data;
  const auto dir = scratch("manifest");
  write_dataset(dir, ds);
  const auto entries = read_manifest(dir / "manifest.jsonl");
  REQUIRE(entries.size() == 5);
  CHECK(entries[0].split == "train");
  CHECK(entries[0].mfcc_path.has_value());

  const auto back = load_dataset(dir / "manifest.jsonl");
  REQUIRE(back.test.size() == ds.test.size());
  CHECK(back.test[0].id == ds.test[0].id);
  CHECK(back.test[0].ptm->data == ds.test[0].ptm->data);
  CHECK(back.test[0].reference == ds.test[0].reference);
  CHECK(back.split("dev").size() == 1);
  CHECK_THROWS_AS(back.split("holdout"), InvalidInput);

  write_manifest(dir / "bad.jsonl", {{"x", std::nullopt, std::nullopt, std::nullopt, "x", "eval", std::nullopt}});
  CHECK_THROWS_AS(load_dataset(dir / "bad.jsonl"), ParseError);
  std::filesystem::remove_all(dir);
}
