// fvad: feature extraction, synthetic data, training, evaluation and plotting.
#include "fvad/data/feature_file.hpp"
#include "fvad/data/manifest.hpp"
#include "fvad/data/rttm.hpp"
#include "fvad/data/synthetic.hpp"
#include "fvad/dsp/mfcc.hpp"
#include "fvad/dsp/wav.hpp"
#include "fvad/error.hpp"
#include "fvad/eval/binarize.hpp"
#include "fvad/eval/export.hpp"
#include "fvad/eval/scoring.hpp"
#include "fvad/model/fusion_vad.hpp"
#include "fvad/nn/checkpoint.hpp"
#include "fvad/parallel.hpp"
#include "fvad/train/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#ifndef FVAD_VERSION
#define FVAD_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fvad;

namespace {

// Usage errors detected after parsing (bad combinations of flags).
struct UsageError : Error {
  using Error::Error;
};

std::string fnv1a64_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

struct RunManifest {
  std::string command;
  json config = json::object();
  std::optional<std::uint64_t> seed;
  std::vector<fs::path> inputs;

  void write(const fs::path& path) const {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["version"] = FVAD_VERSION;
    j["inputs"] = json::object();
    for (const auto& p : inputs) j["inputs"][p.generic_string()] = fnv1a64_file(p);
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << j.dump(2) << '\n';
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

// Inputs a manifest pulls in, for hashing.
std::vector<fs::path> manifest_inputs(const fs::path& manifest) {
  std::vector<fs::path> out{manifest};
  const fs::path base = manifest.parent_path();
  auto add = [&](const std::optional<std::string>& p) {
    if (!p) return;
    const fs::path path(*p);
    const fs::path full = path.is_absolute() ? path : base / path;
    if (std::find(out.begin(), out.end(), full) == out.end()) out.push_back(full);
  };
  for (const auto& e : data::read_manifest(manifest)) {
    add(e.wav);
    add(e.mfcc_path);
    add(e.ptm_path);
    add(e.rttm ? e.rttm : std::optional<std::string>("reference.rttm"));
  }
  return out;
}

json mfcc_json(const dsp::MfccConfig& c) {
  return {{"sample_rate_hz", c.sample_rate_hz}, {"window_ms", c.window_ms},
          {"hop_ms", c.hop_ms},                 {"fft_size", c.fft_size},
          {"n_mels", c.n_mels},                 {"n_coeffs", c.n_coeffs},
          {"preemphasis", c.preemphasis}};
}

void add_mfcc_flags(CLI::App* cmd, dsp::MfccConfig& c) {
  cmd->add_option("--n-coeffs", c.n_coeffs, "Cepstral coefficients")->capture_default_str();
  cmd->add_option("--n-mels", c.n_mels, "Mel filters")->capture_default_str();
  cmd->add_option("--fft-size", c.fft_size, "FFT length")->capture_default_str();
  cmd->add_option("--window-ms", c.window_ms, "Analysis window")->capture_default_str();
  cmd->add_option("--preemphasis", c.preemphasis, "Pre-emphasis coefficient")
      ->capture_default_str();
}

// --- extract-mfcc ---------------------------------------------------------

struct ExtractArgs {
  std::string wav;
  std::string wav_dir;
  std::string out;
  dsp::MfccConfig mfcc;
};

int run_extract(const ExtractArgs& a) {
  a.mfcc.validate();
  std::vector<fs::path> wavs;
  if (!a.wav.empty()) {
    wavs.push_back(a.wav);
  } else {
    if (!fs::is_directory(a.wav_dir)) throw IoError("not a directory: " + a.wav_dir);
    for (const auto& entry : fs::directory_iterator(a.wav_dir)) {
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (entry.is_regular_file() && ext == ".wav") wavs.push_back(entry.path());
    }
    std::sort(wavs.begin(), wavs.end());
    if (wavs.empty()) throw InvalidInput("no wav files found in " + a.wav_dir);
  }
  fs::create_directories(a.out);
  for (const auto& w : wavs) {
    FeatureMatrix fm;
    try {
      fm = dsp::extract_mfcc(dsp::read_wav(w), a.mfcc);
    } catch (const NumericalError&) {
      throw;
    } catch (const Error& e) {
      throw InvalidInput(w.string() + ": " + e.what());
    }
    const fs::path out = fs::path(a.out) / (w.stem().string() + ".fvad");
    data::save_features(out, fm);
    std::cout << out.string() << " T=" << fm.frames() << " D=" << fm.dims() << '\n';
  }
  RunManifest m{"extract-mfcc", mfcc_json(a.mfcc), std::nullopt, wavs};
  m.write(fs::path(a.out) / "run.json");
  return 0;
}

// --- synth ----------------------------------------------------------------

struct SynthArgs {
  data::SynthSpec spec;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  const auto ds = data::generate_synthetic(a.spec);
  data::write_dataset(a.out, ds.data);
  RunManifest m{"synth",
                {{"n_files", a.spec.n_files},
                 {"file_s", a.spec.file_s},
                 {"speech_density", a.spec.speech_density},
                 {"noise_burst_rate", a.spec.noise_burst_rate},
                 {"ptm_dropout", a.spec.ptm_dropout},
                 {"d_mfcc_like", a.spec.d_mfcc_like},
                 {"d_ptm_like", a.spec.d_ptm_like}},
                a.spec.seed,
                {}};
  m.write(fs::path(a.out) / "run.json");
  std::cout << "train=" << ds.data.train.size() << " dev=" << ds.data.dev.size()
            << " test=" << ds.data.test.size() << " manifest="
            << (fs::path(a.out) / "manifest.jsonl").string() << '\n';
  return 0;
}

// --- train ----------------------------------------------------------------

struct ModelArgs {
  std::string fusion = "add";
  std::optional<int> d_mfcc;
  std::optional<int> d_ptm;
  model::FusionConfig cfg;
};

void add_model_flags(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--fusion", m.fusion, "none-mfcc | none-ptm | concat | add | xattn")
      ->capture_default_str();
  cmd->add_option("--d-model", m.cfg.d_model, "Shared projection width")->capture_default_str();
  cmd->add_option("--heads", m.cfg.n_heads, "Cross-attention heads")->capture_default_str();
  cmd->add_option("--lstm-hidden", m.cfg.lstm_hidden, "LSTM units per direction")
      ->capture_default_str();
  cmd->add_option("--lstm-layers", m.cfg.lstm_layers, "Stacked BiLSTM layers")
      ->capture_default_str();
  cmd->add_option("--proj-layers", m.cfg.proj_layers, "Dense layers per projection")
      ->capture_default_str();
}

// Feature widths come from the data unless given explicitly.
void resolve_dims(ModelArgs& m, const data::Dataset& ds) {
  m.cfg.mode = model::parse_fusion_mode(m.fusion);
  const data::Utterance* first = nullptr;
  for (const auto* split : {&ds.train, &ds.dev, &ds.test}) {
    if (!split->empty()) {
      first = &split->front();
      break;
    }
  }
  auto pick = [&](const std::optional<int>& flag, const std::optional<FeatureMatrix>& stream,
                  int fallback) {
    if (flag) return *flag;
    if (first != nullptr && stream) return static_cast<int>(stream->dims());
    return fallback;
  };
  m.cfg.d_mfcc = pick(m.d_mfcc, first ? first->mfcc : std::nullopt, m.cfg.d_mfcc);
  m.cfg.d_ptm = pick(m.d_ptm, first ? first->ptm : std::nullopt, m.cfg.d_ptm);
  m.cfg.validate();
}

struct TrainArgs {
  std::string manifest;
  std::string out;
  ModelArgs model;
  train::TrainConfig tc;
  int threads = 0;
};

int run_train(TrainArgs a) {
  a.tc.threads = resolve_threads(a.threads);
  const auto ds = data::load_dataset(a.manifest);
  if (ds.train.empty()) throw InvalidInput("manifest has no train split");
  if (ds.dev.empty()) throw InvalidInput("manifest has no dev split");
  resolve_dims(a.model, ds);
  fs::create_directories(a.out);

  auto result = train::train(a.model.cfg, ds, a.tc, &std::cerr);
  // The checkpoint config is the FusionConfig itself, with the training settings alongside.
  json config = a.model.cfg.to_json();
  config["train"] = a.tc.to_json();
  nn::save_checkpoint(fs::path(a.out) / "best.fvck", result.best_params, config);
  write_text(fs::path(a.out) / "trainlog.json", result.log.to_json().dump(2) + "\n");
  RunManifest m{"train", config, a.tc.seed, manifest_inputs(a.manifest)};
  m.write(fs::path(a.out) / "run.json");

  char line[96];
  std::snprintf(line, sizeof(line), "best_epoch=%d val_auc=%.6f", result.log.best_epoch,
                result.log.best_val_auc);
  std::cout << line << '\n';
  return 0;
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string manifest;
  std::string split = "test";
  std::string report;
  std::string hyp_rttm;
  std::string hyp_out;
  eval::BinarizeConfig bin;
  double collar_s = 0.0;
  int threads = 0;
};

int run_eval(const EvalArgs& a) {
  a.bin.validate();
  if (a.model.empty() && a.hyp_rttm.empty()) throw UsageError("eval needs --model or --hyp-rttm");
  const auto ds = data::load_dataset(a.manifest);
  const auto& utts = ds.split(a.split);
  if (utts.empty()) throw InvalidInput("manifest has no '" + a.split + "' split");

  std::vector<eval::ScoredFile> files;
  std::vector<fs::path> inputs = manifest_inputs(a.manifest);
  json config = {{"split", a.split},
                 {"onset", a.bin.onset},
                 {"offset", a.bin.offset},
                 {"min_on_s", a.bin.min_on_s},
                 {"min_off_s", a.bin.min_off_s},
                 {"collar_s", a.collar_s}};
  if (!a.hyp_rttm.empty()) {
    const auto hyps = data::read_rttm(a.hyp_rttm);
    inputs.emplace_back(a.hyp_rttm);
    for (const auto& u : utts) {
      const auto it = hyps.find(u.id);
      files.push_back({u.id, u.reference, it == hyps.end() ? data::Timeline{} : it->second,
                       u.duration_s()});
    }
  } else {
    const auto ck = nn::load_checkpoint(a.model);
    inputs.emplace_back(a.model);
    const auto cfg = model::FusionConfig::from_json(ck.config);
    const double chunk_s = ck.config.contains("train") ? ck.config["train"].value("chunk_s", 2.0)
                                                       : 2.0;
    config["model"] = cfg.to_json();
    const auto scores =
        train::score_utterances(ck.params, cfg, utts, chunk_s, 32, resolve_threads(a.threads));
    for (std::size_t i = 0; i < utts.size(); ++i) {
      files.push_back(
          {utts[i].id, utts[i].reference, eval::binarize(scores[i], a.bin), utts[i].duration_s()});
    }
  }
  const auto report = eval::score_files(files, {a.collar_s});
  for (const auto& id : report.excluded) {
    std::cerr << "warning: " << id << " has no reference speech; excluded from the aggregate\n";
  }
  std::cout << report.to_table();

  fs::path report_path = a.report;
  if (!report_path.empty()) {
    if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
    write_text(report_path, report.to_json().dump(2) + "\n");
  }
  if (!a.hyp_out.empty()) {
    data::RttmMap hyps;
    for (const auto& f : files) hyps[f.id] = f.hyp;
    write_text(a.hyp_out, data::serialize_rttm(hyps));
  }
  if (!report_path.empty()) {
    RunManifest m{"eval", config, std::nullopt, inputs};
    m.write(report_path.parent_path() / "run.json");
  }
  return 0;
}

// --- count-params ---------------------------------------------------------

struct CountArgs {
  ModelArgs model;
  bool json_out = false;
};

int run_count(CountArgs a) {
  a.model.cfg.mode = model::parse_fusion_mode(a.model.fusion);
  if (a.model.d_mfcc) a.model.cfg.d_mfcc = *a.model.d_mfcc;
  if (a.model.d_ptm) a.model.cfg.d_ptm = *a.model.d_ptm;
  a.model.cfg.validate();
  const auto count = model::count_params(a.model.cfg);
  if (a.json_out) {
    json j = {{"fusion", model::to_string(a.model.cfg.mode)}, {"total", count.total}};
    for (const auto& [name, n] : count.blocks) j["blocks"][name] = n;
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  char line[96];
  for (const auto& [name, n] : count.blocks) {
    std::snprintf(line, sizeof(line), "%-12s %12lld", name.c_str(), static_cast<long long>(n));
    std::cout << line << '\n';
  }
  std::snprintf(line, sizeof(line), "%-12s %12lld", "total", static_cast<long long>(count.total));
  std::cout << line << '\n';
  return 0;
}

// --- plot -----------------------------------------------------------------

struct PlotArgs {
  std::string ref_rttm;
  std::vector<std::string> hyps;  // NAME=PATH
  std::string file_id;
  double duration_s = 0.0;
  std::string out;
};

int run_plot(const PlotArgs& a) {
  const auto refs = data::read_rttm(a.ref_rttm);
  const auto it = refs.find(a.file_id);
  const data::Timeline ref = it == refs.end() ? data::Timeline{} : it->second;
  std::vector<eval::NamedTimeline> lanes;
  std::vector<fs::path> inputs{a.ref_rttm};
  double end = ref.empty() ? 0.0 : ref.segments().back().end;
  for (const auto& spec : a.hyps) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--hyp expects NAME=RTTM: " + spec);
    const std::string path = spec.substr(eq + 1);
    const auto hyps = data::read_rttm(path);
    inputs.emplace_back(path);
    const auto h = hyps.find(a.file_id);
    lanes.push_back({spec.substr(0, eq), h == hyps.end() ? data::Timeline{} : h->second});
    if (!lanes.back().timeline.empty()) end = std::max(end, lanes.back().timeline.segments().back().end);
  }
  const double duration = a.duration_s > 0.0 ? a.duration_s : end;
  const auto doc = eval::export_timelines(ref, lanes, duration);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(fs::path(a.out + ".svg"), doc.svg);
  write_text(fs::path(a.out + ".json"), doc.sidecar.dump(2) + "\n");
  RunManifest m{"plot", {{"file_id", a.file_id}, {"duration_s", duration}}, std::nullopt, inputs};
  m.write(fs::path(a.out + ".run.json"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fusion voice activity detection toolkit"};
  app.set_version_flag("--version", FVAD_VERSION);
  app.require_subcommand(1);

  ExtractArgs ex;
  auto* cmd_ex = app.add_subcommand("extract-mfcc", "Compute MFCC feature files from WAVs");
  auto* wav_opt = cmd_ex->add_option("--wav", ex.wav, "One WAV file");
  auto* dir_opt = cmd_ex->add_option("--wav-dir", ex.wav_dir, "Directory of WAV files");
  wav_opt->excludes(dir_opt);
  cmd_ex->add_option("--out", ex.out, "Output directory")->required();
  add_mfcc_flags(cmd_ex, ex.mfcc);

  SynthArgs sy;
  auto* cmd_sy = app.add_subcommand("synth", "Generate the synthetic two-stream benchmark");
  cmd_sy->add_option("--out", sy.out, "Output directory")->required();
  cmd_sy->add_option("--seed", sy.spec.seed)->capture_default_str();
  cmd_sy->add_option("--n-files", sy.spec.n_files)->capture_default_str();
  cmd_sy->add_option("--file-s", sy.spec.file_s)->capture_default_str();
  cmd_sy->add_option("--speech-density", sy.spec.speech_density)->capture_default_str();
  cmd_sy->add_option("--noise-burst-rate", sy.spec.noise_burst_rate, "Bursts per minute")
      ->capture_default_str();
  cmd_sy->add_option("--ptm-dropout", sy.spec.ptm_dropout)->capture_default_str();
  cmd_sy->add_option("--d-mfcc-like", sy.spec.d_mfcc_like)->capture_default_str();
  cmd_sy->add_option("--d-ptm-like", sy.spec.d_ptm_like)->capture_default_str();

  TrainArgs tr;
  auto* cmd_tr = app.add_subcommand("train", "Train a FusionVAD model");
  cmd_tr->add_option("--manifest", tr.manifest, "Dataset manifest (JSON lines)")->required();
  cmd_tr->add_option("--out", tr.out, "Output directory")->required();
  add_model_flags(cmd_tr, tr.model);
  cmd_tr->add_option("--d-mfcc", tr.model.d_mfcc, "MFCC width (default: from data)");
  cmd_tr->add_option("--d-ptm", tr.model.d_ptm, "PTM width (default: from data)");
  cmd_tr->add_option("--epochs", tr.tc.epochs)->capture_default_str();
  cmd_tr->add_option("--batch", tr.tc.batch_size)->capture_default_str();
  cmd_tr->add_option("--chunk-s", tr.tc.chunk_s)->capture_default_str();
  cmd_tr->add_option("--patience", tr.tc.patience)->capture_default_str();
  cmd_tr->add_option("--seed", tr.tc.seed)->capture_default_str();
  cmd_tr->add_option("--lr", tr.tc.optimizer.lr)->capture_default_str();
  cmd_tr->add_option("--micro-batch", tr.tc.micro_batch, "Sequences per gradient work item")
      ->capture_default_str();
  cmd_tr->add_option("--threads", tr.threads, "Worker threads (default: FVAD_THREADS or 1)");

  EvalArgs ev;
  auto* cmd_ev = app.add_subcommand("eval", "Score a model (or hypothesis RTTM) on a split");
  cmd_ev->add_option("--model", ev.model, "Checkpoint (.fvck)");
  cmd_ev->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  cmd_ev->add_option("--split", ev.split)->check(CLI::IsMember({"train", "dev", "test"}))
      ->capture_default_str();
  cmd_ev->add_option("--onset", ev.bin.onset)->capture_default_str();
  cmd_ev->add_option("--offset", ev.bin.offset)->capture_default_str();
  cmd_ev->add_option("--min-on-s", ev.bin.min_on_s)->capture_default_str();
  cmd_ev->add_option("--min-off-s", ev.bin.min_off_s)->capture_default_str();
  cmd_ev->add_option("--collar-s", ev.collar_s)->capture_default_str();
  cmd_ev->add_option("--report", ev.report, "JSON report path");
  cmd_ev->add_option("--hyp-rttm", ev.hyp_rttm, "Score this RTTM instead of running a model");
  cmd_ev->add_option("--hyp-out", ev.hyp_out, "Write binarized hypotheses as RTTM");
  cmd_ev->add_option("--threads", ev.threads);

  CountArgs ct;
  auto* cmd_ct = app.add_subcommand("count-params", "Trainable parameters per block");
  add_model_flags(cmd_ct, ct.model);
  cmd_ct->add_option("--d-mfcc", ct.model.d_mfcc, "MFCC width (default 13)");
  cmd_ct->add_option("--d-ptm", ct.model.d_ptm, "PTM width (default 768)");
  cmd_ct->add_flag("--json", ct.json_out);

  PlotArgs pl;
  auto* cmd_pl = app.add_subcommand("plot", "SVG lane chart of reference and hypotheses");
  cmd_pl->add_option("--ref-rttm", pl.ref_rttm)->required();
  cmd_pl->add_option("--hyp", pl.hyps, "NAME=RTTM, repeatable, drawn in order");
  cmd_pl->add_option("--file", pl.file_id, "File id")->required();
  cmd_pl->add_option("--duration-s", pl.duration_s, "Time axis length (default: last segment)");
  cmd_pl->add_option("--out", pl.out, "Output prefix (.svg and .json are appended)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*cmd_ex) {
      if (ex.wav.empty() && ex.wav_dir.empty()) throw UsageError("give --wav or --wav-dir");
      return run_extract(ex);
    }
    if (*cmd_sy) return run_synth(sy);
    if (*cmd_tr) return run_train(tr);
    if (*cmd_ev) return run_eval(ev);
    if (*cmd_ct) return run_count(ct);
    if (*cmd_pl) return run_plot(pl);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
