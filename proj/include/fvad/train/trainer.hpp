#pragma once

#include "fvad/data/chunking.hpp"
#include "fvad/model/fusion_vad.hpp"
#include "fvad/nn/adam.hpp"

#include "json.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace fvad::train {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 32;
  double chunk_s = 2.0;
  int patience = 5;
  std::uint64_t seed = 0;
  nn::AdamConfig optimizer;
  // Sequences per gradient work item. Work items are reduced in a fixed
  // order, so results do not depend on `threads`.
  int micro_batch = 8;
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  double wall_clock_s = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  int stopped_epoch = 0;
  double best_val_auc = 0.0;

  nlohmann::json to_json() const;
  double mean_epoch_seconds() const;
};

// Patience counter over a maximized metric. Only a strict increase counts as
// an improvement; ties keep the earlier epoch.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  // Returns true if `value` is a new best.
  bool observe(int epoch, double value);
  bool exhausted() const { return since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_value_ = 0.0;
  int since_best_ = 0;
  bool seen_ = false;
};

// The epoch loop with the callbacks that do the work. train() wires real
// training into it; tests can script it.
struct EpochHooks {
  std::function<double(int epoch)> train_epoch;  // mean training loss
  std::function<double(int epoch)> validate;     // validation AUC
  std::function<void(int epoch)> on_improved;    // snapshot the model
};

// Epochs are 1-based. Writes "epoch=<e> loss=<l> val_auc=<a> sec=<s>" per
// epoch to `progress` when given.
TrainLog run_epochs(const TrainConfig& tc, const EpochHooks& hooks, std::ostream* progress);

struct TrainResult {
  nn::ParamStore<float> best_params;
  TrainLog log;
};

// Throws InvalidInput for empty train/dev splits, ShapeError / MissingStream
// when the data does not fit the model, NumericalError on a non-finite loss.
TrainResult train(const model::FusionConfig& cfg, const data::Dataset& ds, const TrainConfig& tc,
                  std::ostream* progress = nullptr);

// Frame posteriors for whole files, computed over non-overlapping chunks.
std::vector<model::FrameScores> score_utterances(const nn::ParamStore<float>& params,
                                                 const model::FusionConfig& cfg,
                                                 std::span<const data::Utterance> utts,
                                                 double chunk_s, int batch_size, int threads);

// Frame-level AUC pooled over every frame of every file.
double pooled_auc(const std::vector<model::FrameScores>& scores,
                  std::span<const data::Utterance> utts);

// Mean BCE and parameter gradients for a set of equal-length chunks.
struct BatchGradients {
  double loss = 0.0;
  nn::Grads<float> grads;
  std::int64_t frames = 0;
};
BatchGradients batch_gradients(const nn::ParamStore<float>& params, const model::FusionConfig& cfg,
                               std::span<const data::Chunk* const> chunks);

// One optimizer step over a batch (chunks may differ in length). Returns the
// frame-weighted mean loss.
double train_step(nn::ParamStore<float>& params, const model::FusionConfig& cfg,
                  std::span<const data::Chunk* const> batch, const TrainConfig& tc);

}  // namespace fvad::train
