#include "fvad/train/trainer.hpp"

#include "fvad/error.hpp"
#include "fvad/parallel.hpp"
#include "fvad/rng.hpp"
#include "fvad/train/auc.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace fvad::train {

using nn::Matrix;

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidConfig("epochs must be >= 1");
  if (patience < 1) throw InvalidConfig("patience must be >= 1");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (micro_batch < 1) throw InvalidConfig("micro_batch must be >= 1");
  if (!(chunk_s > 0.0)) throw InvalidConfig("chunk_s must be positive");
  optimizer.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"chunk_s", chunk_s},
          {"patience", patience},
          {"seed", seed},
          {"micro_batch", micro_batch},
          {"optimizer",
           {{"name", "adam"},
            {"lr", optimizer.lr},
            {"beta1", optimizer.beta1},
            {"beta2", optimizer.beta2},
            {"eps", optimizer.eps}}}};
}

nlohmann::json TrainLog::to_json() const {
  nlohmann::json j;
  j["best_epoch"] = best_epoch;
  j["stopped_epoch"] = stopped_epoch;
  j["best_val_auc"] = best_val_auc;
  j["epochs"] = nlohmann::json::array();
  for (const auto& r : epochs) {
    j["epochs"].push_back({{"epoch", r.epoch},
                           {"train_loss", r.train_loss},
                           {"val_auc", r.val_auc},
                           {"wall_clock_s", r.wall_clock_s}});
  }
  return j;
}

double TrainLog::mean_epoch_seconds() const {
  if (epochs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : epochs) s += r.wall_clock_s;
  return s / static_cast<double>(epochs.size());
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw InvalidConfig("patience must be >= 1");
}

bool EarlyStopping::observe(int epoch, double value) {
  if (!seen_ || value > best_value_) {
    seen_ = true;
    best_value_ = value;
    best_epoch_ = epoch;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

TrainLog run_epochs(const TrainConfig& tc, const EpochHooks& hooks, std::ostream* progress) {
  tc.validate();
  EarlyStopping stopper(tc.patience);
  TrainLog log;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double loss = hooks.train_epoch(epoch);
    const double auc = hooks.validate(epoch);
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back({epoch, loss, auc, sec});
    log.stopped_epoch = epoch;
    if (stopper.observe(epoch, auc) && hooks.on_improved) hooks.on_improved(epoch);
    if (progress != nullptr) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "epoch=%d loss=%.6f val_auc=%.6f sec=%.3f\n", epoch, loss,
                    auc, sec);
      *progress << buf << std::flush;
    }
    if (stopper.exhausted()) break;
  }
  log.best_epoch = stopper.best_epoch();
  log.best_val_auc = stopper.best_value();
  return log;
}

namespace {

struct StackedChunks {
  std::optional<Matrix<float>> mfcc;
  std::optional<Matrix<float>> ptm;
  Matrix<float> labels;
  nn::SeqLayout layout;
};

StackedChunks stack(const model::FusionConfig& cfg, std::span<const data::Chunk* const> chunks) {
  StackedChunks s;
  const nn::Index steps = chunks.front()->frames;
  s.layout = {static_cast<nn::Index>(chunks.size()), steps};
  auto gather = [&](auto member, nn::Index dims, const char* name) {
    Matrix<float> m(s.layout.rows(), dims);
    for (std::size_t b = 0; b < chunks.size(); ++b) {
      const auto& src = (*chunks[b]).*member;
      if (!src) throw MissingStream(std::string("fusion requires ") + name + " stream");
      if (src->cols() != dims) {
        throw ShapeError(std::string(name) + " features have " + std::to_string(src->cols()) +
                         " dims but the model expects " + std::to_string(dims));
      }
      m.middleRows(static_cast<nn::Index>(b) * steps, steps) = *src;
    }
    return m;
  };
  if (cfg.uses_mfcc()) s.mfcc = gather(&data::Chunk::mfcc, cfg.d_mfcc, "mfcc");
  if (cfg.uses_ptm()) s.ptm = gather(&data::Chunk::ptm, cfg.d_ptm, "ptm");
  s.labels.resize(s.layout.rows(), 1);
  for (std::size_t b = 0; b < chunks.size(); ++b) {
    if (chunks[b]->frames != steps) throw ShapeError("stacked chunks differ in length");
    for (nn::Index t = 0; t < steps; ++t) {
      s.labels(static_cast<nn::Index>(b) * steps + t, 0) = chunks[b]->labels[t];
    }
  }
  return s;
}

// Equal-length groups of at most `limit` chunks, in first-appearance order of
// each length.
std::vector<std::vector<const data::Chunk*>> group_by_length(
    std::span<const data::Chunk* const> chunks, std::size_t limit) {
  std::map<nn::Index, std::vector<const data::Chunk*>> by_len;
  std::vector<nn::Index> order;
  for (const data::Chunk* c : chunks) {
    auto [it, inserted] = by_len.try_emplace(c->frames);
    if (inserted) order.push_back(c->frames);
    it->second.push_back(c);
  }
  std::vector<std::vector<const data::Chunk*>> out;
  for (nn::Index len : order) {
    const auto& v = by_len[len];
    for (std::size_t i = 0; i < v.size(); i += limit) {
      out.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(i),
                       v.begin() + static_cast<std::ptrdiff_t>(std::min(v.size(), i + limit)));
    }
  }
  return out;
}

}  // namespace

BatchGradients batch_gradients(const nn::ParamStore<float>& params, const model::FusionConfig& cfg,
                               std::span<const data::Chunk* const> chunks) {
  if (chunks.empty()) throw InvalidInput("empty batch");
  const StackedChunks s = stack(cfg, chunks);
  nn::Graph<float> g(&params);
  const auto vars = model::build_forward<float>(g, cfg, s.mfcc ? &*s.mfcc : nullptr,
                                                s.ptm ? &*s.ptm : nullptr, s.layout);
  const auto loss = g.bce(vars.probs, s.labels);
  g.backward(loss);
  BatchGradients out;
  out.loss = g.value(loss)(0, 0);
  out.grads = g.param_grads();
  out.frames = s.layout.rows();
  return out;
}

double train_step(nn::ParamStore<float>& params, const model::FusionConfig& cfg,
                  std::span<const data::Chunk* const> batch, const TrainConfig& tc) {
  const auto groups = group_by_length(batch, static_cast<std::size_t>(tc.micro_batch));
  std::vector<BatchGradients> parts(groups.size());
  parallel_for(groups.size(), tc.threads,
               [&](std::size_t i) { parts[i] = batch_gradients(params, cfg, groups[i]); });

  std::int64_t total = 0;
  for (const auto& p : parts) total += p.frames;
  nn::Grads<float> grads = nn::zero_grads(params);
  double loss = 0.0;
  for (const auto& p : parts) {
    const double w = static_cast<double>(p.frames) / static_cast<double>(total);
    loss += w * p.loss;
    for (std::size_t k = 0; k < grads.size(); ++k) grads[k] += static_cast<float>(w) * p.grads[k];
  }
  if (!std::isfinite(loss)) throw NumericalError("training loss is not finite");
  nn::adam_step(params, grads, tc.optimizer);
  return loss;
}

std::vector<model::FrameScores> score_utterances(const nn::ParamStore<float>& params,
                                                 const model::FusionConfig& cfg,
                                                 std::span<const data::Utterance> utts,
                                                 double chunk_s, int batch_size, int threads) {
  std::vector<model::FrameScores> out(utts.size());
  std::vector<data::Chunk> chunks;
  std::vector<std::size_t> owner;
  for (std::size_t u = 0; u < utts.size(); ++u) {
    const data::Utterance& utt = utts[u];
    model::check_streams(cfg, utt.mfcc ? &*utt.mfcc : nullptr, utt.ptm ? &*utt.ptm : nullptr);
    out[u].hop_ms = utt.hop_ms();
    out[u].p.assign(static_cast<std::size_t>(utt.frames()), 0.0f);
    for (auto& c : data::make_chunks(utt, chunk_s, data::ChunkMode::kEval)) {
      chunks.push_back(std::move(c));
      owner.push_back(u);
    }
  }
  std::vector<const data::Chunk*> ptrs;
  std::map<const data::Chunk*, std::size_t> index;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    ptrs.push_back(&chunks[i]);
    index[&chunks[i]] = i;
  }
  const auto groups = group_by_length(ptrs, static_cast<std::size_t>(std::max(1, batch_size)));
  std::vector<Matrix<float>> probs(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t gi) {
    const StackedChunks s = stack(cfg, groups[gi]);
    nn::Graph<float> g(&params, false);
    const auto vars = model::build_forward<float>(g, cfg, s.mfcc ? &*s.mfcc : nullptr,
                                                  s.ptm ? &*s.ptm : nullptr, s.layout);
    probs[gi] = g.value(vars.probs);
  });
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const nn::Index steps = groups[gi].front()->frames;
    for (std::size_t b = 0; b < groups[gi].size(); ++b) {
      const data::Chunk* c = groups[gi][b];
      auto& dst = out[owner[index[c]]].p;
      for (nn::Index t = 0; t < steps; ++t) {
        dst[static_cast<std::size_t>(c->start_frame + t)] =
            probs[gi](static_cast<nn::Index>(b) * steps + t, 0);
      }
    }
  }
  return out;
}

double pooled_auc(const std::vector<model::FrameScores>& scores,
                  std::span<const data::Utterance> utts) {
  std::vector<float> all;
  std::vector<std::uint8_t> labels;
  for (std::size_t u = 0; u < utts.size(); ++u) {
    const auto l = utts[u].labels();
    all.insert(all.end(), scores[u].p.begin(), scores[u].p.end());
    labels.insert(labels.end(), l.begin(), l.end());
  }
  return compute_auc(std::span<const float>(all), std::span<const std::uint8_t>(labels));
}

TrainResult train(const model::FusionConfig& cfg, const data::Dataset& ds, const TrainConfig& tc,
                  std::ostream* progress) {
  tc.validate();
  cfg.validate();
  if (ds.train.empty()) throw InvalidInput("training split is empty");
  if (ds.dev.empty()) throw InvalidInput("dev split is empty");
  for (const auto* split : {&ds.train, &ds.dev}) {
    for (const auto& u : *split) {
      model::check_streams(cfg, u.mfcc ? &*u.mfcc : nullptr, u.ptm ? &*u.ptm : nullptr);
    }
  }

  nn::ParamStore<float> params = model::build_model(cfg, tc.seed);
  TrainResult result;
  result.best_params = params;

  EpochHooks hooks;
  hooks.train_epoch = [&](int epoch) {
    Rng rng(derive_seed(tc.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::vector<data::Chunk> chunks;
    for (const auto& u : ds.train) {
      for (auto& c : data::make_chunks(u, tc.chunk_s, data::ChunkMode::kTrain, &rng)) {
        chunks.push_back(std::move(c));
      }
    }
    for (std::size_t i = chunks.size(); i > 1; --i) {
      std::swap(chunks[i - 1], chunks[rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::int64_t frames = 0;
    for (std::size_t i = 0; i < chunks.size(); i += static_cast<std::size_t>(tc.batch_size)) {
      std::vector<const data::Chunk*> batch;
      std::int64_t batch_frames = 0;
      for (std::size_t j = i; j < std::min(chunks.size(), i + tc.batch_size); ++j) {
        batch.push_back(&chunks[j]);
        batch_frames += chunks[j].frames;
      }
      const double loss = train_step(params, cfg, batch, tc);
      loss_sum += loss * static_cast<double>(batch_frames);
      frames += batch_frames;
    }
    return frames > 0 ? loss_sum / static_cast<double>(frames) : 0.0;
  };
  hooks.validate = [&](int) {
    const auto scores = score_utterances(params, cfg, ds.dev, tc.chunk_s, tc.batch_size, tc.threads);
    return pooled_auc(scores, ds.dev);
  };
  hooks.on_improved = [&](int) { result.best_params = params; };

  result.log = run_epochs(tc, hooks, progress);
  return result;
}

}  // namespace fvad::train
