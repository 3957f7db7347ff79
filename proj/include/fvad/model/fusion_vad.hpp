#pragma once

#include "fvad/feature_matrix.hpp"
#include "fvad/nn/graph.hpp"
#include "fvad/nn/tensor.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fvad::model {

enum class FusionMode { kNoneMfcc, kNonePtm, kConcat, kAdd, kCrossAttention };

// CLI spelling: none-mfcc, none-ptm, concat, add, xattn. Underscores are accepted too.
std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view text);

struct FusionConfig {
  FusionMode mode = FusionMode::kAdd;
  int d_mfcc = 13;
  int d_ptm = 768;
  int d_model = 128;
  int n_heads = 2;
  int lstm_hidden = 128;
  int lstm_layers = 2;
  // Dense layers in each projection stack.
  int proj_layers = 2;

  bool uses_mfcc() const { return mode != FusionMode::kNonePtm; }
  bool uses_ptm() const { return mode != FusionMode::kNoneMfcc; }

  // Throws InvalidConfig.
  void validate() const;

  nlohmann::json to_json() const;
  static FusionConfig from_json(const nlohmann::json& j);
};

struct ParamCount {
  std::int64_t total = 0;
  // Fixed order: projection, fusion, lstm, head.
  std::vector<std::pair<std::string, std::int64_t>> blocks;

  std::int64_t block(std::string_view name) const;
};

// Closed-form trainable-parameter count.
ParamCount count_params(const FusionConfig& cfg);

// Block a parameter name belongs to: "projection", "fusion", "lstm" or "head".
std::string block_of(std::string_view param_name);

// Freshly initialized parameters; deterministic in (cfg, seed).
nn::ParamStore<float> build_model(const FusionConfig& cfg, std::uint64_t seed);

struct FrameScores {
  std::vector<float> p;
  double hop_ms = kDefaultHopMs;
};

template <typename S>
struct ForwardVars {
  typename nn::Graph<S>::Var projected_mfcc;  // invalid if the stream is unused
  typename nn::Graph<S>::Var projected_ptm;
  typename nn::Graph<S>::Var fused;
  typename nn::Graph<S>::Var probs;  // rows x 1
};

// Records the network on `g` for a batch of equal-length sequences laid out
// as in nn::SeqLayout. Streams the mode does not use may be null.
template <typename S>
ForwardVars<S> build_forward(nn::Graph<S>& g, const FusionConfig& cfg, const nn::Matrix<S>* mfcc,
                             const nn::Matrix<S>* ptm, nn::SeqLayout layout);

// Throws MissingStream, ShapeError (feature width vs config) or FrameGridMismatch.
void check_streams(const FusionConfig& cfg, const FeatureMatrix* mfcc, const FeatureMatrix* ptm);

// Per-frame speech posteriors for one sequence.
FrameScores forward(const nn::ParamStore<float>& params, const FusionConfig& cfg,
                    const FeatureMatrix* mfcc, const FeatureMatrix* ptm);

// Intermediate activations of a single-sequence forward pass.
struct ForwardTrace {
  RowMatrixF projected_mfcc;
  RowMatrixF projected_ptm;
  RowMatrixF fused;
  FrameScores scores;
};
ForwardTrace forward_trace(const nn::ParamStore<float>& params, const FusionConfig& cfg,
                           const FeatureMatrix* mfcc, const FeatureMatrix* ptm);

}  // namespace fvad::model
