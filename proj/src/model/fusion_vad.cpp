#include "fvad/model/fusion_vad.hpp"

#include "fvad/rng.hpp"

#include <cmath>

namespace fvad::model {

using nn::Activation;
using nn::Direction;
using nn::Index;
using nn::Matrix;
using nn::SeqLayout;

std::string to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::kNoneMfcc: return "none-mfcc";
    case FusionMode::kNonePtm: return "none-ptm";
    case FusionMode::kConcat: return "concat";
    case FusionMode::kAdd: return "add";
    case FusionMode::kCrossAttention: return "xattn";
  }
  return "?";
}

FusionMode parse_fusion_mode(std::string_view text) {
  std::string s(text);
  for (char& c : s) {
    if (c == '_') c = '-';
  }
  if (s == "none-mfcc") return FusionMode::kNoneMfcc;
  if (s == "none-ptm") return FusionMode::kNonePtm;
  if (s == "concat") return FusionMode::kConcat;
  if (s == "add") return FusionMode::kAdd;
  if (s == "xattn") return FusionMode::kCrossAttention;
  throw InvalidConfig("unknown fusion mode '" + std::string(text) + "'");
}

void FusionConfig::validate() const {
  auto fail = [](const std::string& m) { throw InvalidConfig("fusion config: " + m); };
  if (uses_mfcc() && d_mfcc < 1) fail("d_mfcc must be >= 1");
  if (uses_ptm() && d_ptm < 1) fail("d_ptm must be >= 1");
  if (d_model < 1 || lstm_hidden < 1 || lstm_layers < 1 || proj_layers < 1) {
    fail("dimensions and layer counts must be >= 1");
  }
  if (n_heads < 1 || d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (mode == FusionMode::kCrossAttention && d_model < 2) fail("layer norm needs d_model >= 2");
}

nlohmann::json FusionConfig::to_json() const {
  return {{"mode", to_string(mode)},         {"d_mfcc", d_mfcc},
          {"d_ptm", d_ptm},                  {"d_model", d_model},
          {"n_heads", n_heads},              {"lstm_hidden", lstm_hidden},
          {"lstm_layers", lstm_layers},      {"proj_layers", proj_layers}};
}

FusionConfig FusionConfig::from_json(const nlohmann::json& j) {
  FusionConfig c;
  try {
    c.mode = parse_fusion_mode(j.at("mode").get<std::string>());
    c.d_mfcc = j.at("d_mfcc").get<int>();
    c.d_ptm = j.at("d_ptm").get<int>();
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
    c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
    c.proj_layers = j.value("proj_layers", c.proj_layers);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("fusion config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

std::int64_t ParamCount::block(std::string_view name) const {
  for (const auto& [n, v] : blocks) {
    if (n == name) return v;
  }
  return 0;
}

namespace {

std::int64_t dense_count(std::int64_t in, std::int64_t out) { return in * out + out; }

std::int64_t projection_count(std::int64_t d_in, const FusionConfig& c) {
  std::int64_t n = dense_count(d_in, c.d_model);
  for (int i = 1; i < c.proj_layers; ++i) n += dense_count(c.d_model, c.d_model);
  return n;
}

}  // namespace

ParamCount count_params(const FusionConfig& cfg) {
  cfg.validate();
  const std::int64_t d = cfg.d_model;
  const std::int64_t h = cfg.lstm_hidden;

  std::int64_t proj = 0;
  if (cfg.uses_mfcc()) proj += projection_count(cfg.d_mfcc, cfg);
  if (cfg.uses_ptm()) proj += projection_count(cfg.d_ptm, cfg);

  std::int64_t fusion = 0;
  switch (cfg.mode) {
    case FusionMode::kNoneMfcc:
    case FusionMode::kNonePtm: fusion = dense_count(d, d); break;
    case FusionMode::kConcat: fusion = dense_count(2 * d, d); break;
    case FusionMode::kAdd: fusion = 0; break;
    case FusionMode::kCrossAttention: fusion = 4 * dense_count(d, d) + 2 * d; break;
  }

  std::int64_t lstm = 0;
  for (int l = 0; l < cfg.lstm_layers; ++l) {
    const std::int64_t in = l == 0 ? d : 2 * h;
    lstm += 2 * (4 * h * in + 4 * h * h + 4 * h);
  }

  const std::int64_t head = dense_count(2 * h, d) + dense_count(d, d) + dense_count(d, 1);

  ParamCount pc;
  pc.blocks = {{"projection", proj}, {"fusion", fusion}, {"lstm", lstm}, {"head", head}};
  pc.total = proj + fusion + lstm + head;
  return pc;
}

std::string block_of(std::string_view name) {
  if (name.starts_with("proj_")) return "projection";
  if (name.starts_with("fusion.")) return "fusion";
  if (name.starts_with("lstm.")) return "lstm";
  if (name.starts_with("head.")) return "head";
  throw InvalidConfig("parameter '" + std::string(name) + "' belongs to no block");
}

namespace {

std::string lstm_prefix(int layer, Direction dir) {
  return "lstm.l" + std::to_string(layer) + (dir == Direction::kForward ? ".fwd" : ".bwd");
}

class Initializer {
 public:
  Initializer(nn::ParamStore<float>& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  void dense(const std::string& prefix, Index in, Index out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    store_.add(prefix + ".weight", {in, out}, uniform(in, out, limit));
    store_.add(prefix + ".bias", {out}, Matrix<float>::Zero(1, out));
  }

  void lstm(const std::string& prefix, Index in, Index h) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(h));
    store_.add(prefix + ".w_ih", {in, 4 * h}, uniform(in, 4 * h, limit));
    store_.add(prefix + ".w_hh", {h, 4 * h}, uniform(h, 4 * h, limit));
    Matrix<float> bias = Matrix<float>::Zero(1, 4 * h);
    bias.middleCols(h, h).setOnes();
    store_.add(prefix + ".bias", {4 * h}, std::move(bias));
  }

  void norm(const std::string& prefix, Index d) {
    store_.add(prefix + ".gamma", {d}, Matrix<float>::Ones(1, d));
    store_.add(prefix + ".beta", {d}, Matrix<float>::Zero(1, d));
  }

 private:
  Matrix<float> uniform(Index rows, Index cols, double limit) {
    Matrix<float> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<float>(rng_.uniform(-limit, limit));
    }
    return m;
  }

  nn::ParamStore<float>& store_;
  Rng rng_;
};

void init_projection(Initializer& init, const std::string& prefix, Index d_in,
                     const FusionConfig& c) {
  init.dense(prefix + ".fc1", d_in, c.d_model);
  for (int i = 1; i < c.proj_layers; ++i) {
    init.dense(prefix + ".fc" + std::to_string(i + 1), c.d_model, c.d_model);
  }
}

}  // namespace

nn::ParamStore<float> build_model(const FusionConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nn::ParamStore<float> store;
  Initializer init(store, seed);
  const Index d = cfg.d_model;
  const Index h = cfg.lstm_hidden;

  if (cfg.uses_mfcc()) init_projection(init, "proj_mfcc", cfg.d_mfcc, cfg);
  if (cfg.uses_ptm()) init_projection(init, "proj_ptm", cfg.d_ptm, cfg);

  switch (cfg.mode) {
    case FusionMode::kNoneMfcc:
    case FusionMode::kNonePtm: init.dense("fusion.ff", d, d); break;
    case FusionMode::kConcat: init.dense("fusion.concat", 2 * d, d); break;
    case FusionMode::kAdd: break;
    case FusionMode::kCrossAttention:
      for (const char* p : {"fusion.attn.q", "fusion.attn.k", "fusion.attn.v", "fusion.attn.o"}) {
        init.dense(p, d, d);
      }
      init.norm("fusion.norm", d);
      break;
  }

  for (int l = 0; l < cfg.lstm_layers; ++l) {
    const Index in = l == 0 ? d : 2 * h;
    init.lstm(lstm_prefix(l, Direction::kForward), in, h);
    init.lstm(lstm_prefix(l, Direction::kBackward), in, h);
  }

  init.dense("head.fc1", 2 * h, d);
  init.dense("head.fc2", d, d);
  init.dense("head.out", d, 1);
  return store;
}

template <typename S>
ForwardVars<S> build_forward(nn::Graph<S>& g, const FusionConfig& cfg, const Matrix<S>* mfcc,
                             const Matrix<S>* ptm, SeqLayout layout) {
  using Var = typename nn::Graph<S>::Var;
  auto dense = [&g](Var x, const std::string& prefix, Activation act) {
    return g.dense(x, g.param(prefix + ".weight"), g.param(prefix + ".bias"), act);
  };
  auto project = [&](const Matrix<S>* x, const std::string& prefix) {
    if (x == nullptr) throw MissingStream("fusion requires " + prefix.substr(5) + " stream");
    if (x->rows() != layout.rows()) throw FrameGridMismatch("stream rows do not match layout");
    Var v = g.input(*x);
    for (int i = 0; i < cfg.proj_layers; ++i) {
      v = dense(v, prefix + ".fc" + std::to_string(i + 1), Activation::kGelu);
    }
    return v;
  };

  ForwardVars<S> out;
  if (cfg.uses_mfcc()) out.projected_mfcc = project(mfcc, "proj_mfcc");
  if (cfg.uses_ptm()) out.projected_ptm = project(ptm, "proj_ptm");

  switch (cfg.mode) {
    case FusionMode::kNoneMfcc:
      out.fused = dense(out.projected_mfcc, "fusion.ff", Activation::kGelu);
      break;
    case FusionMode::kNonePtm:
      out.fused = dense(out.projected_ptm, "fusion.ff", Activation::kGelu);
      break;
    case FusionMode::kConcat:
      out.fused = dense(g.concat_cols(out.projected_mfcc, out.projected_ptm), "fusion.concat",
                        Activation::kIdentity);
      break;
    case FusionMode::kAdd:
      out.fused = g.add(out.projected_mfcc, out.projected_ptm);
      break;
    case FusionMode::kCrossAttention: {
      typename nn::Graph<S>::AttentionVars w{
          g.param("fusion.attn.q.weight"), g.param("fusion.attn.q.bias"),
          g.param("fusion.attn.k.weight"), g.param("fusion.attn.k.bias"),
          g.param("fusion.attn.v.weight"), g.param("fusion.attn.v.bias"),
          g.param("fusion.attn.o.weight"), g.param("fusion.attn.o.bias")};
      const Var attended = g.attention(out.projected_mfcc, out.projected_ptm, out.projected_ptm,
                                       w, cfg.n_heads, layout, layout);
      out.fused = g.layer_norm(g.add(out.projected_mfcc, attended), g.param("fusion.norm.gamma"),
                               g.param("fusion.norm.beta"));
      break;
    }
  }

  Var h = out.fused;
  for (int l = 0; l < cfg.lstm_layers; ++l) {
    Var dirs[2];
    for (const Direction dir : {Direction::kForward, Direction::kBackward}) {
      const std::string p = lstm_prefix(l, dir);
      dirs[dir == Direction::kForward ? 0 : 1] =
          g.lstm(h, {g.param(p + ".w_ih"), g.param(p + ".w_hh"), g.param(p + ".bias")}, layout,
                 dir);
    }
    h = g.concat_cols(dirs[0], dirs[1]);
  }
  h = dense(h, "head.fc1", Activation::kGelu);
  h = dense(h, "head.fc2", Activation::kGelu);
  out.probs = dense(h, "head.out", Activation::kSigmoid);
  return out;
}

template ForwardVars<float> build_forward<float>(nn::Graph<float>&, const FusionConfig&,
                                                 const Matrix<float>*, const Matrix<float>*,
                                                 SeqLayout);
template ForwardVars<double> build_forward<double>(nn::Graph<double>&, const FusionConfig&,
                                                   const Matrix<double>*, const Matrix<double>*,
                                                   SeqLayout);

void check_streams(const FusionConfig& cfg, const FeatureMatrix* mfcc, const FeatureMatrix* ptm) {
  cfg.validate();
  if (cfg.uses_mfcc() && mfcc == nullptr) throw MissingStream("fusion requires mfcc stream");
  if (cfg.uses_ptm() && ptm == nullptr) throw MissingStream("fusion requires ptm stream");
  if (cfg.uses_mfcc() && mfcc->dims() != cfg.d_mfcc) {
    throw ShapeError("mfcc features have " + std::to_string(mfcc->dims()) +
                     " dims but the model expects d_mfcc=" + std::to_string(cfg.d_mfcc));
  }
  if (cfg.uses_ptm() && ptm->dims() != cfg.d_ptm) {
    throw ShapeError("ptm features have " + std::to_string(ptm->dims()) +
                     " dims but the model expects d_ptm=" + std::to_string(cfg.d_ptm));
  }
  if (cfg.uses_mfcc() && cfg.uses_ptm()) {
    if (mfcc->frames() != ptm->frames()) {
      throw FrameGridMismatch("mfcc has " + std::to_string(mfcc->frames()) +
                              " frames, ptm has " + std::to_string(ptm->frames()));
    }
    if (mfcc->hop_ms != ptm->hop_ms) throw FrameGridMismatch("mfcc and ptm hop sizes differ");
  }
}

ForwardTrace forward_trace(const nn::ParamStore<float>& params, const FusionConfig& cfg,
                           const FeatureMatrix* mfcc, const FeatureMatrix* ptm) {
  check_streams(cfg, mfcc, ptm);
  const FeatureMatrix& ref = cfg.uses_mfcc() ? *mfcc : *ptm;
  nn::Graph<float> g(&params, false);
  const ForwardVars<float> v =
      build_forward<float>(g, cfg, cfg.uses_mfcc() ? &mfcc->data : nullptr,
                           cfg.uses_ptm() ? &ptm->data : nullptr, SeqLayout{1, ref.frames()});
  ForwardTrace tr;
  if (v.projected_mfcc.valid()) tr.projected_mfcc = g.value(v.projected_mfcc);
  if (v.projected_ptm.valid()) tr.projected_ptm = g.value(v.projected_ptm);
  tr.fused = g.value(v.fused);
  const auto& p = g.value(v.probs);
  tr.scores.p.assign(p.data(), p.data() + p.size());
  tr.scores.hop_ms = ref.hop_ms;
  return tr;
}

FrameScores forward(const nn::ParamStore<float>& params, const FusionConfig& cfg,
                    const FeatureMatrix* mfcc, const FeatureMatrix* ptm) {
  return forward_trace(params, cfg, mfcc, ptm).scores;
}

}  // namespace fvad::model
