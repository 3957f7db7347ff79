#include "doctest.h"

#include "fvad/error.hpp"
#include "fvad/nn/adam.hpp"
#include "fvad/nn/checkpoint.hpp"
#include "fvad/nn/graph.hpp"
#include "fvad/nn/kernels.hpp"
#include "fvad/rng.hpp"
#include "support/oracles.hpp"

#include <sstream>

using namespace fvad;
using namespace fvad::nn;
using MatD = Matrix<double>;

namespace {

MatD random(Index r, Index c, Rng& rng, double scale = 0.5) {
  MatD m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

void add_random(ParamStore<double>& ps, const std::string& name, Index r, Index c, Rng& rng,
                double scale = 0.5) {
  const Shape shape = r == 1 ? Shape{c} : Shape{r, c};
  ps.add(name, shape, random(r, c, rng, scale));
}

// Wraps `body` (which maps the graph to a rows x d var) into a scalar BCE
// loss through a sigmoid probe, and returns the worst finite-difference error.
double check_op(ParamStore<double>& ps, Index d, const MatD& targets,
                const std::function<Graph<double>::Var(Graph<double>&)>& body) {
  auto build = [&](Graph<double>& g) {
    const auto y = body(g);
    const auto p = g.dense(y, g.param("probe.w"), g.param("probe.b"), Activation::kSigmoid);
    return g.bce(p, targets);
  };
  Rng rng(99);
  if (!ps.contains("probe.w")) {
    add_random(ps, "probe.w", d, 1, rng);
    add_random(ps, "probe.b", 1, 1, rng);
  }
  Graph<double> g(&ps);
  const auto loss = build(g);
  g.backward(loss);
  const auto grads = g.param_grads();
  return oracle::max_relative_error(ps, grads, [&] {
    Graph<double> fg(&ps, false);
    return fg.value(build(fg))(0, 0);
  });
}

MatD targets(Index rows, Rng& rng) {
  MatD t(rows, 1);
  for (Index i = 0; i < rows; ++i) t(i, 0) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST_CASE("gelu and sigmoid values") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(1.0) == doctest::Approx(0.841192).epsilon(1e-5));
  CHECK(sigmoid(0.0) == 0.5);
  for (double x : {-3.0, -0.5, 0.2, 2.5}) {
    const double h = 1e-6;
    CHECK(gelu_grad(x) == doctest::Approx((gelu(x + h) - gelu(x - h)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("lstm kernel matches scalar reference in both directions") {
  Rng rng(1);
  const MatD x = random(7, 3, rng), wih = random(3, 16, rng), whh = random(4, 16, rng),
             b = random(1, 16, rng);
  const LstmWeights<double> w{&wih, &whh, &b};
  for (bool rev : {false, true}) {
    const MatD got = lstm_forward(x, w, rev ? Direction::kBackward : Direction::kForward);
    const MatD want = oracle::lstm(x, wih, whh, b, rev);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("batched lstm equals per-sequence lstm") {
  Rng rng(2);
  const MatD x = random(3 * 5, 2, rng), wih = random(2, 12, rng), whh = random(3, 12, rng),
             b = random(1, 12, rng);
  const LstmWeights<double> w{&wih, &whh, &b};
  const MatD all = lstm_forward_batched<double>(x, w, {3, 5}, Direction::kBackward, nullptr);
  for (Index s = 0; s < 3; ++s) {
    const MatD one = lstm_forward(MatD(x.middleRows(s * 5, 5)), w, Direction::kBackward);
    CHECK((all.middleRows(s * 5, 5) - one).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("attention kernel matches scalar reference") {
  Rng rng(3);
  oracle::AttnWeights o;
  o.wq = random(4, 4, rng); o.bq = random(1, 4, rng);
  o.wk = random(4, 4, rng); o.bk = random(1, 4, rng);
  o.wv = random(4, 4, rng); o.bv = random(1, 4, rng);
  o.wo = random(4, 4, rng); o.bo = random(1, 4, rng);
  const AttentionWeights<double> w{&o.wq, &o.bq, &o.wk, &o.bk, &o.wv, &o.bv, &o.wo, &o.bo};
  const MatD q = random(5, 4, rng), kv = random(6, 4, rng);
  for (int heads : {1, 2, 4}) {
    const MatD got = multihead_attention(q, kv, kv, w, heads);
    const MatD want = oracle::attention(q, kv, kv, o, heads);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("layer norm output has zero mean and unit variance") {
  Rng rng(4);
  const MatD x = random(5, 8, rng, 3.0);
  const MatD y = layer_norm<double>(x, MatD::Ones(1, 8), MatD::Zero(1, 8));
  for (Index r = 0; r < 5; ++r) {
    CHECK(std::abs(y.row(r).mean()) < 1e-12);
    CHECK(y.row(r).squaredNorm() / 8.0 == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("bce clamps and averages") {
  MatD p(2, 1), y(2, 1);
  p << 0.8, 0.0;
  y << 1.0, 0.0;
  CHECK(bce_loss(p, y) == doctest::Approx(-(std::log(0.8) + std::log(1 - 1e-7)) / 2));
  p(1, 0) = 1.0;
  CHECK(std::isfinite(bce_loss(p, y)));
}

TEST_CASE("finite-difference gradients per op") {
  Rng rng(5);
  const MatD x = random(6, 3, rng);
  const MatD t = targets(6, rng);

  SUBCASE("dense with each activation") {
    for (auto act : {Activation::kIdentity, Activation::kGelu, Activation::kSigmoid}) {
      ParamStore<double> ps;
      add_random(ps, "w", 3, 4, rng);
      add_random(ps, "b", 1, 4, rng);
      const double err = check_op(ps, 4, t, [&](Graph<double>& g) {
        return g.dense(g.input(x), g.param("w"), g.param("b"), act);
      });
      CHECK(err < 1e-5);
    }
  }
  SUBCASE("add, concat, layer norm") {
    ParamStore<double> ps;
    add_random(ps, "a.w", 3, 4, rng);
    add_random(ps, "a.b", 1, 4, rng);
    add_random(ps, "c.w", 3, 4, rng);
    add_random(ps, "c.b", 1, 4, rng);
    add_random(ps, "gamma", 1, 8, rng);
    add_random(ps, "beta", 1, 8, rng);
    const double err = check_op(ps, 8, t, [&](Graph<double>& g) {
      const auto in = g.input(x);
      const auto a = g.dense(in, g.param("a.w"), g.param("a.b"), Activation::kGelu);
      const auto c = g.dense(in, g.param("c.w"), g.param("c.b"), Activation::kIdentity);
      const auto s = g.add(a, c);
      return g.layer_norm(g.concat_cols(s, c), g.param("gamma"), g.param("beta"));
    });
    CHECK(err < 1e-5);
  }
  SUBCASE("batched bidirectional lstm") {
    ParamStore<double> ps;
    add_random(ps, "in.w", 3, 3, rng);
    add_random(ps, "in.b", 1, 3, rng);
    for (const char* d : {"f", "r"}) {
      add_random(ps, std::string(d) + ".w_ih", 3, 8, rng);
      add_random(ps, std::string(d) + ".w_hh", 2, 8, rng);
      add_random(ps, std::string(d) + ".bias", 1, 8, rng);
    }
    const double err = check_op(ps, 4, t, [&](Graph<double>& g) {
      const auto in = g.dense(g.input(x), g.param("in.w"), g.param("in.b"), Activation::kIdentity);
      const auto f = g.lstm(in, {g.param("f.w_ih"), g.param("f.w_hh"), g.param("f.bias")}, {2, 3},
                            Direction::kForward);
      const auto r = g.lstm(in, {g.param("r.w_ih"), g.param("r.w_hh"), g.param("r.bias")}, {2, 3},
                            Direction::kBackward);
      return g.concat_cols(f, r);
    });
    CHECK(err < 1e-5);
  }
  SUBCASE("batched cross attention") {
    ParamStore<double> ps;
    add_random(ps, "qin.w", 3, 4, rng);
    add_random(ps, "qin.b", 1, 4, rng);
    add_random(ps, "kin.w", 3, 4, rng);
    add_random(ps, "kin.b", 1, 4, rng);
    for (const char* n : {"q", "k", "v", "o"}) {
      add_random(ps, std::string(n) + ".w", 4, 4, rng);
      add_random(ps, std::string(n) + ".b", 1, 4, rng);
    }
    const double err = check_op(ps, 4, t, [&](Graph<double>& g) {
      const auto in = g.input(x);
      const auto q = g.dense(in, g.param("qin.w"), g.param("qin.b"), Activation::kIdentity);
      const auto k = g.dense(in, g.param("kin.w"), g.param("kin.b"), Activation::kGelu);
      return g.attention(q, k, k,
                         {g.param("q.w"), g.param("q.b"), g.param("k.w"), g.param("k.b"),
                          g.param("v.w"), g.param("v.b"), g.param("o.w"), g.param("o.b")},
                         2, {2, 3}, {2, 3});
    });
    CHECK(err < 1e-5);
  }
}

TEST_CASE("graph state errors") {
  ParamStore<double> ps;
  ps.add("w", {2, 1}, MatD::Ones(2, 1));
  ps.add("b", {1}, MatD::Zero(1, 1));
  Graph<double> empty(&ps);
  CHECK_THROWS_AS(empty.backward({0}), StateError);

  Graph<double> g(&ps);
  const auto x = g.input(MatD::Ones(3, 2));
  CHECK_THROWS_AS(g.backward(x), StateError);
  const auto p = g.dense(x, g.param("w"), g.param("b"), Activation::kSigmoid);
  const auto loss = g.bce(p, MatD::Ones(3, 1));
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), StateError);
  CHECK_THROWS_AS(g.value({1000}), std::out_of_range);

  Graph<double> unbound;
  CHECK_THROWS_AS(unbound.param("w"), StateError);
  CHECK_THROWS_AS(g.param("missing"), Error);
}

TEST_CASE("adam step matches hand-computed update") {
  ParamStore<double> ps;
  MatD v(1, 2);
  v << 1.0, -2.0;
  ps.add("p", {2}, v);
  MatD g(1, 2);
  g << 0.5, -0.25;
  const AdamConfig cfg;
  adam_step(ps, {g}, cfg);
  // Step 1: m_hat = g and v_hat = g^2, so the update is lr * g / (|g| + eps).
  for (int i = 0; i < 2; ++i) {
    const double want = v(0, i) - cfg.lr * g(0, i) / (std::abs(g(0, i)) + cfg.eps);
    CHECK(ps.value("p")(0, i) == doctest::Approx(want).epsilon(1e-14));
  }
  CHECK(ps.adam_steps() == 1);
  // A constant gradient keeps m_hat = g and v_hat = g^2 after bias correction.
  adam_step(ps, {g}, cfg);
  for (int i = 0; i < 2; ++i) {
    const double want = v(0, i) - 2 * cfg.lr * g(0, i) / (std::abs(g(0, i)) + cfg.eps);
    CHECK(ps.value("p")(0, i) == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK_THROWS_AS(adam_step(ps, {}, cfg), ShapeError);
  AdamConfig bad;
  bad.lr = -1;
  CHECK_THROWS_AS(bad.validate(), InvalidConfig);
}

TEST_CASE("checkpoint round trip preserves names, shapes and values") {
  ParamStore<float> ps;
  Matrix<float> w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  ps.add("layer.weight", {2, 3}, w);
  ps.add("layer.bias", {3}, Matrix<float>::Constant(1, 3, -0.5f));
  const nlohmann::json cfg = {{"mode", "add"}, {"d_model", 3}};
  std::stringstream ss;
  write_checkpoint(ss, ps, cfg);
  const std::string bytes = ss.str();
  CHECK(bytes.rfind("FVCK1\n", 0) == 0);

  const auto ck = read_checkpoint(ss);
  CHECK(ck.config == cfg);
  REQUIRE(ck.params.size() == 2);
  CHECK(ck.params.entry(0).name == "layer.weight");
  CHECK(ck.params.entry(1).shape == Shape{3});
  CHECK(ck.params.value("layer.weight") == w);

  std::stringstream again;
  write_checkpoint(again, ck.params, ck.config);
  CHECK(again.str() == bytes);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 4));
  CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);
  std::stringstream wrong_magic("FVCK2\n");
  CHECK_THROWS_AS(read_checkpoint(wrong_magic), ParseError);
}
