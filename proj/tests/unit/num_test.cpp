#include <gtest/gtest.h>

#include <cmath>

#include "v6forge/autodiff.hpp"
#include "v6forge/gradcheck.hpp"
#include "v6forge/nn.hpp"
#include "v6forge/optim.hpp"
#include "v6forge/rng.hpp"
#include "v6forge/tensor.hpp"

using namespace v6forge;
using num::Graph;
using num::Parameter;
using num::Tensor;
using num::Var;

TEST(Tensor, ShapeAndAccess) {
  Tensor t({2, 3});
  EXPECT_EQ(t.rank(), 2);
  EXPECT_EQ(t.size(), 6u);
  t.at(1, 2) = 5.0;
  EXPECT_EQ(t.at(1, 2), 5.0);
  EXPECT_THROW(t.at(2, 0), IndexError);
  EXPECT_THROW(t.at(0, 3), IndexError);
  EXPECT_THROW(t.at(0, 0, 0), ShapeError);
  EXPECT_THROW(Tensor({2, 2, 2, 2}), ShapeError);
  EXPECT_THROW(Tensor({0, 2}), ShapeError);
  EXPECT_THROW(Tensor({2}, {1.0, 2.0, 3.0}), ShapeError);
  EXPECT_EQ(Tensor::scalar(4.0).item(), 4.0);
  EXPECT_THROW(Tensor({2}, {1.0, 2.0}).item(), ShapeError);
}

TEST(Tensor, SlabView) {
  Tensor t({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(t.slab(1)(0, 0), 5.0);
  EXPECT_EQ(t.slab(1)(1, 1), 8.0);
  EXPECT_EQ(t.at(1, 0, 1), 6.0);
}

TEST(Tensor, CosineSimilarity) {
  const std::vector<double> a = {1, 0};
  const std::vector<double> b = {0, 1};
  const std::vector<double> c = {2, 0};
  EXPECT_NEAR(num::cosine_similarity(a, b), 0.0, 1e-12);
  EXPECT_NEAR(num::cosine_similarity(a, c), 1.0, 1e-12);
  EXPECT_NEAR(num::cosine_similarity(a, std::vector<double>{-3, 0}), -1.0, 1e-12);
}

TEST(Ops, MatmulKnownProduct) {
  Graph g;
  Var a = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var b = g.constant(Tensor({2, 2}, {5, 6, 7, 8}));
  const Var c = num::matmul(a, b);
  EXPECT_EQ(c->value.at(0, 0), 19.0);
  EXPECT_EQ(c->value.at(0, 1), 22.0);
  EXPECT_EQ(c->value.at(1, 0), 43.0);
  EXPECT_EQ(c->value.at(1, 1), 50.0);
  EXPECT_THROW(num::matmul(a, g.constant(Tensor({3, 2}))), ShapeError);
}

TEST(Ops, SoftmaxKnownDistribution) {
  Graph g;
  Var x = g.constant(Tensor({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}));
  const Var p = num::softmax_lastdim(x);
  EXPECT_NEAR(p->value[0], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(p->value[1], 2.0 / 6.0, 1e-12);
  EXPECT_NEAR(p->value[2], 3.0 / 6.0, 1e-12);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  rng::Engine eng = rng::engine(3);
  Graph g;
  Var x = g.constant(Tensor::uniform({4, 7}, -50.0, 50.0, eng));
  const Var p = num::softmax_lastdim(x);
  for (int r = 0; r < 4; ++r) {
    double s = 0.0;
    for (int c = 0; c < 7; ++c) s += p->value.at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, SoftmaxStableAtLargeMagnitudes) {
  Graph g;
  Var x = g.constant(Tensor({2}, {1000.0, 1000.0}));
  const Var p = num::softmax_lastdim(x);
  EXPECT_NEAR(p->value[0], 0.5, 1e-12);
  EXPECT_NEAR(p->value[1], 0.5, 1e-12);
}

TEST(Ops, LayerNormKnownValues) {
  Graph g;
  Parameter gain("g", Tensor({2}, {1.0, 1.0}));
  Parameter bias("b", Tensor({2}, {0.0, 0.0}));
  Var x = g.constant(Tensor({1, 2}, {-1.0, 1.0}));
  const Var y = num::layer_norm(x, g.param(gain), g.param(bias));
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y->value.at(0, 0), -expect, 1e-12);
  EXPECT_NEAR(y->value.at(0, 1), expect, 1e-12);
}

TEST(Ops, AttentionSaturatesToValueRow) {
  // Orthogonal keys; the query is a large multiple of key row 0, so the
  // weights collapse onto value row 0.
  Graph g;
  Var q = g.constant(Tensor({1, 2}, {1000.0, 0.0}));
  Var k = g.constant(Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
  Var v = g.constant(Tensor({2, 2}, {3.0, 4.0, 5.0, 6.0}));
  const Var out = num::attention(q, k, v);
  ASSERT_EQ(out->value.shape(), (std::vector<int>{1, 2}));
  EXPECT_NEAR(out->value.at(0, 0), 3.0, 1e-6);
  EXPECT_NEAR(out->value.at(0, 1), 4.0, 1e-6);
}

TEST(Ops, CausalMaskZeroesWeightsExactly) {
  rng::Engine eng = rng::engine(11);
  Graph g;
  const int L = 6, d = 4;
  Var q = g.constant(Tensor::uniform({L, d}, -1.0, 1.0, eng));
  Var k = g.constant(Tensor::uniform({L, d}, -1.0, 1.0, eng));
  Var v = g.constant(Tensor::uniform({L, d}, -1.0, 1.0, eng));
  const Tensor mask = num::causal_mask(L);
  std::vector<Tensor> weights;
  num::AttentionOpts opts;
  opts.mask = &mask;
  opts.weights_out = &weights;
  num::attention(q, k, v, opts);
  ASSERT_EQ(weights.size(), 1u);
  for (int i = 0; i < L; ++i) {
    for (int j = i + 1; j < L; ++j) EXPECT_EQ(weights[0].at(0, i, j), 0.0) << i << "," << j;
    double s = 0.0;
    for (int j = 0; j <= i; ++j) s += weights[0].at(0, i, j);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, MultiHeadSingleHeadMatchesPlainAttention) {
  rng::Engine eng = rng::engine(5);
  Graph g;
  const int L = 3, d = 4;
  num::MultiHeadParams p("mh", d, eng);
  Var x = g.constant(Tensor::uniform({L, d}, -1.0, 1.0, eng));
  const Var mh = num::multi_head(g, x, x, x, p, 1);
  const Var plain = num::matmul(
      num::attention(num::matmul(x, g.param(p.wq)), num::matmul(x, g.param(p.wk)),
                     num::matmul(x, g.param(p.wv))),
      g.param(p.wo));
  ASSERT_EQ(mh->value.shape(), plain->value.shape());
  for (std::size_t i = 0; i < mh->value.size(); ++i)
    EXPECT_NEAR(mh->value[i], plain->value[i], 1e-12);
}

TEST(Ops, MultiHeadOutputShape) {
  rng::Engine eng = rng::engine(6);
  Graph g;
  num::MultiHeadParams p("mh", 100, eng);
  Var x = g.constant(Tensor::uniform({2, 16, 100}, -0.1, 0.1, eng));
  const Var out = num::multi_head(g, x, x, x, p, 10);
  EXPECT_EQ(out->value.shape(), (std::vector<int>{2, 16, 100}));
  EXPECT_THROW(num::multi_head(g, x, x, x, p, 7), ParamError);
}

TEST(Ops, SinusoidalPeValues) {
  const Tensor pe = num::sinusoidal_pe(4, 6);
  EXPECT_EQ(pe.at(0, 0), 0.0);
  EXPECT_EQ(pe.at(0, 1), 1.0);
  EXPECT_NEAR(pe.at(1, 0), std::sin(1.0), 1e-12);
  EXPECT_NEAR(pe.at(1, 1), std::cos(1.0), 1e-12);
  EXPECT_NEAR(pe.at(2, 2), std::sin(2.0 / std::pow(10000.0, 2.0 / 6.0)), 1e-12);
  // An offset shifts the position argument.
  const Tensor shifted = num::sinusoidal_pe(2, 6, 2);
  EXPECT_NEAR(shifted.at(0, 0), pe.at(2, 0), 1e-12);
}

TEST(Ops, DropoutScalesSurvivors) {
  rng::Engine eng = rng::engine(17);
  Graph g;
  Var x = g.constant(Tensor::full({100}, 2.0));
  const Var y = num::dropout(x, 0.25, eng);
  int kept = 0;
  for (std::size_t i = 0; i < y->value.size(); ++i) {
    const double v = y->value[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - 2.0 / 0.75) < 1e-12);
    if (v != 0.0) ++kept;
  }
  EXPECT_GT(kept, 50);
  EXPECT_LT(kept, 95);
  // Rate zero is the identity.
  const Var z = num::dropout(x, 0.0, eng);
  EXPECT_EQ(z.get(), x.get());
  EXPECT_THROW(num::dropout(x, 1.0, eng), ParamError);
}

TEST(Ops, CosineDistanceMeanValueAndNormError) {
  Graph g;
  Var pred = g.constant(Tensor({2, 2}, {1.0, 0.0, 0.0, 2.0}));
  // Rows: parallel (distance 0) and orthogonal (distance 1).
  const Var d = num::cosine_distance_mean(pred, Tensor({2, 2}, {3.0, 0.0, 5.0, 0.0}));
  EXPECT_NEAR(d->value.item(), 0.5, 1e-12);
  EXPECT_THROW(num::cosine_distance_mean(pred, Tensor({2, 2}, {1.0, 0.0, 0.0, 0.0})), NormError);
}

TEST(Graph, BackwardStateErrors) {
  Graph g;
  EXPECT_THROW(g.backward(nullptr), StateError);
  EXPECT_THROW(g.accumulate_param_grads(), StateError);
  Parameter p("p", Tensor({2}, {1.0, 2.0}));
  Var loss = num::sum_all(g.param(p));
  EXPECT_THROW(g.backward(g.param(p)), ShapeError);  // non-scalar
  g.backward(loss);
  EXPECT_THROW(g.backward(loss), StateError);
}

TEST(Graph, GradsAccumulateAcrossReuse) {
  Graph g;
  Parameter p("x", Tensor({2}, {3.0, -2.0}));
  Var x = g.param(p);
  const Var loss = num::sum_all(num::mul(x, x));
  g.backward(loss);
  p.zero_grad();
  g.accumulate_param_grads();
  EXPECT_NEAR(p.grad[0], 6.0, 1e-12);
  EXPECT_NEAR(p.grad[1], -4.0, 1e-12);
}

namespace {

// Composite function touching matmul, add_bias, softmax, weighted_sum.
double mlp_loss(Parameter& w, Parameter& b, const Tensor& x, const Tensor& wt, Parameter* fill) {
  Graph g;
  Var h = num::softmax_lastdim(num::add_bias(num::matmul(g.constant(x), g.param(w)), g.param(b)));
  Var loss = num::weighted_sum(h, wt);
  if (fill) {
    g.backward(loss);
    w.zero_grad();
    b.zero_grad();
    g.accumulate_param_grads();
  }
  return loss->value.item();
}

}  // namespace

TEST(GradCheck, MlpGradientsMatchFiniteDifferences) {
  rng::Engine eng = rng::engine(23);
  Parameter w("w", Tensor::uniform({4, 5}, -1.0, 1.0, eng));
  Parameter b("b", Tensor::uniform({5}, -1.0, 1.0, eng));
  const Tensor x = Tensor::uniform({3, 4}, -1.0, 1.0, eng);
  const Tensor wt = Tensor::uniform({3, 5}, -1.0, 1.0, eng);
  const auto res = num::check_gradients(
      {&w, &b}, [&] { return mlp_loss(w, b, x, wt, nullptr); },
      [&] { mlp_loss(w, b, x, wt, &w); });
  EXPECT_TRUE(res.pass) << res.worst_param << "[" << res.worst_coord << "] rel " << res.max_rel_err;
  EXPECT_EQ(res.checked, 25);
  EXPECT_LT(res.max_rel_err, 1e-4);
}

TEST(GradCheck, MutatedGradientsFail) {
  rng::Engine eng = rng::engine(29);
  Parameter w("w", Tensor::uniform({4, 5}, -1.0, 1.0, eng));
  Parameter b("b", Tensor::uniform({5}, -1.0, 1.0, eng));
  const Tensor x = Tensor::uniform({3, 4}, -1.0, 1.0, eng);
  const Tensor wt = Tensor::uniform({3, 5}, -1.0, 1.0, eng);
  const auto res = num::check_gradients(
      {&w, &b}, [&] { return mlp_loss(w, b, x, wt, nullptr); },
      [&] {
        mlp_loss(w, b, x, wt, &w);
        w.grad.scale_inplace(-1.0);  // corrupt on purpose
        b.grad.scale_inplace(-1.0);
      });
  EXPECT_FALSE(res.pass);
}

namespace {

// Composite touching the remaining ops: gather, tile, concat (both axes),
// slice, reshape, layer_norm, relu, sigmoid, log_softmax, mul, scale, add,
// add_tensor, mul_tensor, bmm, bmm_nt, attention with mask, cosine loss.
struct WideNet {
  Parameter table{"table", {}};
  Parameter gain{"gain", {}};
  Parameter bias{"bias", {}};
  Parameter start{"start", {}};
  Parameter proj{"proj", {}};
  Tensor target, weights, noise_add, noise_mul;
  Tensor mask;

  explicit WideNet(rng::Engine& eng) {
    table = Parameter("table", Tensor::uniform({6, 4}, -1.0, 1.0, eng));
    gain = Parameter("gain", Tensor::uniform({4}, 0.5, 1.5, eng));
    bias = Parameter("bias", Tensor::uniform({4}, -0.5, 0.5, eng));
    start = Parameter("start", Tensor::uniform({4}, -1.0, 1.0, eng));
    proj = Parameter("proj", Tensor::uniform({4, 4}, -1.0, 1.0, eng));
    target = Tensor::uniform({2, 3, 4}, -1.0, 1.0, eng);
    weights = Tensor::uniform({2, 3, 4}, -1.0, 1.0, eng);
    noise_add = Tensor::uniform({3, 4}, -0.2, 0.2, eng);
    noise_mul = Tensor::uniform({2, 3, 4}, 0.5, 1.5, eng);
    mask = num::causal_mask(3);
  }

  std::vector<Parameter*> params() { return {&table, &gain, &bias, &start, &proj}; }

  double run(bool fill) {
    Graph g;
    Var rows = num::gather_rows(g.param(table), {0, 2, 4, 1});                 // (4,4)
    Var head = num::reshape(num::tile_rows(g.param(start), 2), {2, 1, 4});     // (2,1,4)
    Var body = num::reshape(num::slice_lastdim(rows, 0, 4), {2, 2, 4});        // (2,2,4)
    Var seq = num::concat_axis1(head, body);                                   // (2,3,4)
    seq = num::add_tensor(seq, noise_add);
    seq = num::mul_tensor(seq, noise_mul);
    num::AttentionOpts opts;
    opts.mask = &mask;
    Var att = num::attention(seq, seq, seq, opts);                             // (2,3,4)
    Var normed = num::layer_norm(att, g.param(gain), g.param(bias));
    Var a = num::relu(num::slice_lastdim(normed, 0, 2));
    Var b = num::sigmoid(num::slice_lastdim(normed, 2, 2));
    Var joined = num::matmul(num::concat_lastdim({a, b}), g.param(proj));      // (2,3,4)
    Var lsm = num::log_softmax_lastdim(joined);
    Var mixed = num::add(num::mul(lsm, num::scale(seq, 0.5)), joined);
    Var loss = num::add(num::weighted_sum(mixed, weights),
                        num::cosine_distance_mean(joined, target));
    if (fill) {
      g.backward(loss);
      for (Parameter* p : params()) p->zero_grad();
      g.accumulate_param_grads();
    }
    return loss->value.item();
  }
};

}  // namespace

TEST(GradCheck, WideCompositeGradientsMatchFiniteDifferences) {
  rng::Engine eng = rng::engine(31);
  WideNet net(eng);
  num::GradCheckOptions opts;
  opts.max_coords = 200;
  const auto res = num::check_gradients(
      net.params(), [&] { return net.run(false); }, [&] { net.run(true); }, opts);
  EXPECT_TRUE(res.pass) << res.worst_param << "[" << res.worst_coord << "] rel " << res.max_rel_err;
  EXPECT_EQ(res.checked, 52);
  EXPECT_LT(res.max_rel_err, 1e-4);
}

TEST(GradCheck, MultiHeadWithDroppedSeedGradients) {
  // Dropout uses a fixed engine so both loss() evaluations and the backward
  // pass see the same mask; gradients must still match.
  rng::Engine init = rng::engine(37);
  num::MultiHeadParams p("mh", 6, init);
  const Tensor x = Tensor::uniform({4, 6}, -1.0, 1.0, init);
  const Tensor wt = Tensor::uniform({4, 6}, -1.0, 1.0, init);
  const Tensor mask = num::causal_mask(4);
  auto run = [&](bool fill) {
    Graph g;
    rng::Engine drop = rng::engine(99);  // same mask every call
    num::AttentionOpts opts;
    opts.mask = &mask;
    opts.dropout_rate = 0.25;
    opts.eng = &drop;
    Var out = num::multi_head(g, g.constant(x), g.constant(x), g.constant(x), p, 2, opts);
    Var loss = num::weighted_sum(out, wt);
    if (fill) {
      g.backward(loss);
      for (Parameter* q : p.parameters()) q->zero_grad();
      g.accumulate_param_grads();
    }
    return loss->value.item();
  };
  const auto res = num::check_gradients(
      p.parameters(), [&] { return run(false); }, [&] { run(true); });
  EXPECT_TRUE(res.pass) << res.worst_param << " rel " << res.max_rel_err;
}

TEST(Adam, FirstStepApproximatesSignedLearningRate)
{
  Parameter p("x", Tensor({2}, {10.0, -4.0}));
  p.zero_grad();
  p.grad[0] = 3.0;
  p.grad[1] = -7.0;
  num::Adam opt({.lr = 1e-3});
  opt.step({&p});
  EXPECT_NEAR(p.value[0], 10.0 - 1e-3, 1e-8);
  EXPECT_NEAR(p.value[1], -4.0 + 1e-3, 1e-8);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, MatchesManualRecurrence) {
  // Replay the update rule independently for several steps.
  Parameter p("x", Tensor({1}, {2.0}));
  num::Adam opt({.lr = 0.05});
  double x = 2.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 25; ++t) {
    const double grad = 2.0 * x + 1.0;  // d/dx (x^2 + x)
    p.zero_grad();
    p.grad[0] = 2.0 * p.value[0] + 1.0;
    opt.step({&p});
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    x -= 0.05 * mhat / (std::sqrt(vhat) + 1e-8);
    EXPECT_NEAR(p.value[0], x, 1e-12) << "step " << t;
  }
}

TEST(Adam, ConvergesOnQuadratic) {
  Parameter p("x", Tensor({1}, {-8.0}));
  num::Adam opt({.lr = 0.05});
  for (int t = 0; t < 2000; ++t) {
    p.zero_grad();
    p.grad[0] = 2.0 * (p.value[0] - 3.0);
    opt.step({&p});
  }
  EXPECT_NEAR(p.value[0], 3.0, 1e-2);
  EXPECT_THROW(num::Adam({.lr = -1.0}), ParamError);
}
