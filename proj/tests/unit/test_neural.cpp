#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "crystalgym/core/errors.hpp"
#include "crystalgym/core/pool.hpp"
#include "crystalgym/nn/megnet.hpp"
#include "support.hpp"

using namespace crystalgym;
using namespace crystalgym::nn;
using namespace crystalgym::test;

namespace {

// Relabels nodes by `perm` (new row i holds old row perm[i]) and reverses the edge list.
GraphBatch permuted(const GraphBatch& b, const std::vector<int>& perm) {
  GraphBatch p = b;
  std::vector<int> inverse(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    p.nodes.row(static_cast<Eigen::Index>(i)) = b.nodes.row(perm[i]);
    p.node_graph[i] = b.node_graph[perm[i]];
  }
  const auto ne = b.src.size();
  for (std::size_t k = 0; k < ne; ++k) {
    const std::size_t from = ne - 1 - k;
    p.src[k] = inverse[b.src[from]];
    p.dst[k] = inverse[b.dst[from]];
    p.edge_graph[k] = b.edge_graph[from];
    p.edges(static_cast<Eigen::Index>(k), 0) = b.edges(static_cast<Eigen::Index>(from), 0);
  }
  for (auto& f : p.focus_row) f = f < 0 ? -1 : inverse[f];
  return p;
}

}  // namespace

// --- autodiff ---------------------------------------------------------------

TEST(Autodiff, SumOfParamsHasUnitGradient) {
  std::mt19937_64 rng(1);
  auto a = parameter(random_matrix(3, 4, rng));
  auto b = parameter(random_matrix(1, 2, rng));
  backward(add(sum(a), sum(b)));
  EXPECT_TRUE(a.grad().isApproxToConstant(1.0));
  EXPECT_TRUE(b.grad().isApproxToConstant(1.0));
}

TEST(Autodiff, ZeroTimesOutputGivesZeroGradient) {
  std::mt19937_64 rng(2);
  auto w = parameter(random_matrix(3, 3, rng));
  auto x = constant(random_matrix(2, 3, rng));
  backward(scale(sum(softplus(matmul(x, w))), 0.0));
  EXPECT_TRUE(w.grad().isZero(0.0));
}

TEST(Autodiff, Errors) {
  EXPECT_THROW(backward(Tensor{}), GraphError);
  auto a = parameter(Matrix::Ones(2, 2));
  EXPECT_THROW(backward(a), GraphError);
  EXPECT_THROW(matmul(a, parameter(Matrix::Ones(3, 1))), ShapeError);
  EXPECT_THROW(add(a, parameter(Matrix::Ones(2, 3))), ShapeError);
  EXPECT_THROW(a.item(), ShapeError);
}

TEST(Autodiff, LeafGradientsAccumulateUntilCleared) {
  auto a = parameter(Matrix::Constant(1, 1, 2.0));
  backward(square(a));
  backward(square(a));
  EXPECT_DOUBLE_EQ(a.grad()(0, 0), 8.0);
  a.zero_grad();
  EXPECT_DOUBLE_EQ(a.grad()(0, 0), 0.0);
}

TEST(Autodiff, NoGradGuardRecordsNothing) {
  auto a = parameter(Matrix::Constant(1, 1, 2.0));
  Tensor y;
  {
    NoGradGuard guard;
    y = square(a);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_DOUBLE_EQ(y.item(), 4.0);
  EXPECT_TRUE(square(a).requires_grad());
}

TEST(Autodiff, ElementwiseOpsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::vector<Tensor> in = {parameter(random_matrix(3, 4, rng)), parameter(random_matrix(3, 4, rng, 0.5, 2.0))};
  const auto f = [&] {
    Tensor t = add(mul(in[0], in[1]), sub(softplus(in[0]), log(in[1])));
    t = add(t, exp(scale(in[0], 0.3)));
    t = add(t, minimum(in[0], in[1]));
    t = add(t, relu(add_scalar(in[0], 0.05)));
    t = add(t, clamp(in[0], -0.5, 0.5));
    return mean(square(t));
  };
  EXPECT_LT(gradient_check(in, f), 1e-4);
}

TEST(Autodiff, StructuralOpsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::vector<Tensor> in = {parameter(random_matrix(5, 3, rng)), parameter(random_matrix(3, 4, rng)),
                            parameter(random_matrix(1, 4, rng)), parameter(random_matrix(5, 1, rng))};
  const std::vector<int> gather = {4, -1, 0, 0, 2, 3};
  const std::vector<int> segments = {0, 2, 2, 1, 0, 2};
  const std::vector<int> cols = {0, 3, 1, 1, 2};
  const auto f = [&] {
    Tensor z = add_row(matmul(in[0], in[1]), in[2]);           // 5x4
    z = mul_col(add_col(z, in[3]), in[3]);
    const Tensor parts[] = {z, in[0]};
    Tensor c = concat_cols(parts);                              // 5x7
    Tensor g2 = segment_mean(gather_rows(c, gather), segments, 4);  // 4x7, one empty segment
    Tensor ls = log_softmax(z);
    Tensor s = add(add(sum(row_sum(g2)), mean(row_mean(square(g2)))), sum(pick(ls, cols)));
    return add(add(s, sum(row_max(z))), sum(mul(softmax(z), z)));
  };
  EXPECT_LT(gradient_check(in, f), 1e-4);
}

TEST(Autodiff, LogSoftmaxIsStable) {
  Matrix m(1, 3);
  m << 1000.0, 1000.0, -1000.0;
  const auto ls = log_softmax(constant(m));
  EXPECT_NEAR(ls.value()(0, 0), -std::log(2.0), 1e-12);
  EXPECT_TRUE(std::isfinite(ls.value()(0, 2)));
}

// --- Adam -------------------------------------------------------------------

TEST(Adam, FirstStepClosedForm) {
  ParameterSet p;
  p.add("x", Matrix::Constant(1, 1, 3.0));
  Adam opt(p, {0.1});
  backward(p.get("x"));  // g = 1
  opt.step(p);
  // m_hat = 1, v_hat = 1 -> delta = lr / (1 + eps)
  EXPECT_NEAR(p.get("x").item(), 3.0 - 0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterSet p;
  p.add("x", Matrix::Constant(2, 2, 1.5));
  Adam opt(p, {0.1});
  for (int i = 0; i < 5; ++i) opt.step(p);
  EXPECT_TRUE(p.get("x").value().isApproxToConstant(1.5));
}

TEST(Adam, DeterministicTrajectories) {
  auto run = [] {
    ParameterSet p;
    std::mt19937_64 rng(9);
    p.add("w", random_matrix(3, 2, rng));
    Adam opt(p, {0.05});
    const Tensor x = constant(random_matrix(4, 3, rng));
    for (int i = 0; i < 50; ++i) {
      backward(mean(square(softplus(matmul(x, p.get("w"))))));
      opt.step(p);
    }
    return p.flatten();
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ShapeMismatch) {
  ParameterSet a, b;
  a.add("x", Matrix::Zero(1, 1));
  b.add("x", Matrix::Zero(2, 1));
  Adam opt(a, {});
  EXPECT_THROW(opt.step(b), ShapeError);
  ParameterSet c;
  EXPECT_THROW(opt.step(c), ShapeError);
}

TEST(Adam, GradientClipBoundsTheStepDirection) {
  ParameterSet p;
  p.add("x", Matrix::Zero(1, 2));
  Adam::Options o;
  o.learning_rate = 0.1;
  o.grad_clip = 1.0;
  Adam opt(p, o);
  Matrix g(1, 2);
  g << 30.0, 40.0;
  backward(sum(mul(p.get("x"), constant(g))));
  opt.step(p);
  // Adam normalises per coordinate, so the first step is still lr * sign(g).
  EXPECT_NEAR(p.get("x").value()(0, 0), -0.1, 1e-7);
}

// --- parameter sets ---------------------------------------------------------

TEST(Parameters, CloneCopySoftUpdate) {
  ParameterSet a;
  a.add("w", Matrix::Constant(2, 2, 1.0));
  auto b = a.clone();
  b[0].tensor.mutable_value().setConstant(3.0);
  EXPECT_EQ(a.get("w").value()(0, 0), 1.0);
  a.soft_update(b, 0.25);
  EXPECT_DOUBLE_EQ(a.get("w").value()(1, 1), 1.5);
  a.copy_from(b);
  EXPECT_EQ(a.flatten(), b.flatten());
  EXPECT_THROW(a.assign(std::vector<double>(3, 0.0)), ShapeError);
  EXPECT_THROW(a.get("nope"), LookupError);
  EXPECT_THROW(a.add("w", Matrix::Zero(1, 1)), ShapeError);
}

// --- MEGNet -----------------------------------------------------------------

TEST(Megnet, BatchLayout) {
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  const auto o1 = sample_observation(3, 3, space);
  const auto o2 = sample_observation(8, std::nullopt, space);
  const GraphFeatures* obs[] = {&o1, &o2};
  const auto b = make_batch(obs);
  EXPECT_EQ(b.graphs, 2u);
  EXPECT_EQ(b.nodes.rows(), 16);
  EXPECT_EQ(b.nodes.cols(), 20);
  EXPECT_EQ(b.focus_row, (std::vector<int>{3, -1}));
  EXPECT_EQ(b.nodes(3, 19), 1.0);
  EXPECT_EQ(b.nodes.col(19).sum(), 1.0);
  EXPECT_EQ(b.src.size(), o1.edge_count() + o2.edge_count());
  EXPECT_EQ(b.edge_graph.back(), 1);
  EXPECT_GE(*std::min_element(b.src.begin() + static_cast<long>(o1.edge_count()), b.src.end()), 8);
}

TEST(Megnet, ConfigValidation) {
  MegnetConfig c = tiny_config(19, 18, false);
  c.layers = 0;
  EXPECT_THROW(Megnet(c, 0), ConfigError);
  c = tiny_config(19, 18, false);
  c.width = 0;
  EXPECT_THROW(Megnet(c, 0), ConfigError);
}

TEST(Megnet, ZeroFinalWeightsGiveBias) {
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  Megnet net(tiny_config(19, 18, false), 5);
  auto& p = net.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].name == "head.out.W") p[i].tensor.mutable_value().setZero();
    if (p[i].name == "head.out.b") {
      for (Eigen::Index j = 0; j < 18; ++j) p[i].tensor.mutable_value()(0, j) = 0.1 * static_cast<double>(j);
    }
  }
  const auto o = sample_observation(2, 2, space);
  const auto out = net.forward(make_batch(o));
  ASSERT_EQ(out.cols(), 18);
  for (Eigen::Index j = 0; j < 18; ++j) EXPECT_EQ(out.value()(0, j), 0.1 * static_cast<double>(j));
}

TEST(Megnet, PermutationInvariance) {
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  MegnetConfig c = tiny_config(19, 18, true);
  c.width = 16;
  c.hidden = 24;
  Megnet net(c, 11);
  std::mt19937_64 rng(12);
  for (std::size_t filled : {0u, 3u, 7u, 8u}) {
    const auto o = sample_observation(filled, filled < 8 ? std::optional<std::size_t>(filled) : std::nullopt, space, 6.0);
    const auto b = make_batch(o);
    std::vector<int> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 5; ++trial) {
      std::shuffle(perm.begin(), perm.end(), rng);
      const auto a = net.forward(b).value();
      const auto pa = net.forward(permuted(b, perm)).value();
      EXPECT_LT((a - pa).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Megnet, DuplicatedGraphMatchesSingleCopy) {
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  Megnet net(tiny_config(19, 18, false), 13);
  const auto o = sample_observation(4, 4, space);
  const auto b = make_batch(o);
  GraphBatch d = b;
  const int n = static_cast<int>(b.nodes.rows());
  d.nodes.resize(2 * n, b.nodes.cols());
  d.nodes << b.nodes, b.nodes;
  d.nodes(n + b.focus_row[0], b.nodes.cols() - 1) = 1.0;  // the copy carries its own focus flag
  d.edges.resize(2 * b.edges.rows(), 1);
  d.edges << b.edges, b.edges;
  for (std::size_t k = 0; k < b.src.size(); ++k) {
    d.src.push_back(b.src[k] + n);
    d.dst.push_back(b.dst[k] + n);
    d.edge_graph.push_back(0);
  }
  for (int i = 0; i < n; ++i) d.node_graph.push_back(0);
  const auto single = net.forward(b).value();
  const auto twice = net.forward(d).value();
  EXPECT_LT((single - twice).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Megnet, OutputFiniteAndBatchConsistent) {
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  Megnet net(tiny_config(19, 18, true), 17);
  const auto o1 = sample_observation(1, 1, space);
  const auto o2 = sample_observation(8, std::nullopt, space);
  const GraphFeatures* obs[] = {&o1, &o2};
  const auto both = net.forward(make_batch(obs)).value();
  EXPECT_TRUE(both.allFinite());
  EXPECT_LT((both.row(0) - net.forward(make_batch(o1)).value().row(0)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((both.row(1) - net.forward(make_batch(o2)).value().row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Megnet, WrongLayoutIsShapeError) {
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  Megnet a(tiny_config(19, 18, false), 1), b(tiny_config(19, 17, false), 1);
  const auto batch = make_batch(sample_observation(2, 2, space));
  EXPECT_THROW(a.forward(batch, &b.parameters()), ShapeError);
  Megnet wrong_input(tiny_config(5, 18, false), 1);
  EXPECT_THROW(wrong_input.forward(batch), ShapeError);
}

TEST(Megnet, GradientsMatchFiniteDifferences) {
  const auto space = ActionSpace::preset(ActionSpaceId::small);
  const auto o1 = sample_observation(3, 3, space);
  const auto o2 = sample_observation(6, 6, space);
  const GraphFeatures* obs[] = {&o1, &o2};
  const auto batch = make_batch(obs);
  for (bool dueling : {false, true}) {
    Megnet net(tiny_config(19, 18, dueling), dueling ? 21 : 22);
    std::mt19937_64 rng(23);
    const Tensor w = constant(random_matrix(2, 18, rng));
    std::vector<Tensor> params;
    for (const auto& p : net.parameters()) params.push_back(p.tensor);
    const auto loss = [&] { return sum(mul(softplus(net.forward(batch)), w)); };
    EXPECT_LT(gradient_check(params, loss, 10), 1e-4) << (dueling ? "dueling" : "plain");
  }
}
