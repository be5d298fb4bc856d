#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "gfmlab/autodiff/grad_check.hpp"
#include "gfmlab/encoder/gcn.hpp"
#include "gfmlab/encoder/head.hpp"
#include "gfmlab/encoder/pretrain.hpp"
#include "gfmlab/errors.hpp"
#include "gfmlab/graphcore/generators.hpp"
#include "support/random_expr.hpp"

namespace gfmlab {
namespace {

using gfmlab::testing::random_tensor;

Graph random_graph(Rng& rng, std::size_t n, std::size_t d, double p = 0.4) {
  Graph g;
  g.x = random_tensor(rng, n, d);
  g.a = Tensor(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) g.a(i, j) = g.a(j, i) = 1.0;
  return g;
}

TEST(GcnForward, ZeroWeightsGiveZeroOutput) {
  Rng rng(1);
  const Graph g = random_graph(rng, 5, 3);
  const EncoderParams p{Tensor(3, 4), Tensor(4, 2)};
  EXPECT_EQ(gcn_forward(p, g), Tensor(5, 2));
}

TEST(GcnForward, SingleNodeHandValue) {
  Graph g;
  g.x = Tensor::row({1.0, -0.5});
  g.a = Tensor(1, 1);
  const EncoderParams p{Tensor::from_rows({{1.0, 0.5}, {0.5, 1.0}}), Tensor::from_rows({{2.0}, {3.0}})};
  // x W1 = [0.75, 0], relu keeps it, times W2 = 1.5.
  EXPECT_DOUBLE_EQ(gcn_forward(p, g).item(), 1.5);
}

TEST(GcnForward, ShapeContractAndMismatch) {
  Rng rng(2);
  const Graph g = random_graph(rng, 7, 3);
  const EncoderParams p = init_encoder(3, 5, 4, rng);
  const Tensor z = gcn_forward(p, g);
  EXPECT_EQ(z.rows(), 7u);
  EXPECT_EQ(z.cols(), 4u);
  const EncoderParams wrong = init_encoder(2, 5, 4, rng);
  EXPECT_THROW(gcn_forward(wrong, g), ContractError);
}

TEST(GcnForward, NodeEmbeddingIsRowOfOutput) {
  Rng rng(3);
  const Graph g = random_graph(rng, 9, 4);
  const EncoderParams p = init_encoder(4, 6, 3, rng);
  const Tensor z = gcn_forward(p, g);
  for (std::size_t v = 0; v < 9; ++v) EXPECT_EQ(node_embedding(p, g, v), z.row_copy(v));
  EXPECT_THROW(node_embedding(p, g, 9), ContractError);
}

TEST(GcnForward, SingleNodeEmbeddingsAgree) {
  Rng rng(4);
  const Graph g = random_graph(rng, 1, 3);
  const EncoderParams p = init_encoder(3, 4, 2, rng);
  EXPECT_EQ(node_embedding(p, g, 0), graph_embedding(p, g));
}

TEST(GcnForward, NodeEmbeddingEquivariantToRelabelling) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 6 + rng.index(6);
    const Graph g = random_graph(rng, n, 3);
    const EncoderParams p = init_encoder(3, 5, 4, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const Graph h = induced_subgraph(g, perm);
    std::size_t v_new = 0;
    while (perm[v_new] != 0) ++v_new;
    EXPECT_LT(ad::max_abs_diff(node_embedding(p, g, 0), node_embedding(p, h, v_new)), 1e-12);
  }
}

TEST(GcnForward, GraphEmbeddingOfDisjointUnion) {
  Rng rng(6);
  const Graph g = random_graph(rng, 5, 3);
  const EncoderParams p = init_encoder(3, 4, 2, rng);
  Graph u;
  u.x = Tensor(10, 3);
  u.a = Tensor(10, 10);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t k = 0; k < 3; ++k) u.x(5 * c + i, k) = g.x(i, k);
      for (std::size_t j = 0; j < 5; ++j) u.a(5 * c + i, 5 * c + j) = g.a(i, j);
    }
  EXPECT_LT(ad::max_abs_diff(graph_embedding(p, u), graph_embedding(p, g)), 1e-12);
}

TEST(GcnForward, GradientsPassGradCheck) {
  Rng rng(7);
  const Graph g = random_graph(rng, 6, 3);
  const Tensor a_hat = sym_normalize(g.a);
  const EncoderParams p = init_encoder(3, 4, 3, rng);
  const Tensor target = random_tensor(rng, 6, 3);
  auto loss = [&](ad::Var z) { return ad::sum(ad::row_cosine(z, z.tape()->constant(target))); };
  auto f_w1 = [&](ad::Tape& t, ad::Var w1) {
    return loss(gcn_forward({w1, t.constant(p.w2)}, a_hat, t.constant(g.x)));
  };
  auto f_w2 = [&](ad::Tape& t, ad::Var w2) {
    return loss(gcn_forward({t.constant(p.w1), w2}, a_hat, t.constant(g.x)));
  };
  auto f_x = [&](ad::Tape& t, ad::Var x) {
    return loss(gcn_forward({t.constant(p.w1), t.constant(p.w2)}, a_hat, x));
  };
  EXPECT_LT(ad::grad_check(f_w1, p.w1, 1e-5), 1e-4);
  EXPECT_LT(ad::grad_check(f_w2, p.w2, 1e-5), 1e-4);
  EXPECT_LT(ad::grad_check(f_x, g.x, 1e-5), 1e-4);
}

TEST(EncoderParamsTest, FlattenRoundTripAndCheckpoint) {
  Rng rng(8);
  const EncoderParams p = init_encoder(3, 4, 2, rng);
  EXPECT_EQ(p.unflatten(p.flatten()), p);
  EXPECT_EQ(EncoderParams::from_param_set(p.to_param_set()), p);
  EXPECT_EQ(p.flatten().size(), 3u * 4 + 4u * 2);
}

TEST(EncoderParamsTest, XavierBound) {
  Rng rng(9);
  const Tensor w = xavier_uniform(10, 6, rng);
  const double a = std::sqrt(6.0 / 16.0);
  for (double v : w.values()) EXPECT_LE(std::abs(v), a);
}

TEST(NtXent, HandValueTwoPairs) {
  ad::Tape t;
  const Tensor basis = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  ad::Var loss = nt_xent(t.constant(basis), t.constant(basis), 0.5);
  const double e2 = std::exp(2.0);
  EXPECT_NEAR(loss.value().item(), -std::log(e2 / (e2 + 2.0)), 1e-12);
  EXPECT_NEAR(loss.value().item(), 0.2395, 1e-4);
}

TEST(NtXent, GradientsPassGradCheck) {
  Rng rng(10);
  const Tensor other = random_tensor(rng, 3, 4);
  auto f = [&](ad::Tape& t, ad::Var a) { return nt_xent(a, t.constant(other), 0.5); };
  EXPECT_LT(ad::grad_check(f, random_tensor(rng, 3, 4), 1e-5), 1e-4);
}

TEST(NtXent, RejectsSinglePair) {
  ad::Tape t;
  EXPECT_THROW(nt_xent(t.constant(Tensor(1, 2, 1.0)), t.constant(Tensor(1, 2, 1.0)), 0.5),
               ContractError);
}

std::vector<Graph> small_domains(std::uint64_t seed) {
  SbmSpec spec;
  spec.num_domains = 2;
  spec.nodes_per_class = 8;
  spec.feature_dim = 4;
  Rng rng(seed);
  return gen_sbm(spec, rng);
}

PretrainConfig quick_pretrain() {
  PretrainConfig cfg;
  cfg.lr = 0.05;
  cfg.max_epochs = 4;
  cfg.batch = 4;
  cfg.subgraphs_per_epoch = 8;
  return cfg;
}

TEST(Pretrain, ZeroEpochsReturnsInitialisation) {
  const auto graphs = small_domains(1);
  Rng rng(2);
  const EncoderParams init = init_encoder(4, 8, 8, rng);
  PretrainConfig cfg = quick_pretrain();
  cfg.max_epochs = 0;
  const auto r = pretrain_contrastive(graphs, init, cfg, rng);
  EXPECT_EQ(r.params, init);
  EXPECT_TRUE(r.loss_trace.empty());
}

TEST(Pretrain, LossPositiveAndReproducible) {
  const auto graphs = small_domains(3);
  Rng init_rng(4);
  const EncoderParams init = init_encoder(4, 8, 8, init_rng);
  Rng r1(5), r2(5);
  const auto a = pretrain_contrastive(graphs, init, quick_pretrain(), r1);
  const auto b = pretrain_contrastive(graphs, init, quick_pretrain(), r2);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  ASSERT_EQ(a.loss_trace.size(), 4u);
  for (double l : a.loss_trace) EXPECT_GT(l, 0.0);
  EXPECT_NE(a.params, init);
}

TEST(Pretrain, PatienceStopsEarly) {
  const auto graphs = small_domains(6);
  Rng rng(7);
  const EncoderParams init = init_encoder(4, 8, 8, rng);
  PretrainConfig cfg = quick_pretrain();
  cfg.lr = 1e-12;  // loss is flat, so improvements are noise-level
  cfg.max_epochs = 200;
  cfg.patience = 2;
  const auto r = pretrain_contrastive(graphs, init, cfg, rng);
  EXPECT_LT(r.loss_trace.size(), 200u);
}

TEST(Pretrain, RejectsInvalidConfig) {
  PretrainConfig cfg;
  cfg.temperature = 0.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = PretrainConfig{};
  cfg.edge_drop_p = 1.0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = PretrainConfig{};
  cfg.batch = 1;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Augment, ZeroProbabilitiesKeepGraph) {
  Rng rng(11);
  const Graph g = random_graph(rng, 6, 3);
  const GraphView v = augment(g, 0.0, 0.0, rng);
  EXPECT_EQ(v.x, g.x);
  EXPECT_EQ(v.a_hat, sym_normalize(g.a));
}

TEST(Head, SeparablePointsFitPerfectly) {
  const Tensor e = Tensor::from_rows({{1.0, 0.0}, {-1.0, 0.5}});
  const std::vector<int> y = {0, 1};
  const LinearHead h = fit_head(e, y, 2);
  EXPECT_EQ(predict(h, e.row_copy(0)), 0);
  EXPECT_EQ(predict(h, e.row_copy(1)), 1);
}

TEST(Head, IdenticalFeaturesGiveChanceAccuracy) {
  const int c = 4;
  Tensor e(8, 3, 0.7);
  std::vector<int> y;
  for (int i = 0; i < 8; ++i) y.push_back(i % c);
  Rng rng(12);
  const HeadFit fit = train_head(e, y, c, 2, rng);
  int correct = 0;
  for (std::size_t i = 0; i < 8; ++i) correct += predict(fit.head, e.row_copy(i)) == y[i];
  EXPECT_DOUBLE_EQ(correct / 8.0, 1.0 / c);
}

TEST(Head, ShotsSampledPerClass) {
  Rng rng(13);
  const Tensor e = random_tensor(rng, 20, 3);
  std::vector<int> y(20);
  for (int i = 0; i < 20; ++i) y[static_cast<std::size_t>(i)] = i % 2;
  y[4] = kUnlabeled;
  const HeadFit fit = train_head(e, y, 2, 5, rng);
  ASSERT_EQ(fit.chosen.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(y[fit.chosen[k]], static_cast<int>(k / 5));
  EXPECT_THROW(train_head(e, y, 2, 11, rng), ContractError);
}

TEST(Head, TrainingIsSeedDeterministic) {
  Rng data(14);
  const Tensor e = random_tensor(data, 30, 4);
  std::vector<int> y(30);
  for (int i = 0; i < 30; ++i) y[static_cast<std::size_t>(i)] = i % 3;
  Rng r1(15), r2(15);
  EXPECT_EQ(train_head(e, y, 3, 5, r1).head, train_head(e, y, 3, 5, r2).head);
}

TEST(Predict, TieAndShiftRules) {
  LinearHead h{Tensor::identity(3), Tensor(1, 3)};
  EXPECT_EQ(predict(h, Tensor::row({0.0, 1.0, 0.0})), 1);
  EXPECT_EQ(predict(h, Tensor::row({0.5, 0.5, 0.5})), 0);
  const Tensor e = Tensor::row({0.2, -0.4, 0.9});
  const int base = predict(h, e);
  h.b = Tensor(1, 3, 7.5);
  EXPECT_EQ(predict(h, e), base);
}

struct FinetuneFixture {
  std::vector<NodeSample> samples;
  EncoderParams params;
  LinearHead head;
};

FinetuneFixture make_finetune_fixture() {
  const auto graphs = small_domains(20);
  FinetuneFixture f;
  std::vector<std::size_t> nodes = {0, 3, 9, 12, 17, 21, 26, 30};
  f.samples = make_samples(graphs[0], nodes, EgoConfig{});
  Rng rng(21);
  f.params = init_encoder(4, 6, 5, rng);
  Tensor emb(nodes.size(), 5);
  std::vector<int> y;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Tensor r = sample_embedding(f.params, f.samples[i]);
    for (std::size_t k = 0; k < 5; ++k) emb(i, k) = r(0, k);
    y.push_back(f.samples[i].label);
  }
  f.head = fit_head(emb, y, 4, HeadConfig{1.0, 20});
  return f;
}

TEST(Finetune, ZeroLearningRateLeavesParams) {
  const auto f = make_finetune_fixture();
  const auto r = finetune(f.params, f.samples, f.head, FinetuneConfig{0.0, 5});
  EXPECT_EQ(r.params, f.params);
  EXPECT_EQ(r.head, f.head);
}

TEST(Finetune, CrossEntropyNonIncreasingWithSmallLr) {
  const auto f = make_finetune_fixture();
  const EncoderParams before = f.params;
  const auto r = finetune(f.params, f.samples, f.head, FinetuneConfig{0.01, 40});
  ASSERT_EQ(r.loss_trace.size(), 40u);
  for (std::size_t e = 1; e < r.loss_trace.size(); ++e) {
    EXPECT_LE(r.loss_trace[e], r.loss_trace[e - 1] + 1e-15) << "epoch " << e;
  }
  EXPECT_EQ(f.params, before);
  EXPECT_NE(r.params, f.params);
}

TEST(Finetune, Reproducible) {
  const auto f = make_finetune_fixture();
  const auto a = finetune(f.params, f.samples, f.head, FinetuneConfig{0.01, 10});
  const auto b = finetune(f.params, f.samples, f.head, FinetuneConfig{0.01, 10});
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.head, b.head);
}

}  // namespace
}  // namespace gfmlab
