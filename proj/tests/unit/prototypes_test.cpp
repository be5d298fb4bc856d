#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "gfmlab/errors.hpp"
#include "gfmlab/prototypes/prototypes.hpp"
#include "support/fps_oracle.hpp"
#include "support/random_expr.hpp"

namespace gfmlab {
namespace {

using gfmlab::testing::brute_force_fps;
using gfmlab::testing::random_tensor;

TEST(Fps, SingleSelectionIsSeed) {
  Rng rng(1);
  EXPECT_EQ(fps(random_tensor(rng, 5, 2), 1, 3), std::vector<std::size_t>{3});
}

TEST(Fps, TieGoesToLowestIndex) {
  const Tensor pts = Tensor::from_rows({{0.0}, {10.0}, {4.0}, {6.0}});
  EXPECT_EQ(fps(pts, 3, 0), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Fps, FullSelectionIsPermutation) {
  Rng rng(2);
  const auto order = fps(random_tensor(rng, 17, 3), 17, 5);
  EXPECT_EQ(std::set<std::size_t>(order.begin(), order.end()).size(), 17u);
}

TEST(Fps, RejectsBadArguments) {
  const Tensor pts(4, 2);
  EXPECT_THROW(fps(pts, 5, 0), ContractError);
  EXPECT_THROW(fps(pts, 0, 0), ContractError);
  EXPECT_THROW(fps(pts, 2, 4), ContractError);
}

TEST(Fps, MatchesBruteForceOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(64), d = 1 + rng.index(8);
    const Tensor pts = random_tensor(rng, n, d, -5.0, 5.0);
    const std::size_t k = 1 + rng.index(n), seed = rng.index(n);
    EXPECT_EQ(fps(pts, k, seed), brute_force_fps(pts, k, seed)) << "trial " << trial;
  }
}

TEST(Fps, InvariantUnderRigidMotion) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng.index(30);
    const Tensor pts = random_tensor(rng, n, 2, -3.0, 3.0);
    const double th = rng.uniform(0.0, 6.283185307179586);
    const double tx = rng.uniform(-10, 10), ty = rng.uniform(-10, 10);
    Tensor moved(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      moved(i, 0) = std::cos(th) * pts(i, 0) - std::sin(th) * pts(i, 1) + tx;
      moved(i, 1) = std::sin(th) * pts(i, 0) + std::cos(th) * pts(i, 1) + ty;
    }
    const std::size_t k = 1 + rng.index(n);
    EXPECT_EQ(fps(pts, k, 0), fps(moved, k, 0));
  }
}

TEST(Fps, ZeroNoiseSimplexCoversAllClasses) {
  for (int m = 2; m <= 6; ++m) {
    MixtureSpec spec{m, 3.0, 0.0, 5, m};
    Rng rng(5);
    const auto pts = gen_gaussian_mixture(spec, rng);
    for (std::size_t seed = 0; seed < pts.points.rows(); seed += 3) {
      const auto order = fps(pts.points, static_cast<std::size_t>(m), seed);
      EXPECT_EQ(coverage_count(order, pts.labels), static_cast<std::size_t>(m));
    }
  }
}

TEST(Coverage, Counts) {
  const std::vector<int> labels = {0, 0, 1, 2, 2};
  EXPECT_EQ(coverage_count(std::vector<std::size_t>{0, 1, 2}, labels), 2u);
  EXPECT_EQ(coverage_count(std::vector<std::size_t>{3, 4}, labels), 1u);
  EXPECT_EQ(coverage_count(std::vector<std::size_t>{0, 1, 2, 3, 4}, labels), 3u);
  EXPECT_THROW(coverage_count(std::vector<std::size_t>{5}, labels), ContractError);
}

TEST(Monotonicity, ZeroNoiseControlIsCertain) {
  MixtureSpec spec{4, 1.0, 0.0, 25, 2};
  const std::vector<double> lambdas = {1, 2, 4, 8};
  Rng rng(6);
  const auto est = verify_fps_separation_monotonicity(spec, lambdas, 4, 4, 100, rng);
  for (std::size_t i = 0; i < lambdas.size(); ++i) EXPECT_EQ(est.p_hat(i), 1.0);
  EXPECT_TRUE(est.monotone);
}

TEST(Monotonicity, LargeSeparationBeatsHugeNoise) {
  MixtureSpec spec{4, 1.0, 50.0, 25, 2};
  const std::vector<double> lambdas = {1, 400};
  Rng rng(7);
  const auto est = verify_fps_separation_monotonicity(spec, lambdas, 4, 4, 200, rng);
  EXPECT_GE(est.p_hat(1), est.p_hat(0));
  EXPECT_TRUE(est.monotone);
}

TEST(Monotonicity, RejectsUnsortedAndTooFewTrials) {
  MixtureSpec spec;
  Rng rng(8);
  const std::vector<double> bad = {2, 1};
  EXPECT_THROW(verify_fps_separation_monotonicity(spec, bad, 4, 4, 100, rng), ContractError);
  const std::vector<double> ok = {1, 2};
  EXPECT_THROW(verify_fps_separation_monotonicity(spec, ok, 4, 4, 99, rng), ContractError);
}

TEST(Monotonicity, ReproduciblePerSeedAndCsv) {
  MixtureSpec spec{4, 1.0, 1.0, 10, 2};
  const std::vector<double> lambdas = {1, 2};
  Rng r1(9), r2(9);
  const auto a = verify_fps_separation_monotonicity(spec, lambdas, 4, 4, 100, r1);
  const auto b = verify_fps_separation_monotonicity(spec, lambdas, 4, 4, 100, r2);
  EXPECT_EQ(a.successes, b.successes);
  std::ostringstream os;
  write_coverage_csv(os, a);
  EXPECT_EQ(os.str().substr(0, 29), "lambda,trials,successes,p_hat");
}

TEST(Slack, HoeffdingValue) {
  EXPECT_NEAR(hoeffding_slack(2000, 0.05), 2.0 * std::sqrt(std::log(40.0) / 4000.0), 1e-15);
}

std::vector<Graph> tiny_graphs() {
  SbmSpec spec;
  spec.num_domains = 2;
  spec.nodes_per_class = 3;
  spec.feature_dim = 3;
  Rng rng(10);
  return gen_sbm(spec, rng);
}

TEST(PrototypeSetTest, AllNodesWhenKIsTotal) {
  const auto graphs = tiny_graphs();
  Rng rng(11);
  const EncoderParams p = init_encoder(3, 4, 4, rng);
  const auto set = build_prototype_set(p, graphs, 24, rng);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& s : set.sources) seen.insert({s.graph, s.node});
  EXPECT_EQ(seen.size(), 24u);
  EXPECT_THROW(build_prototype_set(p, graphs, 25, rng), ContractError);
}

TEST(PrototypeSetTest, ProvenanceResolvesToEgoEmbedding) {
  const auto graphs = tiny_graphs();
  Rng rng(12);
  const EncoderParams p = init_encoder(3, 4, 4, rng);
  const auto set = build_prototype_set(p, graphs, 6, rng);
  for (std::size_t j = 0; j < set.size(); ++j) {
    const auto& s = set.sources[j];
    EXPECT_EQ(set.embedding(j), ego_embedding(p, graphs[s.graph], s.node, EgoConfig{}));
  }
}

TEST(PrototypeSetTest, TextRoundTrip) {
  const auto graphs = tiny_graphs();
  Rng rng(13);
  const EncoderParams p = init_encoder(3, 4, 4, rng);
  const auto set = build_prototype_set(p, graphs, 5, rng);
  std::stringstream ss;
  write_prototypes(ss, set);
  EXPECT_EQ(read_prototypes(ss, "mem"), set);
  std::stringstream bad("# seed_index=0\ngraph,node,e0\n0,1\n");
  EXPECT_THROW(read_prototypes(bad, "mem"), FormatError);
}

TEST(PrototypeSetTest, DefaultCount) {
  EXPECT_EQ(default_prototype_count(100), 8u);
  EXPECT_EQ(default_prototype_count(1000), 20u);
  EXPECT_EQ(default_prototype_count(5), 5u);
}

}  // namespace
}  // namespace gfmlab
