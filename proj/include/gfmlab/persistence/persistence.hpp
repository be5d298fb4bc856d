#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gfmlab/encoder/pretrain.hpp"

namespace gfmlab {

struct PerturbationConfig {
  double s = 0.2;        // fraction of parameters treated as sensitive
  double sigma = 0.1;    // std of the multiplicative noise
  int m_perturb = 5;     // perturbed encoder copies
  double lambda_mix = 0.5;
  double hvp_eps = 1e-4;
  std::size_t mix_limit = 64;      // ordered pairs kept in the mixed set
  std::size_t mix_subgraphs = 16;  // ego subgraphs the pairs are drawn from
};

void validate(const PerturbationConfig& cfg);

// A_hat (A_hat X), parameter free.
Tensor propagate2(const Graph& g);

// Row-wise softmax of the cosine similarities between rows of r_i and r_j.
Tensor align_matrix(const Tensor& r_i, const Tensor& r_j);

// n_i-node graph with X = l X_i + (1 - l) M X_j and
// A = l A_i + (1 - l) M A_j M^T, M = align_matrix(propagate2(g_i), propagate2(g_j)).
// The mixed adjacency is symmetrised and its diagonal cleared; no labels.
Graph mixup(const Graph& g_i, const Graph& g_j, double lambda);

// All ordered pairs (i, j), i != j, when there are at most `limit`, else a
// seeded uniform sample of `limit` pairs in lexicographic order.
std::vector<std::pair<std::size_t, std::size_t>> mix_pairs(std::size_t n, std::size_t limit,
                                                           Rng& rng);
std::vector<Graph> mixed_set(std::span<const Graph> graphs, double lambda, std::size_t limit,
                             Rng& rng);

// Ego subgraphs of `count` uniformly drawn pre-training nodes, then mixed.
std::vector<Graph> mixed_set_from_egos(std::span<const Graph> graphs, const EgoConfig& ego,
                                       const PerturbationConfig& cfg, Rng& rng);

using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

// (grad(theta + eps v) - grad(theta - eps v)) / (2 eps).
std::vector<double> finite_difference_hvp(const GradientFn& grad, std::span<const double> theta,
                                          std::span<const double> v, double eps);

struct SensitivityReport {
  std::vector<std::string> names;  // one per flat index
  std::vector<double> theta;
  std::vector<double> g;
  std::vector<double> hvp_theta;  // (H Theta)_k
  std::vector<double> score;      // (g_k theta_k - theta_k (H Theta)_k / 2)^2
  std::vector<std::size_t> selected;  // ascending flat indices
  bool is_selected(std::size_t k) const;
};

// Scores every coordinate and keeps the top ceil(s |theta|) (lower index on
// ties). `names` may be empty.
SensitivityReport sensitivity_scores(std::span<const double> theta, const GradientFn& grad,
                                     double s, double hvp_eps,
                                     std::vector<std::string> names = {});

// Pre-training loss on the mixed set: contrastive loss over one fixed pair of
// augmented views per mixed graph, so it is a deterministic function of Theta.
GradientFn pretrain_gradient(const EncoderParams& layout, std::span<const Graph> mixed,
                             const PretrainConfig& pretrain, Rng& rng);

SensitivityReport encoder_sensitivity(const EncoderParams& params, std::span<const Graph> mixed,
                                      const PerturbationConfig& cfg,
                                      const PretrainConfig& pretrain, Rng& rng);

// CSV `param_index,name,theta,g,hvp_theta,score,selected`.
void write_sensitivity_csv(std::ostream& out, const SensitivityReport& r);
SensitivityReport read_sensitivity_csv(std::istream& in, const std::string& source);

// m copies; each selected theta_k becomes theta_k + e |theta_k|, e ~ N(0, sigma^2).
std::vector<EncoderParams> perturbed_param_sets(const EncoderParams& params,
                                                const SensitivityReport& report,
                                                const PerturbationConfig& cfg, Rng& rng);

// Population variance plus mean of the per-copy effectiveness losses.
ad::Var loss_per(std::span<const ad::Var> eff_losses);

// Maps Theta to the sensitivity vector dZ/d theta_k (all outputs of Z).
using SensitivityMap = std::function<std::vector<double>(std::span<const double>)>;

// dZ/d theta_k for a GCN of `layout`'s shape on g, one backward per output.
SensitivityMap gcn_sensitivity_map(const EncoderParams& layout, const Graph& g, std::size_t k);

struct InsensitivityConfig {
  double t0 = 1e-3;
  double jacobian_eps = 1e-5;
  double min_exponent = 1.8;
  double tiny = 1e-10;
};

struct InsensitivityResult {
  bool has_null_direction = false;
  std::vector<double> d_null;      // D(t0), D(t0/2), D(t0/4)
  std::vector<double> exp_null;    // log2 ratios between successive D
  std::vector<double> d_control;
  std::vector<double> exp_control;
  bool verdict = false;
  std::string note;
};

// log2(D(t) / D(t/2)) for t in {t0, t0/2}, with D(t) = |S(theta + t dir) - S(theta)|.
std::vector<double> curvature_exponents(const SensitivityMap& map, std::span<const double> theta,
                                        std::span<const double> dir, double t0,
                                        std::vector<double>* distances = nullptr);

// Builds the Jacobian of `map` by central differences, projects a random
// direction off its row space (modified Gram-Schmidt) and checks that the
// sensitivity changes at second order along it. A unit Jacobian row serves as
// the first-order control.
InsensitivityResult check_first_order_insensitivity(const SensitivityMap& map,
                                                    std::span<const double> theta, Rng& rng,
                                                    const InsensitivityConfig& cfg = {});

}  // namespace gfmlab
