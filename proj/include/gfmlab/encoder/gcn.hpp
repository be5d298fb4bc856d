#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gfmlab/autodiff/params.hpp"
#include "gfmlab/autodiff/tape.hpp"
#include "gfmlab/graphcore/graph.hpp"
#include "gfmlab/graphcore/rng.hpp"

namespace gfmlab {

// Two-layer GCN weights. Flattened order is W1 then W2, row-major.
struct EncoderParams {
  Tensor w1;  // d x h1
  Tensor w2;  // h1 x h2

  std::size_t in_dim() const { return w1.rows(); }
  std::size_t hidden_dim() const { return w1.cols(); }
  std::size_t out_dim() const { return w2.cols(); }

  ad::ParamSet to_param_set() const;
  static EncoderParams from_param_set(const ad::ParamSet& p);
  std::vector<double> flatten() const;
  EncoderParams unflatten(std::span<const double> flat) const;

  bool operator==(const EncoderParams&) const = default;
};

void validate(const EncoderParams& p);

// Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
EncoderParams init_encoder(std::size_t in_dim, std::size_t h1, std::size_t h2, Rng& rng);

// Input prepared for propagation: normalized adjacency and features.
struct GraphView {
  Tensor a_hat;
  Tensor x;
  std::size_t num_nodes() const { return x.rows(); }
};
GraphView make_view(const Graph& g);

// Encoder weights placed on a tape, either trainable leaves or constants.
struct EncoderVars {
  ad::Var w1, w2;
};
EncoderVars bind_encoder(ad::Tape& tape, const EncoderParams& p, bool trainable);

// Z = A_hat relu(A_hat X W1) W2.
ad::Var gcn_forward(const EncoderVars& enc, const Tensor& a_hat, ad::Var x);
// Row v of Z as a 1 x h2 row, without forming the other output rows.
ad::Var node_embedding(const EncoderVars& enc, const Tensor& a_hat, ad::Var x, std::size_t v);
// Column mean of Z.
ad::Var graph_embedding(const EncoderVars& enc, const Tensor& a_hat, ad::Var x);

// Value-only forms.
Tensor gcn_forward(const EncoderParams& p, const Graph& g);
Tensor node_embedding(const EncoderParams& p, const Graph& g, std::size_t v);
Tensor graph_embedding(const EncoderParams& p, const Graph& g);

struct EgoConfig {
  std::size_t min_size = 15;
  std::size_t max_size = 30;
};

// ego_subgraph with both size bounds capped at the node count of g.
EgoSubgraph ego_of(const Graph& g, std::size_t v, const EgoConfig& ego);

// Embedding of node v computed inside its own ego subgraph.
Tensor ego_embedding(const EncoderParams& p, const Graph& g, std::size_t v, const EgoConfig& ego);
// One row per node of g.
Tensor ego_embeddings(const EncoderParams& p, const Graph& g, const EgoConfig& ego);

}  // namespace gfmlab
