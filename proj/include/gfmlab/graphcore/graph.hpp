#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gfmlab/autodiff/tensor.hpp"

namespace gfmlab {

using ad::Tensor;

inline constexpr int kUnlabeled = -1;

// Undirected weighted graph with dense storage. Graphs here are small (ego
// subgraphs of at most a few dozen nodes, domains of a few hundred).
struct Graph {
  std::string name;
  std::string domain;
  Tensor x;                 // n x d node features
  Tensor a;                 // n x n symmetric, nonnegative, zero diagonal on input
  std::vector<int> labels;  // empty, or length n with kUnlabeled / [0, num_classes)
  int num_classes = 0;

  std::size_t num_nodes() const { return x.rows(); }
  std::size_t feature_dim() const { return x.cols(); }
  bool has_labels() const { return !labels.empty(); }
  std::size_t num_edges() const;  // undirected, nonzero off-diagonal pairs

  bool operator==(const Graph&) const = default;
};

// Throws ContractError naming the first violated invariant.
void validate(const Graph& g);

// D^{-1/2} (A + I) D^{-1/2}. Isolated nodes get self-weight 1.
Tensor sym_normalize(const Tensor& a);

// Induced subgraph on `nodes`, in the given order.
Graph induced_subgraph(const Graph& g, std::span<const std::size_t> nodes);

struct EgoSubgraph {
  Graph graph;
  std::size_t target = 0;            // index of the centre inside `graph`
  std::vector<std::size_t> members;  // original node ids, BFS order
};

// Breadth-first ego network around v capped at max_size nodes. Each frontier
// is taken in ascending node-id order and the overflow of the last frontier is
// dropped by ascending id. A component smaller than min_size is returned whole.
EgoSubgraph ego_subgraph(const Graph& g, std::size_t v, std::size_t min_size,
                         std::size_t max_size);

}  // namespace gfmlab
