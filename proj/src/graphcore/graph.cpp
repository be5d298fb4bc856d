#include "gfmlab/graphcore/graph.hpp"

#include <algorithm>
#include <cmath>

#include "gfmlab/errors.hpp"

namespace gfmlab {

std::size_t Graph::num_edges() const {
  std::size_t e = 0;
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (a(i, j) != 0.0) ++e;
  return e;
}

void validate(const Graph& g) {
  const std::size_t n = g.x.rows();
  if (g.a.rows() != n || g.a.cols() != n) {
    throw ContractError("graph '" + g.name + "': adjacency " + g.a.shape_str() +
                        " does not match " + std::to_string(n) + " feature rows");
  }
  if (!g.x.all_finite() || !g.a.all_finite()) {
    throw ContractError("graph '" + g.name + "': non-finite features or weights");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (g.a(i, j) < 0.0) throw ContractError("graph '" + g.name + "': negative edge weight");
      if (g.a(i, j) != g.a(j, i)) throw ContractError("graph '" + g.name + "': asymmetric adjacency");
    }
  }
  if (g.has_labels()) {
    if (g.labels.size() != n) throw ContractError("graph '" + g.name + "': label count mismatch");
    for (int y : g.labels) {
      if (y != kUnlabeled && (y < 0 || y >= g.num_classes)) {
        throw ContractError("graph '" + g.name + "': label " + std::to_string(y) +
                            " outside [0, " + std::to_string(g.num_classes) + ")");
      }
    }
  }
}

Tensor sym_normalize(const Tensor& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw ContractError("sym_normalize: adjacency must be square");
  std::vector<double> deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 1.0;  // self loop
    for (std::size_t j = 0; j < n; ++j) {
      const double w = a(i, j);
      if (w < 0.0) throw ContractError("sym_normalize: negative edge weight");
      if (j != i) d += w;
    }
    deg[i] = d;
  }
  Tensor out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = i == j ? 1.0 : a(i, j);
      if (w != 0.0) out(i, j) = w / std::sqrt(deg[i] * deg[j]);
    }
  }
  return out;
}

Graph induced_subgraph(const Graph& g, std::span<const std::size_t> nodes) {
  const std::size_t m = nodes.size();
  Graph sub;
  sub.name = g.name;
  sub.domain = g.domain;
  sub.num_classes = g.num_classes;
  sub.x = Tensor(m, g.feature_dim());
  sub.a = Tensor(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    if (nodes[i] >= g.num_nodes()) throw ContractError("induced_subgraph: node id out of range");
    auto src = g.x.row_span(nodes[i]);
    std::copy(src.begin(), src.end(), sub.x.row_span(i).begin());
    for (std::size_t j = 0; j < m; ++j) sub.a(i, j) = g.a(nodes[i], nodes[j]);
  }
  if (g.has_labels()) {
    sub.labels.reserve(m);
    for (std::size_t v : nodes) sub.labels.push_back(g.labels[v]);
  }
  return sub;
}

EgoSubgraph ego_subgraph(const Graph& g, std::size_t v, std::size_t min_size,
                         std::size_t max_size) {
  const std::size_t n = g.num_nodes();
  if (v >= n) {
    throw ContractError("ego_subgraph: node " + std::to_string(v) + " out of range (n=" +
                        std::to_string(n) + ")");
  }
  if (min_size < 1 || min_size > max_size || max_size > n) {
    throw ContractError("ego_subgraph: need 1 <= min_size <= max_size <= n");
  }
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> order{v};
  seen[v] = 1;
  std::vector<std::size_t> frontier{v};
  while (!frontier.empty() && order.size() < max_size) {
    std::vector<std::size_t> next;
    for (std::size_t u : frontier) {
      for (std::size_t w = 0; w < n; ++w) {
        if (w != u && g.a(u, w) != 0.0 && !seen[w]) {
          seen[w] = 1;
          next.push_back(w);
        }
      }
    }
    std::sort(next.begin(), next.end());
    const std::size_t room = max_size - order.size();
    if (next.size() > room) next.resize(room);
    order.insert(order.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  // Below min_size the loop has already exhausted the component, which is
  // returned as-is.
  EgoSubgraph ego;
  ego.graph = induced_subgraph(g, order);
  ego.target = 0;
  ego.members = std::move(order);
  return ego;
}

}  // namespace gfmlab
