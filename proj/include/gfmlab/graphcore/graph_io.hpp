#pragma once

#include <filesystem>

#include "gfmlab/graphcore/graph.hpp"

namespace gfmlab {

// Graph directory layout:
//   meta       `key = value` lines: name, num_nodes, feature_dim, num_classes, domain
//   nodes.csv  header node_id,label,f0,...,f{d-1}; label -1 means unlabelled
//   edges.csv  header src,dst[,weight]; each undirected edge listed once,
//              weight defaults to 1.0
// Errors carry file and line.
void save_graph(const Graph& g, const std::filesystem::path& dir);
Graph load_graph(const std::filesystem::path& dir);

}  // namespace gfmlab
