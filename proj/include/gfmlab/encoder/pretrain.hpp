#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "gfmlab/encoder/gcn.hpp"

namespace gfmlab {

struct PretrainConfig {
  double lr = 1e-4;
  int max_epochs = 10000;
  int patience = 20;
  double temperature = 0.5;
  double edge_drop_p = 0.2;
  double feature_mask_p = 0.2;
  int batch = 16;                // subgraphs per step
  int subgraphs_per_epoch = 64;  // ego subgraphs sampled per epoch
  EgoConfig ego;
};

void validate(const PretrainConfig& cfg);

// Two augmented views of one graph.
struct ViewPair {
  GraphView first;
  GraphView second;
};

// Drops each undirected edge with probability edge_drop_p and zeroes each
// feature column with probability feature_mask_p.
GraphView augment(const Graph& g, double edge_drop_p, double feature_mask_p, Rng& rng);
ViewPair make_view_pair(const Graph& g, const PretrainConfig& cfg, Rng& rng);

// NT-Xent over rows: row i of `first` and row i of `second` are positives,
// every other row of either block is a negative. Mean over the 2B anchors.
ad::Var nt_xent(ad::Var first, ad::Var second, double temperature);

// Mean-pooled view embeddings fed to nt_xent.
ad::Var contrastive_loss(const EncoderVars& enc, std::span<const ViewPair> pairs,
                         double temperature);

struct PretrainResult {
  EncoderParams params;
  std::vector<double> loss_trace;  // one entry per completed epoch
};

// Plain gradient descent on NT-Xent over sampled ego subgraphs of `graphs`.
// Stops after max_epochs, or once the best epoch loss has not improved for
// `patience` epochs.
PretrainResult pretrain_contrastive(std::span<const Graph> graphs, const EncoderParams& init,
                                    const PretrainConfig& cfg, Rng& rng);

void write_loss_trace(const std::filesystem::path& path, std::span<const double> trace);

}  // namespace gfmlab
