#pragma once

#include <span>
#include <vector>

#include "gfmlab/encoder/gcn.hpp"

namespace gfmlab {

// Downstream linear classifier on node embeddings: logits = e W + b.
struct LinearHead {
  Tensor w;  // h2 x C
  Tensor b;  // 1 x C

  std::size_t num_classes() const { return w.cols(); }
  ad::ParamSet to_param_set() const;
  static LinearHead from_param_set(const ad::ParamSet& p);
  bool operator==(const LinearHead&) const = default;
};

struct HeadConfig {
  // Step size in units of the inverse curvature bound of the loss, so the
  // same value works for any embedding scale.
  double lr = 1.0;
  int epochs = 500;
};

// Full-batch gradient descent on multinomial cross-entropy from a zero head.
LinearHead fit_head(const Tensor& embeddings, std::span<const int> labels, int num_classes,
                    const HeadConfig& cfg = {});

struct HeadFit {
  LinearHead head;
  std::vector<std::size_t> chosen;  // rows of `embeddings` used for training, class-major
};

// Samples `shots` labelled rows per class, then fits. kUnlabeled rows are
// never chosen.
HeadFit train_head(const Tensor& embeddings, std::span<const int> labels, int num_classes,
                   int shots, Rng& rng, const HeadConfig& cfg = {});

Tensor head_logits(const LinearHead& head, const Tensor& embedding);
// Argmax of the logits; ties go to the lowest class id.
int predict(const LinearHead& head, const Tensor& embedding);
int argmax_row(std::span<const double> logits);

// A labelled node inside its prepared ego subgraph.
struct NodeSample {
  GraphView view;
  std::size_t target = 0;
  int label = kUnlabeled;
};

NodeSample make_sample(const Graph& g, std::size_t v, const EgoConfig& ego);
std::vector<NodeSample> make_samples(const Graph& g, std::span<const std::size_t> nodes,
                                     const EgoConfig& ego);
Tensor sample_embedding(const EncoderParams& p, const NodeSample& s);

struct FinetuneConfig {
  double lr = 0.001;
  int epochs = 500;
};

struct FinetuneResult {
  EncoderParams params;
  LinearHead head;
  std::vector<double> loss_trace;  // cross-entropy before each step
};

// Joint full-batch gradient descent on encoder and head. Inputs are copied.
FinetuneResult finetune(const EncoderParams& params, std::span<const NodeSample> samples,
                        const LinearHead& head, const FinetuneConfig& cfg);

}  // namespace gfmlab
