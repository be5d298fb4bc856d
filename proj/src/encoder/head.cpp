#include "gfmlab/encoder/head.hpp"

#include <string>

#include "gfmlab/errors.hpp"

namespace gfmlab {

ad::ParamSet LinearHead::to_param_set() const {
  ad::ParamSet p;
  p.add("head.W", w);
  p.add("head.b", b);
  return p;
}

LinearHead LinearHead::from_param_set(const ad::ParamSet& p) {
  if (!p.contains("head.W") || !p.contains("head.b")) {
    throw ContractError("head checkpoint must hold head.W and head.b");
  }
  LinearHead h{p.get("head.W"), p.get("head.b")};
  if (h.b.rows() != 1 || h.b.cols() != h.w.cols()) throw ContractError("head bias shape mismatch");
  return h;
}

namespace {

Tensor one_hot(std::span<const int> labels, int num_classes) {
  Tensor y(labels.size(), static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ContractError("label " + std::to_string(labels[i]) + " out of range");
    }
    y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

ad::Var cross_entropy(ad::Var logits, const Tensor& targets) {
  ad::Tape& t = *logits.tape();
  ad::Var lp = ad::row_log_softmax(logits);
  return ad::scale(ad::sum(ad::mul(lp, t.constant(targets))),
                   -1.0 / static_cast<double>(targets.rows()));
}

}  // namespace

LinearHead fit_head(const Tensor& embeddings, std::span<const int> labels, int num_classes,
                    const HeadConfig& cfg) {
  if (embeddings.rows() == 0 || embeddings.rows() != labels.size()) {
    throw ContractError("fit_head: need one label per embedding row");
  }
  if (num_classes < 1) throw ContractError("fit_head: num_classes must be >= 1");
  const Tensor targets = one_hot(labels, num_classes);
  const auto c = static_cast<std::size_t>(num_classes);
  // Softmax cross-entropy has curvature at most 1/2 per unit squared input norm.
  double sq = 0.0;
  for (double v : embeddings.values()) sq += v * v;
  const double curvature =
      0.5 * (sq / static_cast<double>(embeddings.rows()) + 1.0);
  const double step = cfg.lr / curvature;

  LinearHead head{Tensor(embeddings.cols(), c), Tensor(1, c)};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape t;
    ad::Var w = t.leaf(head.w), b = t.leaf(head.b);
    ad::Var loss = cross_entropy(ad::add_bias(ad::matmul(t.constant(embeddings), w), b), targets);
    t.backward(loss);
    head.w = head.w - step * t.grad(w);
    head.b = head.b - step * t.grad(b);
  }
  return head;
}

HeadFit train_head(const Tensor& embeddings, std::span<const int> labels, int num_classes,
                   int shots, Rng& rng, const HeadConfig& cfg) {
  if (shots < 1) throw ContractError("train_head: shots must be >= 1");
  if (labels.size() != embeddings.rows()) throw ContractError("train_head: label count mismatch");
  HeadFit fit;
  std::vector<int> chosen_labels;
  for (int cls = 0; cls < num_classes; ++cls) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) pool.push_back(i);
    if (pool.size() < static_cast<std::size_t>(shots)) {
      throw ContractError("train_head: class " + std::to_string(cls) + " has " +
                          std::to_string(pool.size()) + " labelled nodes, fewer than " +
                          std::to_string(shots) + " shots");
    }
    rng.shuffle(pool);
    for (int s = 0; s < shots; ++s) {
      fit.chosen.push_back(pool[static_cast<std::size_t>(s)]);
      chosen_labels.push_back(cls);
    }
  }
  Tensor x(fit.chosen.size(), embeddings.cols());
  for (std::size_t r = 0; r < fit.chosen.size(); ++r)
    for (std::size_t k = 0; k < x.cols(); ++k) x(r, k) = embeddings(fit.chosen[r], k);
  fit.head = fit_head(x, chosen_labels, num_classes, cfg);
  return fit;
}

Tensor head_logits(const LinearHead& head, const Tensor& embedding) {
  if (embedding.cols() != head.w.rows()) {
    throw ContractError("head expects embeddings of width " + std::to_string(head.w.rows()) +
                        ", got " + std::to_string(embedding.cols()));
  }
  Tensor z = ad::matmul(embedding, head.w);
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += head.b(0, c);
  return z;
}

int argmax_row(std::span<const double> logits) {
  if (logits.empty()) throw ContractError("argmax of empty logits");
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[best]) best = c;
  return static_cast<int>(best);
}

int predict(const LinearHead& head, const Tensor& embedding) {
  if (embedding.rows() != 1) throw ContractError("predict expects a single embedding row");
  return argmax_row(head_logits(head, embedding).values());
}

NodeSample make_sample(const Graph& g, std::size_t v, const EgoConfig& ego) {
  const EgoSubgraph sub = ego_of(g, v, ego);
  return NodeSample{make_view(sub.graph), sub.target, g.has_labels() ? g.labels[v] : kUnlabeled};
}

std::vector<NodeSample> make_samples(const Graph& g, std::span<const std::size_t> nodes,
                                     const EgoConfig& ego) {
  std::vector<NodeSample> out;
  out.reserve(nodes.size());
  for (std::size_t v : nodes) out.push_back(make_sample(g, v, ego));
  return out;
}

Tensor sample_embedding(const EncoderParams& p, const NodeSample& s) {
  ad::Tape t;
  return node_embedding(bind_encoder(t, p, false), s.view.a_hat, t.constant(s.view.x), s.target)
      .value();
}

FinetuneResult finetune(const EncoderParams& params, std::span<const NodeSample> samples,
                        const LinearHead& head, const FinetuneConfig& cfg) {
  if (samples.empty()) throw ContractError("finetune: no labelled samples");
  if (cfg.lr < 0.0 || cfg.epochs < 0) throw ConfigError("finetune: lr and epochs must be >= 0");
  std::vector<int> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  const Tensor targets = one_hot(labels, static_cast<int>(head.num_classes()));

  FinetuneResult r{params, head, {}};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape t;
    const EncoderVars enc = bind_encoder(t, r.params, true);
    ad::Var w = t.leaf(r.head.w), b = t.leaf(r.head.b);
    std::vector<ad::Var> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) {
      rows.push_back(node_embedding(enc, s.view.a_hat, t.constant(s.view.x), s.target));
    }
    ad::Var loss;
    try {
      loss = cross_entropy(ad::add_bias(ad::matmul(ad::concat_rows(rows), w), b), targets);
    } catch (const NumericError& e) {
      throw NumericError("finetune epoch " + std::to_string(epoch) + ": " + e.what());
    }
    t.backward(loss);
    r.loss_trace.push_back(loss.value().item());
    r.params.w1 = r.params.w1 - cfg.lr * t.grad(enc.w1);
    r.params.w2 = r.params.w2 - cfg.lr * t.grad(enc.w2);
    r.head.w = r.head.w - cfg.lr * t.grad(w);
    r.head.b = r.head.b - cfg.lr * t.grad(b);
  }
  return r;
}

}  // namespace gfmlab
