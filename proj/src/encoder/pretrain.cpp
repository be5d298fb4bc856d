#include "gfmlab/encoder/pretrain.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "gfmlab/errors.hpp"

namespace gfmlab {

void validate(const PretrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("pretrain lr must be > 0");
  if (cfg.max_epochs < 0) throw ConfigError("pretrain max_epochs must be >= 0");
  if (cfg.patience < 1) throw ConfigError("pretrain patience must be >= 1");
  if (!(cfg.temperature > 0.0)) throw ConfigError("pretrain temperature must be > 0");
  for (double p : {cfg.edge_drop_p, cfg.feature_mask_p}) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("augmentation probabilities must be in [0, 1)");
  }
  if (cfg.batch < 2) throw ConfigError("pretrain batch needs at least 2 subgraphs");
  if (cfg.subgraphs_per_epoch < cfg.batch) {
    throw ConfigError("pretrain subgraphs_per_epoch must be >= batch");
  }
  if (cfg.ego.min_size < 1 || cfg.ego.min_size > cfg.ego.max_size) {
    throw ConfigError("ego sizes must satisfy 1 <= min <= max");
  }
}

GraphView augment(const Graph& g, double edge_drop_p, double feature_mask_p, Rng& rng) {
  const std::size_t n = g.num_nodes(), d = g.feature_dim();
  Tensor a = g.a;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (a(i, j) != 0.0 && rng.bernoulli(edge_drop_p)) a(i, j) = a(j, i) = 0.0;
  Tensor x = g.x;
  for (std::size_t k = 0; k < d; ++k) {
    if (!rng.bernoulli(feature_mask_p)) continue;
    for (std::size_t i = 0; i < n; ++i) x(i, k) = 0.0;
  }
  return GraphView{sym_normalize(a), std::move(x)};
}

ViewPair make_view_pair(const Graph& g, const PretrainConfig& cfg, Rng& rng) {
  ViewPair p;
  p.first = augment(g, cfg.edge_drop_p, cfg.feature_mask_p, rng);
  p.second = augment(g, cfg.edge_drop_p, cfg.feature_mask_p, rng);
  return p;
}

ad::Var nt_xent(ad::Var first, ad::Var second, double temperature) {
  if (first.rows() != second.rows() || first.cols() != second.cols()) {
    throw ContractError("nt_xent: view blocks must have equal shapes");
  }
  const std::size_t b = first.rows();
  if (b < 2) throw ContractError("nt_xent: needs at least 2 pairs");
  ad::Tape& t = *first.tape();
  const ad::Var parts[] = {first, second};
  ad::Var z = ad::concat_rows(parts);
  const std::size_t n = 2 * b;
  Tensor self_mask(n, n), positives(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    self_mask(i, i) = -1e30;
    positives(i, (i + b) % n) = 1.0;
  }
  ad::Var logits = ad::add(ad::scale(ad::pairwise_cosine(z, z), 1.0 / temperature),
                           t.constant(std::move(self_mask)));
  ad::Var log_p = ad::row_log_softmax(logits);
  return ad::scale(ad::sum(ad::mul(log_p, t.constant(std::move(positives)))),
                   -1.0 / static_cast<double>(n));
}

ad::Var contrastive_loss(const EncoderVars& enc, std::span<const ViewPair> pairs,
                         double temperature) {
  ad::Tape& t = *enc.w1.tape();
  std::vector<ad::Var> a, b;
  for (const ViewPair& p : pairs) {
    a.push_back(graph_embedding(enc, p.first.a_hat, t.constant(p.first.x)));
    b.push_back(graph_embedding(enc, p.second.a_hat, t.constant(p.second.x)));
  }
  return nt_xent(ad::concat_rows(a), ad::concat_rows(b), temperature);
}

namespace {

struct NodeRef {
  std::size_t graph, node;
};

}  // namespace

PretrainResult pretrain_contrastive(std::span<const Graph> graphs, const EncoderParams& init,
                                    const PretrainConfig& cfg, Rng& rng) {
  validate(cfg);
  validate(init);
  std::vector<NodeRef> nodes;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    if (graphs[gi].feature_dim() != init.in_dim()) {
      throw ContractError("pretrain: graph '" + graphs[gi].name + "' has feature dim " +
                          std::to_string(graphs[gi].feature_dim()) + ", encoder expects " +
                          std::to_string(init.in_dim()));
    }
    for (std::size_t v = 0; v < graphs[gi].num_nodes(); ++v) nodes.push_back({gi, v});
  }
  if (nodes.size() < 2) throw ContractError("pretrain: needs at least 2 nodes");

  PretrainResult result{init, {}};
  double best = 0.0;
  int since_best = 0;
  const auto per_epoch = static_cast<std::size_t>(cfg.subgraphs_per_epoch);
  const auto batch = static_cast<std::size_t>(cfg.batch);
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng erng = rng.derive("pretrain-epoch", static_cast<std::uint64_t>(epoch));
    std::vector<NodeRef> picks(per_epoch);
    for (auto& p : picks) p = nodes[erng.index(nodes.size())];

    double total = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0, stop = 0; start < per_epoch; start = stop) {
      stop = std::min(per_epoch, start + batch);
      if (per_epoch - stop == 1) stop = per_epoch;  // no single-subgraph batch
      std::vector<ViewPair> pairs;
      for (std::size_t k = start; k < stop; ++k) {
        const auto ego = ego_of(graphs[picks[k].graph], picks[k].node, cfg.ego);
        pairs.push_back(make_view_pair(ego.graph, cfg, erng));
      }
      ad::Tape tape;
      const EncoderVars enc = bind_encoder(tape, result.params, true);
      ad::Var loss;
      try {
        loss = contrastive_loss(enc, pairs, cfg.temperature);
      } catch (const NumericError& e) {
        throw NumericError("pretrain epoch " + std::to_string(epoch) + " step " +
                           std::to_string(steps) + ": " + e.what());
      }
      tape.backward(loss);
      result.params.w1 = result.params.w1 - cfg.lr * tape.grad(enc.w1);
      result.params.w2 = result.params.w2 - cfg.lr * tape.grad(enc.w2);
      if (!result.params.w1.all_finite() || !result.params.w2.all_finite()) {
        throw NumericError("pretrain epoch " + std::to_string(epoch) + ": parameters diverged");
      }
      total += loss.value().item();
      ++steps;
    }
    const double epoch_loss = total / static_cast<double>(steps);
    result.loss_trace.push_back(epoch_loss);
    if (epoch == 0 || epoch_loss < best) {
      best = epoch_loss;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

void write_loss_trace(const std::filesystem::path& path, std::span<const double> trace) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < trace.size(); ++e) out << e << ',' << ad::format_double(trace[e]) << '\n';
}

}  // namespace gfmlab
