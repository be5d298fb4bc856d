#include "gfmlab/encoder/gcn.hpp"

#include <algorithm>
#include <cmath>

#include "gfmlab/errors.hpp"

namespace gfmlab {

ad::ParamSet EncoderParams::to_param_set() const {
  ad::ParamSet p;
  p.add("W1", w1);
  p.add("W2", w2);
  return p;
}

EncoderParams EncoderParams::from_param_set(const ad::ParamSet& p) {
  if (p.entries().size() != 2 || !p.contains("W1") || !p.contains("W2")) {
    throw ContractError("encoder checkpoint must hold exactly W1 and W2");
  }
  EncoderParams e{p.get("W1"), p.get("W2")};
  validate(e);
  return e;
}

std::vector<double> EncoderParams::flatten() const { return to_param_set().flatten(); }

EncoderParams EncoderParams::unflatten(std::span<const double> flat) const {
  return from_param_set(to_param_set().unflatten(flat));
}

void validate(const EncoderParams& p) {
  if (p.w1.empty() || p.w2.empty()) throw ContractError("encoder weights must be non-empty");
  if (p.w1.cols() != p.w2.rows()) {
    throw ContractError("encoder W1 " + p.w1.shape_str() + " does not chain into W2 " +
                        p.w2.shape_str());
  }
  if (!p.w1.all_finite() || !p.w2.all_finite()) throw NumericError("encoder weights not finite");
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w(fan_in, fan_out);
  for (double& v : w.values()) v = rng.uniform(-a, a);
  return w;
}

EncoderParams init_encoder(std::size_t in_dim, std::size_t h1, std::size_t h2, Rng& rng) {
  if (in_dim == 0 || h1 == 0 || h2 == 0) throw ContractError("encoder sizes must be positive");
  EncoderParams p;
  p.w1 = xavier_uniform(in_dim, h1, rng);
  p.w2 = xavier_uniform(h1, h2, rng);
  return p;
}

GraphView make_view(const Graph& g) { return GraphView{sym_normalize(g.a), g.x}; }

EncoderVars bind_encoder(ad::Tape& tape, const EncoderParams& p, bool trainable) {
  return {tape.leaf(p.w1, trainable), tape.leaf(p.w2, trainable)};
}

namespace {

void check_input(const EncoderVars& enc, const Tensor& a_hat, ad::Var x) {
  const std::size_t n = x.rows();
  if (a_hat.rows() != n || a_hat.cols() != n) {
    throw ContractError("gcn_forward: adjacency " + a_hat.shape_str() + " does not match " +
                        std::to_string(n) + " nodes");
  }
  if (x.cols() != enc.w1.rows()) {
    throw ContractError("gcn_forward: feature dim " + std::to_string(x.cols()) +
                        " but encoder expects " + std::to_string(enc.w1.rows()));
  }
}

ad::Var hidden(const EncoderVars& enc, ad::Var a, ad::Var x) {
  return ad::relu(ad::matmul(a, ad::matmul(x, enc.w1)));
}

}  // namespace

ad::Var gcn_forward(const EncoderVars& enc, const Tensor& a_hat, ad::Var x) {
  check_input(enc, a_hat, x);
  ad::Var a = x.tape()->constant(a_hat);
  return ad::matmul(ad::matmul(a, hidden(enc, a, x)), enc.w2);
}

ad::Var node_embedding(const EncoderVars& enc, const Tensor& a_hat, ad::Var x, std::size_t v) {
  check_input(enc, a_hat, x);
  if (v >= x.rows()) throw ContractError("node_embedding: node " + std::to_string(v) + " out of range");
  ad::Tape& t = *x.tape();
  ad::Var a = t.constant(a_hat);
  ad::Var a_row = t.constant(Tensor::row(a_hat.row_span(v)));
  return ad::matmul(ad::matmul(a_row, hidden(enc, a, x)), enc.w2);
}

ad::Var graph_embedding(const EncoderVars& enc, const Tensor& a_hat, ad::Var x) {
  return ad::mean_rows(gcn_forward(enc, a_hat, x));
}

Tensor gcn_forward(const EncoderParams& p, const Graph& g) {
  ad::Tape t;
  return gcn_forward(bind_encoder(t, p, false), sym_normalize(g.a), t.constant(g.x)).value();
}

Tensor node_embedding(const EncoderParams& p, const Graph& g, std::size_t v) {
  ad::Tape t;
  return node_embedding(bind_encoder(t, p, false), sym_normalize(g.a), t.constant(g.x), v).value();
}

Tensor graph_embedding(const EncoderParams& p, const Graph& g) {
  ad::Tape t;
  return graph_embedding(bind_encoder(t, p, false), sym_normalize(g.a), t.constant(g.x)).value();
}

EgoSubgraph ego_of(const Graph& g, std::size_t v, const EgoConfig& ego) {
  const std::size_t n = g.num_nodes();
  return ego_subgraph(g, v, std::min(ego.min_size, n), std::min(ego.max_size, n));
}

Tensor ego_embedding(const EncoderParams& p, const Graph& g, std::size_t v, const EgoConfig& ego) {
  const EgoSubgraph sub = ego_of(g, v, ego);
  return node_embedding(p, sub.graph, sub.target);
}

Tensor ego_embeddings(const EncoderParams& p, const Graph& g, const EgoConfig& ego) {
  Tensor out(g.num_nodes(), p.out_dim());
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const Tensor e = ego_embedding(p, g, v, ego);
    for (std::size_t k = 0; k < e.cols(); ++k) out(v, k) = e(0, k);
  }
  return out;
}

}  // namespace gfmlab
