#include "gfmlab/trigger/trigger.hpp"

#include <cmath>
#include <fstream>

#include "gfmlab/errors.hpp"

namespace gfmlab {

ad::ParamSet TriggerGenerator::to_param_set() const {
  ad::ParamSet p;
  if (is_static) {
    p.add("trigger.static", fixed);
  } else {
    p.add("Wa", wa);
    p.add("ba", ba);
    p.add("Wb", wb);
    p.add("bb", bb);
  }
  return p;
}

TriggerGenerator TriggerGenerator::from_param_set(const ad::ParamSet& p) {
  TriggerGenerator g;
  if (p.contains("trigger.static")) {
    g.is_static = true;
    g.fixed = p.get("trigger.static");
    if (g.fixed.rows() != 1) throw ContractError("static trigger must be a single row");
    return g;
  }
  for (const char* name : {"Wa", "ba", "Wb", "bb"}) {
    if (!p.contains(name)) throw ContractError(std::string("generator checkpoint lacks ") + name);
  }
  g.wa = p.get("Wa");
  g.ba = p.get("ba");
  g.wb = p.get("Wb");
  g.bb = p.get("bb");
  if (g.ba.rows() != 1 || g.ba.cols() != g.wa.cols() || g.wb.rows() != g.wa.cols() ||
      g.bb.rows() != 1 || g.bb.cols() != g.wb.cols()) {
    throw ContractError("generator checkpoint has inconsistent shapes");
  }
  return g;
}

TriggerGenerator init_generator(std::size_t feature_dim, std::size_t embed_dim, Rng& rng,
                                std::size_t hidden) {
  if (feature_dim == 0 || embed_dim == 0 || hidden == 0) {
    throw ContractError("generator sizes must be positive");
  }
  TriggerGenerator g;
  g.wa = xavier_uniform(feature_dim + embed_dim, hidden, rng);
  g.ba = Tensor(1, hidden);
  g.wb = xavier_uniform(hidden, feature_dim, rng);
  g.bb = Tensor(1, feature_dim);
  return g;
}

TriggerGenerator init_static_trigger(std::size_t feature_dim, Rng& rng) {
  TriggerGenerator g;
  g.is_static = true;
  g.fixed = xavier_uniform(1, feature_dim, rng);
  return g;
}

GeneratorVars bind_generator(ad::Tape& tape, const TriggerGenerator& gen, bool trainable) {
  GeneratorVars v;
  v.is_static = gen.is_static;
  if (gen.is_static) {
    v.fixed = tape.leaf(gen.fixed, trainable);
  } else {
    v.wa = tape.leaf(gen.wa, trainable);
    v.ba = tape.leaf(gen.ba, trainable);
    v.wb = tape.leaf(gen.wb, trainable);
    v.bb = tape.leaf(gen.bb, trainable);
  }
  return v;
}

std::vector<ad::Var> generator_leaves(const GeneratorVars& vars) {
  if (vars.is_static) return {vars.fixed};
  return {vars.wa, vars.ba, vars.wb, vars.bb};
}

ad::Var generate_trigger_feature(const GeneratorVars& gen, ad::Var x_i, ad::Var e_j) {
  if (x_i.rows() != 1 || e_j.rows() != 1) throw ContractError("trigger inputs must be single rows");
  if (gen.is_static) {
    if (x_i.cols() != gen.fixed.cols()) throw ContractError("trigger: feature dim mismatch");
    return gen.fixed;
  }
  if (x_i.cols() != gen.wb.cols() || x_i.cols() + e_j.cols() != gen.wa.rows()) {
    throw ContractError("trigger: input widths " + std::to_string(x_i.cols()) + " + " +
                        std::to_string(e_j.cols()) + " do not match generator input " +
                        std::to_string(gen.wa.rows()));
  }
  const ad::Var cols[] = {ad::transpose(x_i), ad::transpose(e_j)};
  ad::Var joined = ad::transpose(ad::concat_rows(cols));
  ad::Var h = ad::relu(ad::add_bias(ad::matmul(joined, gen.wa), gen.ba));
  return ad::add_bias(ad::matmul(h, gen.wb), gen.bb);
}

Tensor generate_trigger_feature(const TriggerGenerator& gen, const Tensor& x_i, const Tensor& e_j) {
  ad::Tape t;
  return generate_trigger_feature(bind_generator(t, gen, false), t.constant(x_i), t.constant(e_j))
      .value();
}

Tensor triggered_adjacency(const Tensor& a, std::size_t target) {
  const std::size_t n = a.rows();
  if (target >= n) throw ContractError("inject_trigger: target " + std::to_string(target) + " out of range");
  Tensor out(n + kTriggerNodes, n + kTriggerNodes);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, j);
  for (std::size_t s = n; s < n + kTriggerNodes; ++s) {
    out(s, target) = out(target, s) = 1.0;
    for (std::size_t r = s + 1; r < n + kTriggerNodes; ++r) out(s, r) = out(r, s) = 1.0;
  }
  return out;
}

TriggeredGraph inject_trigger(const Graph& g, const Tensor& x_tri, std::size_t target,
                              std::size_t prototype) {
  if (x_tri.rows() != 1 || x_tri.cols() != g.feature_dim()) {
    throw ContractError("inject_trigger: trigger feature must be 1 x " + std::to_string(g.feature_dim()));
  }
  TriggeredGraph out;
  out.target = target;
  out.prototype = prototype;
  out.graph.name = g.name;
  out.graph.domain = g.domain;
  out.graph.num_classes = g.num_classes;
  out.graph.a = triggered_adjacency(g.a, target);
  const std::size_t n = g.num_nodes(), d = g.feature_dim();
  out.graph.x = Tensor(n + kTriggerNodes, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) out.graph.x(i, k) = g.x(i, k);
  for (std::size_t s = n; s < n + kTriggerNodes; ++s)
    for (std::size_t k = 0; k < d; ++k) out.graph.x(s, k) = x_tri(0, k);
  if (g.has_labels()) {
    out.graph.labels = g.labels;
    out.graph.labels.resize(n + kTriggerNodes, kUnlabeled);
  }
  return out;
}

ad::Var triggered_features(ad::Var x, ad::Var x_tri) {
  const ad::Var parts[] = {x, x_tri, x_tri, x_tri};
  return ad::concat_rows(parts);
}

ad::Var loss_eff(const EncoderVars& enc, const Tensor& a_hat_triggered, ad::Var x_triggered,
                 std::size_t target, ad::Var e_j, Readout readout) {
  ad::Var emb = readout == Readout::TargetNode
                    ? node_embedding(enc, a_hat_triggered, x_triggered, target)
                    : graph_embedding(enc, a_hat_triggered, x_triggered);
  return ad::neg(ad::row_cosine(emb, e_j));
}

ad::Var loss_ste(ad::Var x_i, ad::Var x_tri) { return ad::neg(ad::row_cosine(x_i, x_tri)); }

void validate(const AttackConfig& cfg) {
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0)) throw ConfigError("attack alpha and beta must be >= 0");
  if (!(cfg.lr > 0.0)) throw ConfigError("attack lr must be > 0");
  if (cfg.epochs < 0) throw ConfigError("attack epochs must be >= 0");
}

Tensor random_targets(std::size_t k, std::size_t embed_dim, Rng& rng) {
  Tensor t(k, embed_dim);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

namespace {

// A pre-training node prepared once: its ego subgraph with the trigger slots
// already wired in.
struct Site {
  std::size_t graph = 0, node = 0;
  Tensor a_hat;  // normalised triggered adjacency
  Tensor x;      // ego features, without trigger rows
  std::size_t target = 0;
};

// One descent step on `gen` for a single site; returns the step's losses.
EpochLosses attack_step(TriggerGenerator& gen, const EncoderParams& encoder,
                        std::span<const EncoderParams> perturbed, const Site& site, const Tensor& target,
                        const AttackConfig& cfg) {
  ad::Tape t;
  const GeneratorVars gv = bind_generator(t, gen, true);
  const EncoderVars enc = bind_encoder(t, encoder, false);
  ad::Var e_j = t.constant(target);
  ad::Var x_i = t.constant(site.x.row_copy(site.target));
  ad::Var x_tri = generate_trigger_feature(gv, x_i, e_j);
  ad::Var xt = triggered_features(t.constant(site.x), x_tri);
  ad::Var eff = loss_eff(enc, site.a_hat, xt, site.target, e_j, cfg.readout);
  ad::Var ste = loss_ste(x_i, x_tri);
  ad::Var total = ad::add(eff, ad::scale(ste, cfg.alpha));
  EpochLosses out;
  out.l_eff = eff.value().item();
  out.l_ste = ste.value().item();
  if (!perturbed.empty()) {
    std::vector<ad::Var> effs;
    for (const EncoderParams& p : perturbed) {
      effs.push_back(loss_eff(bind_encoder(t, p, false), site.a_hat, xt, site.target, e_j, cfg.readout));
    }
    ad::Var per = loss_per(effs);
    out.l_per = per.value().item();
    total = ad::add(total, ad::scale(per, cfg.beta));
  }
  out.total = total.value().item();
  t.backward(total);
  const auto leaves = generator_leaves(gv);
  if (gen.is_static) {
    gen.fixed = gen.fixed - cfg.lr * t.grad(leaves[0]);
  } else {
    gen.wa = gen.wa - cfg.lr * t.grad(leaves[0]);
    gen.ba = gen.ba - cfg.lr * t.grad(leaves[1]);
    gen.wb = gen.wb - cfg.lr * t.grad(leaves[2]);
    gen.bb = gen.bb - cfg.lr * t.grad(leaves[3]);
  }
  return out;
}

}  // namespace

AttackResult train_attack(const TriggerGenerator& init, const EncoderParams& encoder,
                          std::span<const Graph> graphs, const Tensor& targets,
                          const PersistenceContext* persistence, const AttackConfig& cfg, Rng& rng) {
  validate(cfg);
  validate(encoder);
  if (targets.rows() == 0) throw ContractError("train_attack: no target embeddings");
  if (targets.cols() != encoder.out_dim()) throw ContractError("train_attack: target width mismatch");
  if (init.feature_dim() != encoder.in_dim()) throw ContractError("train_attack: generator feature dim mismatch");
  const bool use_per = cfg.beta > 0.0 && !cfg.disable_persistence;
  if (use_per && persistence == nullptr) {
    throw ContractError("train_attack: persistence context required when beta > 0");
  }

  std::vector<Site> sites;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    for (std::size_t v = 0; v < graphs[gi].num_nodes(); ++v) {
      const EgoSubgraph ego = ego_of(graphs[gi], v, cfg.ego);
      sites.push_back({gi, v, sym_normalize(triggered_adjacency(ego.graph.a, ego.target)), ego.graph.x,
                       ego.target});
    }
  }

  AttackResult result{init, targets, {}};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.derive("attack-epoch", static_cast<std::uint64_t>(epoch));
    std::vector<EncoderParams> perturbed;
    if (use_per) perturbed = perturbed_param_sets(encoder, persistence->report, persistence->perturb, erng);

    EpochLosses sum;
    for (const Site& site : sites) {
      const std::size_t j = erng.index(targets.rows());
      try {
        const EpochLosses step = attack_step(result.generator, encoder, perturbed, site, targets.row_copy(j), cfg);
        sum.l_eff += step.l_eff;
        sum.l_ste += step.l_ste;
        sum.l_per += step.l_per;
        sum.total += step.total;
      } catch (const NumericError& e) {
        throw NumericError("attack epoch " + std::to_string(epoch) + ": graph " + std::to_string(site.graph) +
                           ", node " + std::to_string(site.node) + ", prototype " + std::to_string(j) +
                           ": " + e.what());
      }
    }
    const auto n = static_cast<double>(sites.size());
    result.trace.push_back({sum.l_eff / n, sum.l_ste / n, sum.l_per / n, sum.total / n});
  }
  return result;
}

void write_attack_trace(const std::filesystem::path& path, std::span<const EpochLosses> trace) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "epoch,l_eff,l_ste,l_per,total\n";
  for (std::size_t e = 0; e < trace.size(); ++e) {
    out << e << ',' << ad::format_double(trace[e].l_eff) << ',' << ad::format_double(trace[e].l_ste) << ','
        << ad::format_double(trace[e].l_per) << ',' << ad::format_double(trace[e].total) << '\n';
  }
}

}  // namespace gfmlab
