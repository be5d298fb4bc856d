#include "gfmlab/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>

#include "gfmlab/cli/manifest.hpp"
#include "gfmlab/errors.hpp"
#include "gfmlab/graphcore/text.hpp"

namespace gfmlab {

namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': cannot parse number '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    return parse_int(v, "config key '" + key + "'");
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 0) throw ConfigError("config key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& tok : split_csv(v)) {
    const std::string t = trim(tok);
    if (!t.empty()) out.push_back(to_double(key, t));
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_shortest(v[i]);
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

struct Entry {
  std::string key;
  std::function<std::string(RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class Acc>
Entry real(std::string key, Acc acc) {
  return {key, [acc](RunConfig& c) { return format_shortest(acc(c)); },
          [acc, key](RunConfig& c, const std::string& v) { acc(c) = to_double(key, v); }};
}

template <class Acc>
Entry integer(std::string key, Acc acc) {
  return {key, [acc](RunConfig& c) { return std::to_string(acc(c)); },
          [acc, key](RunConfig& c, const std::string& v) {
            acc(c) = static_cast<std::remove_reference_t<decltype(acc(c))>>(to_int(key, v));
          }};
}

template <class Acc>
Entry count(std::string key, Acc acc) {
  return {key, [acc](RunConfig& c) { return std::to_string(acc(c)); },
          [acc, key](RunConfig& c, const std::string& v) { acc(c) = to_size(key, v); }};
}

template <class Acc>
Entry flag(std::string key, Acc acc) {
  return {key, [acc](RunConfig& c) { return std::string(acc(c) ? "true" : "false"); },
          [acc, key](RunConfig& c, const std::string& v) { acc(c) = to_bool(key, v); }};
}

template <class Acc>
Entry list(std::string key, Acc acc) {
  return {key, [acc](RunConfig& c) { return join(acc(c)); },
          [acc, key](RunConfig& c, const std::string& v) { acc(c) = to_list(key, v); }};
}

#define GF_ACC(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> e;
    e.push_back({"seed", [](RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) {
                   const long long s = to_int("seed", v);
                   if (s < 0) throw ConfigError("seed must be >= 0");
                   c.seed = static_cast<std::uint64_t>(s);
                 }});
    e.push_back({"data.source",
                 [](RunConfig& c) { return std::string(c.data.source == DataSource::Synthetic ? "synthetic" : "directory"); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "synthetic") c.data.source = DataSource::Synthetic;
                   else if (v == "directory") c.data.source = DataSource::Directory;
                   else throw ConfigError("data.source must be synthetic or directory, got '" + v + "'");
                 }});
    e.push_back(integer("data.domains", GF_ACC(data.sbm.num_domains)));
    e.push_back(integer("data.classes", GF_ACC(data.sbm.classes_per_domain)));
    e.push_back(integer("data.nodes_per_class", GF_ACC(data.sbm.nodes_per_class)));
    e.push_back(real("data.p_in", GF_ACC(data.sbm.p_in)));
    e.push_back(real("data.p_out", GF_ACC(data.sbm.p_out)));
    e.push_back(integer("data.feature_dim", GF_ACC(data.sbm.feature_dim)));
    e.push_back(real("data.centroid_scale", GF_ACC(data.sbm.feature_centroid_scale)));
    e.push_back(real("data.noise", GF_ACC(data.sbm.feature_noise)));
    e.push_back(integer("data.heldout", GF_ACC(data.heldout)));
    e.push_back({"data.pretrain_dirs", [](RunConfig& c) { return join(c.data.pretrain_dirs); },
                 [](RunConfig& c, const std::string& v) {
                   c.data.pretrain_dirs.clear();
                   for (const auto& t : split_csv(v))
                     if (!trim(t).empty()) c.data.pretrain_dirs.push_back(trim(t));
                 }});
    e.push_back({"data.downstream_dir", [](RunConfig& c) { return c.data.downstream_dir; },
                 [](RunConfig& c, const std::string& v) { c.data.downstream_dir = v; }});
    e.push_back(count("encoder.hidden", GF_ACC(hidden_dim)));
    e.push_back(count("encoder.out", GF_ACC(out_dim)));
    e.push_back(real("pretrain.lr", GF_ACC(pretrain.lr)));
    e.push_back(integer("pretrain.max_epochs", GF_ACC(pretrain.max_epochs)));
    e.push_back(integer("pretrain.patience", GF_ACC(pretrain.patience)));
    e.push_back(real("pretrain.temperature", GF_ACC(pretrain.temperature)));
    e.push_back(real("pretrain.edge_drop", GF_ACC(pretrain.edge_drop_p)));
    e.push_back(real("pretrain.feature_mask", GF_ACC(pretrain.feature_mask_p)));
    e.push_back(count("pretrain.batch", GF_ACC(pretrain.batch)));
    e.push_back(count("pretrain.subgraphs_per_epoch", GF_ACC(pretrain.subgraphs_per_epoch)));
    e.push_back(count("ego.min", GF_ACC(pretrain.ego.min_size)));
    e.push_back(count("ego.max", GF_ACC(pretrain.ego.max_size)));
    e.push_back(count("prototypes.k", GF_ACC(prototype_k)));
    e.push_back(real("attack.alpha", GF_ACC(attack.alpha)));
    e.push_back(real("attack.beta", GF_ACC(attack.beta)));
    e.push_back(real("attack.lr", GF_ACC(attack.lr)));
    e.push_back(integer("attack.epochs", GF_ACC(attack.epochs)));
    e.push_back(flag("attack.random_targets", GF_ACC(attack.random_targets)));
    e.push_back(flag("attack.static_trigger", GF_ACC(attack.static_trigger)));
    e.push_back(flag("attack.disable_persistence", GF_ACC(attack.disable_persistence)));
    e.push_back({"attack.readout",
                 [](RunConfig& c) { return std::string(c.attack.readout == Readout::TargetNode ? "target" : "pooled"); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "target") c.attack.readout = Readout::TargetNode;
                   else if (v == "pooled") c.attack.readout = Readout::Pooled;
                   else throw ConfigError("attack.readout must be target or pooled, got '" + v + "'");
                 }});
    e.push_back(real("perturb.s", GF_ACC(perturb.s)));
    e.push_back(real("perturb.sigma", GF_ACC(perturb.sigma)));
    e.push_back(integer("perturb.m", GF_ACC(perturb.m_perturb)));
    e.push_back(real("perturb.lambda_mix", GF_ACC(perturb.lambda_mix)));
    e.push_back(real("perturb.hvp_eps", GF_ACC(perturb.hvp_eps)));
    e.push_back(count("perturb.mix_limit", GF_ACC(perturb.mix_limit)));
    e.push_back(count("perturb.mix_subgraphs", GF_ACC(perturb.mix_subgraphs)));
    e.push_back(integer("eval.shots", GF_ACC(eval.shots)));
    e.push_back({"eval.scenario", [](RunConfig& c) { return to_string(c.eval.scenario); },
                 [](RunConfig& c, const std::string& v) { c.eval.scenario = parse_scenario(v); }});
    e.push_back(integer("eval.target_class", GF_ACC(eval.target_class)));
    e.push_back(count("eval.prototype", GF_ACC(eval.prototype)));
    e.push_back(count("eval.query_budget", GF_ACC(eval.query_budget)));
    e.push_back(count("eval.probes", GF_ACC(eval.probes)));
    e.push_back(real("eval.tau", GF_ACC(eval.tau)));
    e.push_back(count("eval.histogram_bins", GF_ACC(eval.histogram_bins)));
    e.push_back(real("head.lr", GF_ACC(head.lr)));
    e.push_back(integer("head.epochs", GF_ACC(head.epochs)));
    e.push_back(real("finetune.lr", GF_ACC(finetune.lr)));
    e.push_back(integer("finetune.epochs", GF_ACC(finetune.epochs)));
    e.push_back(integer("fps.classes", GF_ACC(fps.mixture.num_classes)));
    e.push_back(integer("fps.dim", GF_ACC(fps.mixture.dim)));
    e.push_back(real("fps.sigma", GF_ACC(fps.mixture.noise_sigma)));
    e.push_back(integer("fps.points_per_class", GF_ACC(fps.mixture.n_per_class)));
    e.push_back(list("fps.lambdas", GF_ACC(fps.lambdas)));
    e.push_back(count("fps.k", GF_ACC(fps.k)));
    e.push_back(count("fps.r", GF_ACC(fps.r)));
    e.push_back(count("fps.trials", GF_ACC(fps.trials)));
    e.push_back(real("fps.delta", GF_ACC(fps.delta)));
    e.push_back(list("grid.alphas", GF_ACC(grid_alphas)));
    e.push_back(list("grid.betas", GF_ACC(grid_betas)));
    return e;
  }();
  return entries;
}

#undef GF_ACC

const Entry& find_entry(const std::string& key) {
  for (const Entry& e : registry())
    if (e.key == key) return e;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : registry()) keys.push_back(e.key);
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  find_entry(key).set(cfg, value);
  cfg.attack.ego = cfg.pretrain.ego;
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  return find_entry(key).get(const_cast<RunConfig&>(cfg));
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected `key = value`");
    }
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  RunConfig cfg;
  apply_config_text(cfg, text, path.string());
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set_config_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void validate(const RunConfig& cfg) {
  if (cfg.data.source == DataSource::Synthetic) {
    try {
      validate(cfg.data.sbm);
    } catch (const ContractError& e) {
      throw ConfigError(std::string("data: ") + e.what());
    }
    if (cfg.data.sbm.num_domains < 2) throw ConfigError("data.domains must be >= 2 (pre-training plus held-out)");
    if (cfg.data.heldout < -1 || cfg.data.heldout >= cfg.data.sbm.num_domains) {
      throw ConfigError("data.heldout must be -1 or a domain index");
    }
  } else {
    if (cfg.data.pretrain_dirs.empty() || cfg.data.downstream_dir.empty()) {
      throw ConfigError("data.source = directory needs data.pretrain_dirs and data.downstream_dir");
    }
    for (const auto& d : cfg.data.pretrain_dirs)
      if (!std::filesystem::is_directory(d)) throw ConfigError("data.pretrain_dirs: no directory " + d);
    if (!std::filesystem::is_directory(cfg.data.downstream_dir)) {
      throw ConfigError("data.downstream_dir: no directory " + cfg.data.downstream_dir);
    }
  }
  if (cfg.hidden_dim == 0 || cfg.out_dim == 0) throw ConfigError("encoder sizes must be positive");
  if (cfg.pretrain.ego.min_size == 0 || cfg.pretrain.ego.min_size > cfg.pretrain.ego.max_size) {
    throw ConfigError("ego sizes must satisfy 1 <= ego.min <= ego.max");
  }
  validate(cfg.pretrain);
  validate(cfg.attack);
  validate(cfg.perturb);
  if (cfg.eval.shots < 1) throw ConfigError("eval.shots must be >= 1");
  if (cfg.eval.probes < 1) throw ConfigError("eval.probes must be >= 1");
  if (cfg.eval.histogram_bins < 1) throw ConfigError("eval.histogram_bins must be >= 1");
  if (!(cfg.head.lr > 0.0) || cfg.head.epochs < 0) throw ConfigError("head.lr must be > 0 and head.epochs >= 0");
  if (!(cfg.finetune.lr >= 0.0) || cfg.finetune.epochs < 0) {
    throw ConfigError("finetune.lr and finetune.epochs must be >= 0");
  }
  if (cfg.fps.trials < 100) throw ConfigError("fps.trials must be >= 100");
  if (cfg.fps.lambdas.empty()) throw ConfigError("fps.lambdas must not be empty");
  if (cfg.grid_alphas.empty() || cfg.grid_betas.empty()) throw ConfigError("grid axes must not be empty");
  for (double a : cfg.grid_alphas)
    if (!(a >= 0.0)) throw ConfigError("grid.alphas must be >= 0");
  for (double b : cfg.grid_betas)
    if (!(b >= 0.0)) throw ConfigError("grid.betas must be >= 0");
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : registry()) out += e.key + " = " + e.get(const_cast<RunConfig&>(cfg)) + "\n";
  return out;
}

std::string config_digest(const RunConfig& cfg) { return sha256_hex(dump_config(cfg)); }

}  // namespace gfmlab
