#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gfmlab/encoder/head.hpp"
#include "gfmlab/evaluation/evaluation.hpp"
#include "gfmlab/graphcore/generators.hpp"
#include "gfmlab/persistence/persistence.hpp"
#include "gfmlab/trigger/trigger.hpp"

namespace gfmlab {

enum class DataSource { Synthetic, Directory };

struct DataConfig {
  DataSource source = DataSource::Synthetic;
  SbmSpec sbm;
  int heldout = -1;  // downstream domain index; -1 = last
  std::vector<std::string> pretrain_dirs;
  std::string downstream_dir;
};

struct EvalConfig {
  int shots = 5;
  ScenarioKind scenario = ScenarioKind::Uncontrolled;
  int target_class = 0;
  std::size_t prototype = 0;
  std::size_t query_budget = 0;  // 0 = k * probes
  std::size_t probes = 3;
  double tau = kPurifyThreshold;
  std::size_t histogram_bins = 20;
};

struct FpsVerifyConfig {
  MixtureSpec mixture;
  std::vector<double> lambdas = {1.0, 2.0, 4.0, 8.0};
  std::size_t k = 4;
  std::size_t r = 4;
  std::size_t trials = 2000;
  double delta = 0.05;
};

struct RunConfig {
  std::uint64_t seed = 1;
  DataConfig data;
  std::size_t hidden_dim = 64;
  std::size_t out_dim = 64;
  PretrainConfig pretrain;
  std::size_t prototype_k = 0;  // 0 = default_prototype_count
  AttackConfig attack;
  PerturbationConfig perturb;
  EvalConfig eval;
  HeadConfig head;
  FinetuneConfig finetune;
  FpsVerifyConfig fps;
  std::vector<double> grid_alphas = {0.01, 0.0316, 0.1, 0.316, 1.0};
  std::vector<double> grid_betas = {0.01, 0.0316, 0.1, 0.316, 1.0};
};

// Every known key in dump order.
std::vector<std::string> config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

// `key = value` lines; '#' starts a comment. `source` names the input in errors.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source);
RunConfig load_config(const std::filesystem::path& path);
// A single `key=value` override.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Cross-field checks of every section.
void validate(const RunConfig& cfg);

// Effective config, one `key = value` line per key. Parsing it back yields
// the same config.
std::string dump_config(const RunConfig& cfg);
// SHA-256 of dump_config.
std::string config_digest(const RunConfig& cfg);

}  // namespace gfmlab
