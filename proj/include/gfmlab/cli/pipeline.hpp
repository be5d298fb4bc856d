#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gfmlab/cli/config.hpp"
#include "gfmlab/cli/manifest.hpp"
#include "gfmlab/prototypes/prototypes.hpp"

namespace gfmlab {

// ---- in-memory stages; each draws from Rng(cfg.seed).derive(<stage>) ----

struct Dataset {
  std::vector<Graph> pretrain;
  Graph downstream;
};

Dataset synthesize_dataset(const RunConfig& cfg);
Dataset load_dataset_dirs(const RunConfig& cfg);

PretrainResult run_pretrain(const RunConfig& cfg, std::span<const Graph> graphs);
PrototypeSet run_prototypes(const RunConfig& cfg, const EncoderParams& enc, std::span<const Graph> graphs);
SensitivityReport run_sensitivity(const RunConfig& cfg, const EncoderParams& enc, std::span<const Graph> graphs);

// Prototype embeddings, or k Gaussian vectors under attack.random_targets.
Tensor attack_targets(const RunConfig& cfg, const PrototypeSet& prototypes);
bool needs_persistence(const RunConfig& cfg);
// `sensitivity` may be null when needs_persistence(cfg) is false.
AttackResult run_attack(const RunConfig& cfg, const EncoderParams& enc, std::span<const Graph> graphs,
                        const Tensor& targets, const SensitivityReport* sensitivity);

// Probe nodes, few-shot head training set and test nodes of the downstream
// graph, with the head fitted on the given encoder.
struct Downstream {
  std::vector<EvalNode> probes;
  std::vector<NodeSample> train;
  std::vector<EvalNode> test;
  LinearHead head;
  int num_classes = 0;
};

Downstream prepare_downstream(const RunConfig& cfg, const EncoderParams& enc, const Graph& g);

std::size_t query_budget(const RunConfig& cfg, std::size_t k);

struct EvalParts {
  bool purify = true;
  bool persist = true;
};

struct EvalOutcome {
  EvalReport report;
  std::vector<int> clean_predictions;
  std::vector<int> triggered_predictions;
  std::optional<FinetuneResult> tuned;
};

EvalOutcome run_eval(const RunConfig& cfg, const EncoderParams& enc, const Downstream& down,
                     const TriggerGenerator& gen, const Tensor& targets, EvalParts parts = {});

// Distinct classes y for which trial queries find an aligned target row.
std::size_t reachable_classes(const EncoderParams& enc, const Downstream& down, const TriggerGenerator& gen,
                              const Tensor& targets, std::size_t budget);

// ---- run-directory stages ----

struct StageResult {
  int exit_code = 0;
  std::vector<std::string> artifacts;  // relative paths written
};

// Names accepted by run_stage.
const std::vector<std::string>& stage_names();

// Runs one named stage against `out_dir`, reading upstream artifacts listed
// in its manifest. `log` receives progress lines.
StageResult run_stage(const std::string& stage, const RunConfig& cfg, const std::filesystem::path& out_dir,
                      std::size_t jobs, std::ostream& log);

// Aggregates every report.json below run_dir into report.csv and summary.txt.
StageResult emit_report(const std::filesystem::path& run_dir, std::ostream& log);

}  // namespace gfmlab
