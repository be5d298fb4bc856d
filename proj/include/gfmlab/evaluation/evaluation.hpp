#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gfmlab/encoder/head.hpp"
#include "gfmlab/trigger/trigger.hpp"

namespace gfmlab {

inline constexpr double kPurifyThreshold = 0.1;

enum class ScenarioKind { Uncontrolled, Controlled };

std::string to_string(ScenarioKind k);
ScenarioKind parse_scenario(const std::string& s);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::Uncontrolled;
  int target_class = kUnlabeled;  // controlled only
  std::size_t prototype = 0;      // resolved target embedding row
  std::size_t query_budget = 1;
};

void validate(const ScenarioSpec& s, int num_classes);

// A downstream node kept with its raw ego subgraph, so triggers and the
// purification defense can act on the graph itself.
struct EvalNode {
  Graph ego;
  std::size_t target = 0;
  int label = kUnlabeled;
};

EvalNode make_eval_node(const Graph& g, std::size_t v, const EgoConfig& ego);
std::vector<EvalNode> make_eval_nodes(const Graph& g, std::span<const std::size_t> nodes,
                                      const EgoConfig& ego);
NodeSample to_sample(const EvalNode& n);

std::vector<int> clean_predictions(const EncoderParams& enc, const LinearHead& head,
                                   std::span<const EvalNode> nodes);
double clean_accuracy(const EncoderParams& enc, const LinearHead& head, std::span<const EvalNode> nodes);

// Edges whose endpoint features have cosine strictly below tau are removed.
Graph purify(const Graph& g, double tau = kPurifyThreshold);

// Trigger for `n` towards `e_j`, injected at its target.
TriggeredGraph triggered_input(const TriggerGenerator& gen, const EvalNode& n, const Tensor& e_j,
                               std::size_t prototype = 0);

// Predictions on triggered inputs, optionally purified first.
std::vector<int> triggered_predictions(const EncoderParams& enc, const LinearHead& head,
                                       const TriggerGenerator& gen, std::span<const EvalNode> nodes,
                                       const Tensor& e_j, std::optional<double> purify_tau = std::nullopt);

// Uncontrolled: largest single-class fraction. Controlled: fraction equal to the
// target class.
double asr_from_predictions(std::span<const int> predictions, const ScenarioSpec& scenario,
                            int num_classes);

double asr(const EncoderParams& enc, const LinearHead& head, const TriggerGenerator& gen,
           std::span<const EvalNode> nodes, const Tensor& targets, const ScenarioSpec& scenario,
           std::optional<double> purify_tau = std::nullopt);

// Counts of each predicted class, length num_classes.
std::vector<std::size_t> class_histogram(std::span<const int> predictions, int num_classes);

struct TrialQueryResult {
  std::optional<std::size_t> prototype;  // empty: no aligned prototype
  std::size_t queries = 0;
};

// Tries the target rows in order; each probe prediction costs one query. The
// first row whose probe predictions are more than half `target_class` wins.
TrialQueryResult trial_query_select(const EncoderParams& enc, const LinearHead& head,
                                    const TriggerGenerator& gen, const Tensor& targets,
                                    int target_class, std::span<const EvalNode> probes,
                                    std::size_t budget);

// Mean cos(x_i, x_tri) over `nodes`.
double mean_trigger_cosine(const TriggerGenerator& gen, std::span<const EvalNode> nodes, const Tensor& e_j);

struct PersistenceOutcome {
  double asr_before = 0.0;
  double asr_after = 0.0;
  FinetuneResult tuned;
};

// ASR with the given encoder, then again after fine-tuning a copy of encoder
// and head on `train`.
PersistenceOutcome persistence_eval(const EncoderParams& enc, const LinearHead& head,
                                    const TriggerGenerator& gen, std::span<const NodeSample> train,
                                    std::span<const EvalNode> test, const Tensor& targets,
                                    const ScenarioSpec& scenario, const FinetuneConfig& ft);

struct UpdateHistogram {
  double max_magnitude = 0.0;
  double bin_width = 0.0;
  std::vector<std::size_t> counts;
};

// |after - before| per coordinate in equal-width bins over [0, max].
UpdateHistogram update_magnitude_histogram(const EncoderParams& before, const EncoderParams& after,
                                           std::size_t num_bins);
// Fraction of coordinates whose update is strictly below rel * max update.
double small_update_fraction(const EncoderParams& before, const EncoderParams& after, double rel);

struct EvalReport {
  std::uint64_t seed = 0;
  double alpha = 0.0, beta = 0.0;
  ScenarioSpec scenario;
  std::optional<std::size_t> queries;
  bool aligned = true;  // false: trial queries found no target row for the class
  double asr = 0.0;
  double acc = 0.0;
  double asr_purified = 0.0;
  double asr_after_finetune = 0.0;
  double mean_trigger_cosine = 0.0;
  std::vector<std::size_t> class_histogram;
  std::string config_digest;
};

std::string report_json(const EvalReport& r);
EvalReport parse_report_json(const std::string& text, const std::string& source);
inline constexpr const char* kReportCsvHeader = "seed,alpha,beta,scenario,asr,acc,asr_purified,asr_after_ft";
std::string report_csv_row(const EvalReport& r);

}  // namespace gfmlab
