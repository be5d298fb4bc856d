#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "gfmlab/encoder/gcn.hpp"
#include "gfmlab/persistence/persistence.hpp"

namespace gfmlab {

inline constexpr std::size_t kTriggerNodes = 3;
inline constexpr std::size_t kTriggerHidden = 128;

// Maps [x_i || e_j] to trigger features through one relu hidden layer, or,
// when is_static, ignores its inputs and returns one learned vector.
struct TriggerGenerator {
  bool is_static = false;
  Tensor wa;  // (d + h2) x hidden
  Tensor ba;  // 1 x hidden
  Tensor wb;  // hidden x d
  Tensor bb;  // 1 x d
  Tensor fixed;  // 1 x d, static generator only

  std::size_t feature_dim() const { return is_static ? fixed.cols() : wb.cols(); }
  ad::ParamSet to_param_set() const;
  static TriggerGenerator from_param_set(const ad::ParamSet& p);
  bool operator==(const TriggerGenerator&) const = default;
};

TriggerGenerator init_generator(std::size_t feature_dim, std::size_t embed_dim, Rng& rng,
                                std::size_t hidden = kTriggerHidden);
TriggerGenerator init_static_trigger(std::size_t feature_dim, Rng& rng);

struct GeneratorVars {
  bool is_static = false;
  ad::Var wa, ba, wb, bb, fixed;
};
GeneratorVars bind_generator(ad::Tape& tape, const TriggerGenerator& gen, bool trainable);
// Every trainable leaf of `vars`, in to_param_set order.
std::vector<ad::Var> generator_leaves(const GeneratorVars& vars);

// 1 x d trigger feature for target features x_i (1 x d) and target
// embedding e_j (1 x h2).
ad::Var generate_trigger_feature(const GeneratorVars& gen, ad::Var x_i, ad::Var e_j);
Tensor generate_trigger_feature(const TriggerGenerator& gen, const Tensor& x_i, const Tensor& e_j);

struct TriggeredGraph {
  Graph graph;             // original nodes first, then the trigger nodes
  std::size_t target = 0;  // index of the attacked node
  std::size_t prototype = 0;
};

// Adjacency of g with three mutually linked trigger nodes appended, each
// linked to `target` with unit weight.
Tensor triggered_adjacency(const Tensor& a, std::size_t target);
TriggeredGraph inject_trigger(const Graph& g, const Tensor& x_tri, std::size_t target,
                              std::size_t prototype = 0);

// X with three copies of x_tri appended as rows.
ad::Var triggered_features(ad::Var x, ad::Var x_tri);

enum class Readout { TargetNode, Pooled };

// -cos(embedding of the attacked node in the triggered graph, e_j).
ad::Var loss_eff(const EncoderVars& enc, const Tensor& a_hat_triggered, ad::Var x_triggered,
                 std::size_t target, ad::Var e_j, Readout readout = Readout::TargetNode);
// -cos(x_i, x_tri).
ad::Var loss_ste(ad::Var x_i, ad::Var x_tri);

struct AttackConfig {
  double alpha = 0.1;  // weight of the stealthiness loss
  double beta = 0.1;   // weight of the persistence loss
  double lr = 0.01;
  int epochs = 20;
  bool random_targets = false;   // Gaussian targets in place of prototypes
  bool static_trigger = false;   // one learned vector for every node
  bool disable_persistence = false;
  Readout readout = Readout::TargetNode;
  EgoConfig ego;
};

void validate(const AttackConfig& cfg);

// Everything the persistence term needs: the sensitivity report of the clean
// encoder and the perturbation settings. Perturbed copies are redrawn each
// epoch from the same selected set.
struct PersistenceContext {
  SensitivityReport report;
  PerturbationConfig perturb;
};

struct EpochLosses {
  double l_eff = 0.0, l_ste = 0.0, l_per = 0.0, total = 0.0;
};

struct AttackResult {
  TriggerGenerator generator;
  Tensor targets;  // k x h2 target embeddings actually trained towards
  std::vector<EpochLosses> trace;
};

// One gradient step on the generator per pre-training node per epoch, with a
// uniformly sampled target embedding. The encoder is only read.
AttackResult train_attack(const TriggerGenerator& init, const EncoderParams& encoder,
                          std::span<const Graph> graphs, const Tensor& targets,
                          const PersistenceContext* persistence, const AttackConfig& cfg, Rng& rng);

// k x h2 standard normal targets for the random-target ablation.
Tensor random_targets(std::size_t k, std::size_t embed_dim, Rng& rng);

// CSV `epoch,l_eff,l_ste,l_per,total`.
void write_attack_trace(const std::filesystem::path& path, std::span<const EpochLosses> trace);

}  // namespace gfmlab
