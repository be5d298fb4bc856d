#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "gfmlab/encoder/gcn.hpp"
#include "gfmlab/graphcore/generators.hpp"

namespace gfmlab {

// Farthest-point sampling: starts at seed_index, then repeatedly takes the
// point whose distance to the selected set is largest (lowest index on ties).
std::vector<std::size_t> fps(const Tensor& points, std::size_t k, std::size_t seed_index);

struct PrototypeSource {
  std::size_t graph = 0;
  std::size_t node = 0;
  bool operator==(const PrototypeSource&) const = default;
};

// Target embeddings in selection order, with the (graph, node) each came from.
struct PrototypeSet {
  Tensor embeddings;  // k x h2
  std::vector<PrototypeSource> sources;
  std::size_t seed_index = 0;  // flat node index the selection started from

  std::size_t size() const { return embeddings.rows(); }
  Tensor embedding(std::size_t j) const { return embeddings.row_copy(j); }
  bool operator==(const PrototypeSet&) const = default;
};

// max(8, ceil(2% of nodes)), never more than the node count.
std::size_t default_prototype_count(std::size_t total_nodes);

// Embeds every node of every graph inside its ego subgraph and selects k of
// them by fps from a uniformly drawn seed.
PrototypeSet build_prototype_set(const EncoderParams& params, std::span<const Graph> graphs,
                                 std::size_t k, Rng& rng, const EgoConfig& ego = {});

// CSV `graph,node,e0,...`; the first data line is preceded by
// `# seed_index=<i>`.
void write_prototypes(std::ostream& out, const PrototypeSet& set);
PrototypeSet read_prototypes(std::istream& in, const std::string& source);
void save_prototypes(const std::filesystem::path& path, const PrototypeSet& set);
PrototypeSet load_prototypes(const std::filesystem::path& path);

// Number of distinct labels among the selected rows.
std::size_t coverage_count(std::span<const std::size_t> selected, std::span<const int> labels);

struct CoverageEstimate {
  std::vector<double> lambdas;
  std::vector<std::size_t> successes;  // trials with coverage >= r, per lambda
  std::size_t trials = 0;
  std::size_t k = 0;
  std::size_t r = 0;
  double slack = 0.0;  // Hoeffding half-width allowance between two estimates
  bool monotone = false;

  double p_hat(std::size_t i) const {
    return static_cast<double>(successes[i]) / static_cast<double>(trials);
  }
};

// 2 sqrt(ln(2/delta) / (2 trials)).
double hoeffding_slack(std::size_t trials, double delta);

// For each trial one noise block and one fps seed are drawn and reused at
// every separation in `lambdas`, so the estimates are coupled. The verdict
// holds when p_hat never drops by more than the slack between any smaller
// and larger separation.
CoverageEstimate verify_fps_separation_monotonicity(const MixtureSpec& base,
                                                    std::span<const double> lambdas,
                                                    std::size_t k, std::size_t r,
                                                    std::size_t trials, Rng& rng,
                                                    double delta = 0.05);

// CSV `lambda,trials,successes,p_hat`.
void write_coverage_csv(std::ostream& out, const CoverageEstimate& est);

}  // namespace gfmlab
