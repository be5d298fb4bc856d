#include "gfmlab/prototypes/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>

#include "gfmlab/autodiff/params.hpp"
#include "gfmlab/errors.hpp"
#include "gfmlab/graphcore/text.hpp"

namespace gfmlab {

namespace {

double squared_distance(const Tensor& p, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.cols(); ++k) {
    const double d = p(a, k) - p(b, k);
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<std::size_t> fps(const Tensor& points, std::size_t k, std::size_t seed_index) {
  const std::size_t n = points.rows();
  if (k < 1 || k > n) {
    throw ContractError("fps: k = " + std::to_string(k) + " must be in [1, " + std::to_string(n) + "]");
  }
  if (seed_index >= n) throw ContractError("fps: seed index out of range");
  std::vector<std::size_t> order{seed_index};
  order.reserve(k);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  taken[seed_index] = 1;
  std::size_t last = seed_index;
  while (order.size() < k) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_dist[i] = std::min(min_dist[i], squared_distance(points, i, last));
      if (best == n || min_dist[i] > min_dist[best]) best = i;
    }
    taken[best] = 1;
    order.push_back(best);
    last = best;
  }
  return order;
}

std::size_t default_prototype_count(std::size_t total_nodes) {
  const auto two_percent = static_cast<std::size_t>(std::ceil(0.02 * static_cast<double>(total_nodes)));
  return std::min(total_nodes, std::max<std::size_t>(8, two_percent));
}

PrototypeSet build_prototype_set(const EncoderParams& params, std::span<const Graph> graphs,
                                 std::size_t k, Rng& rng, const EgoConfig& ego) {
  std::vector<PrototypeSource> where;
  std::vector<Tensor> rows;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const Tensor e = ego_embeddings(params, graphs[gi], ego);
    for (std::size_t v = 0; v < e.rows(); ++v) {
      where.push_back({gi, v});
      rows.push_back(e.row_copy(v));
    }
  }
  if (k < 1 || k > where.size()) {
    throw ContractError("build_prototype_set: k = " + std::to_string(k) + " but only " +
                        std::to_string(where.size()) + " nodes are available");
  }
  Tensor all(rows.size(), params.out_dim());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < all.cols(); ++c) all(i, c) = rows[i](0, c);

  PrototypeSet set;
  set.seed_index = rng.index(where.size());
  const auto order = fps(all, k, set.seed_index);
  set.embeddings = Tensor(k, all.cols());
  for (std::size_t j = 0; j < k; ++j) {
    set.sources.push_back(where[order[j]]);
    for (std::size_t c = 0; c < all.cols(); ++c) set.embeddings(j, c) = all(order[j], c);
  }
  return set;
}

void write_prototypes(std::ostream& out, const PrototypeSet& set) {
  out << "# seed_index=" << set.seed_index << '\n';
  out << "graph,node";
  for (std::size_t c = 0; c < set.embeddings.cols(); ++c) out << ",e" << c;
  out << '\n';
  for (std::size_t j = 0; j < set.size(); ++j) {
    out << set.sources[j].graph << ',' << set.sources[j].node;
    for (std::size_t c = 0; c < set.embeddings.cols(); ++c) {
      out << ',' << ad::format_double(set.embeddings(j, c));
    }
    out << '\n';
  }
}

PrototypeSet read_prototypes(std::istream& in, const std::string& source) {
  PrototypeSet set;
  std::string line;
  std::size_t no = 0, width = 0;
  std::vector<double> values;
  const std::string tag = "# seed_index=";
  while (std::getline(in, line)) {
    ++no;
    const std::string where = source + ":" + std::to_string(no);
    if (no == 1) {
      if (line.rfind(tag, 0) != 0) throw FormatError(where + ": expected '" + tag + "<i>'");
      set.seed_index = static_cast<std::size_t>(parse_int(trim(line.substr(tag.size())), where));
      continue;
    }
    if (no == 2) {
      const auto f = split_csv(line);
      if (f.size() < 3 || f[0] != "graph" || f[1] != "node") {
        throw FormatError(where + ": expected header graph,node,e0,...");
      }
      width = f.size() - 2;
      continue;
    }
    if (trim(line).empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != width + 2) {
      throw FormatError(where + ": expected " + std::to_string(width + 2) + " columns, got " +
                        std::to_string(f.size()));
    }
    const long long g = parse_int(trim(f[0]), where), v = parse_int(trim(f[1]), where);
    if (g < 0 || v < 0) throw FormatError(where + ": negative id");
    set.sources.push_back({static_cast<std::size_t>(g), static_cast<std::size_t>(v)});
    for (std::size_t c = 0; c < width; ++c) values.push_back(ad::parse_double(trim(f[c + 2]), where));
  }
  if (set.sources.empty()) throw FormatError(source + ": no prototypes");
  set.embeddings = Tensor(set.sources.size(), width, std::move(values));
  return set;
}

void save_prototypes(const std::filesystem::path& path, const PrototypeSet& set) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_prototypes(out, set);
}

PrototypeSet load_prototypes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  return read_prototypes(in, path.string());
}

std::size_t coverage_count(std::span<const std::size_t> selected, std::span<const int> labels) {
  std::set<int> seen;
  for (std::size_t i : selected) {
    if (i >= labels.size()) throw ContractError("coverage_count: index out of range");
    seen.insert(labels[i]);
  }
  return seen.size();
}

double hoeffding_slack(std::size_t trials, double delta) {
  if (trials == 0 || !(delta > 0.0 && delta < 1.0)) throw ContractError("hoeffding_slack: bad arguments");
  return 2.0 * std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(trials)));
}

CoverageEstimate verify_fps_separation_monotonicity(const MixtureSpec& base,
                                                    std::span<const double> lambdas,
                                                    std::size_t k, std::size_t r,
                                                    std::size_t trials, Rng& rng, double delta) {
  if (lambdas.empty()) throw ContractError("separation list is empty");
  if (!std::is_sorted(lambdas.begin(), lambdas.end())) {
    throw ContractError("separation list must be sorted ascending");
  }
  if (trials < 100) throw ContractError("at least 100 trials are required");
  if (r < 1) throw ContractError("coverage threshold r must be >= 1");
  for (double l : lambdas) {
    MixtureSpec s = base;
    s.centroid_scale = l;
    validate(s);
  }
  const std::size_t n =
      static_cast<std::size_t>(base.num_classes) * static_cast<std::size_t>(base.n_per_class);
  if (k < 1 || k > n) throw ContractError("fps k out of range for the mixture size");

  CoverageEstimate est;
  est.lambdas.assign(lambdas.begin(), lambdas.end());
  est.successes.assign(lambdas.size(), 0);
  est.trials = trials;
  est.k = k;
  est.r = r;
  est.slack = hoeffding_slack(trials, delta);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng trng = rng.derive("fps-trial", t);
    const Tensor noise = draw_mixture_noise(base, trng);
    const std::size_t seed_index = trng.index(n);
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      MixtureSpec s = base;
      s.centroid_scale = lambdas[li];
      const LabeledPoints pts = mixture_points(s, noise);
      const auto picked = fps(pts.points, k, seed_index);
      if (coverage_count(picked, pts.labels) >= r) ++est.successes[li];
    }
  }
  est.monotone = true;
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    for (std::size_t j = i + 1; j < lambdas.size(); ++j)
      if (est.p_hat(j) < est.p_hat(i) - est.slack) est.monotone = false;
  return est;
}

void write_coverage_csv(std::ostream& out, const CoverageEstimate& est) {
  out << "lambda,trials,successes,p_hat\n";
  for (std::size_t i = 0; i < est.lambdas.size(); ++i) {
    out << ad::format_double(est.lambdas[i]) << ',' << est.trials << ',' << est.successes[i] << ','
        << ad::format_double(est.p_hat(i)) << '\n';
  }
}

}  // namespace gfmlab
