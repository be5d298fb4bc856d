#include "gfmlab/graphcore/generators.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gfmlab/errors.hpp"

namespace gfmlab {

void validate(const MixtureSpec& spec) {
  if (spec.num_classes < 2) throw ContractError("MixtureSpec: need at least 2 classes");
  if (!(spec.centroid_scale >= 1.0)) throw ContractError("MixtureSpec: centroid_scale must be >= 1");
  if (!(spec.noise_sigma >= 0.0)) throw ContractError("MixtureSpec: noise_sigma must be >= 0");
  if (spec.n_per_class < 1) throw ContractError("MixtureSpec: n_per_class must be >= 1");
  if (spec.dim < 1) throw ContractError("MixtureSpec: dim must be >= 1");
  if (spec.dim == 1 && spec.num_classes > 2) {
    throw ContractError("MixtureSpec: " + std::to_string(spec.num_classes) +
                        " equidistant centroids do not fit in dim 1");
  }
}

Tensor base_centroids(int num_classes, int dim) {
  if (num_classes < 2 || dim < 1) throw ContractError("base_centroids: need m >= 2, dim >= 1");
  const auto m = static_cast<std::size_t>(num_classes);
  const auto d = static_cast<std::size_t>(dim);
  Tensor c(m, d);
  if (d + 1 >= m) {
    // Helmert basis of the hyperplane orthogonal to (1,...,1); the images of
    // the standard basis vectors sit sqrt(2) apart, rescaled to 1.
    for (std::size_t k = 1; k < m; ++k) {
      const double s = 1.0 / std::sqrt(static_cast<double>(k * (k + 1))) / std::numbers::sqrt2;
      for (std::size_t i = 0; i < k; ++i) c(i, k - 1) = s;
      c(k, k - 1) = -static_cast<double>(k) * s;
    }
    return c;
  }
  if (d < 2) throw ContractError("base_centroids: m > 2 centroids need dim >= 2");
  const double radius = 0.5 / std::sin(std::numbers::pi / static_cast<double>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(m);
    c(i, 0) = radius * std::cos(angle);
    c(i, 1) = radius * std::sin(angle);
  }
  return c;
}

Tensor draw_mixture_noise(const MixtureSpec& spec, Rng& rng) {
  validate(spec);
  const auto n = static_cast<std::size_t>(spec.num_classes * spec.n_per_class);
  Tensor z(n, static_cast<std::size_t>(spec.dim));
  for (double& v : z.values()) v = spec.noise_sigma * rng.normal();
  return z;
}

LabeledPoints mixture_points(const MixtureSpec& spec, const Tensor& noise) {
  validate(spec);
  const auto n = static_cast<std::size_t>(spec.num_classes * spec.n_per_class);
  if (noise.rows() != n || noise.cols() != static_cast<std::size_t>(spec.dim)) {
    throw ContractError("mixture_points: noise block has shape " + noise.shape_str());
  }
  const Tensor c = base_centroids(spec.num_classes, spec.dim);
  LabeledPoints out{noise, {}};
  out.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cls = i / static_cast<std::size_t>(spec.n_per_class);
    out.labels.push_back(static_cast<int>(cls));
    for (std::size_t k = 0; k < c.cols(); ++k) out.points(i, k) += spec.centroid_scale * c(cls, k);
  }
  return out;
}

LabeledPoints gen_gaussian_mixture(const MixtureSpec& spec, Rng& rng) {
  return mixture_points(spec, draw_mixture_noise(spec, rng));
}

void validate(const SbmSpec& spec) {
  if (spec.num_domains < 1) throw ContractError("SbmSpec: need at least one domain");
  if (spec.classes_per_domain < 2) throw ContractError("SbmSpec: need at least 2 classes");
  if (spec.nodes_per_class < 1) throw ContractError("SbmSpec: nodes_per_class must be >= 1");
  if (!(0.0 <= spec.p_out && spec.p_out < spec.p_in && spec.p_in <= 1.0)) {
    throw ContractError("SbmSpec: need 0 <= p_out < p_in <= 1");
  }
  if (spec.feature_dim < 1) throw ContractError("SbmSpec: feature_dim must be >= 1");
  if (spec.feature_dim == 1 && spec.classes_per_domain > 2) {
    throw ContractError("SbmSpec: class centroids do not fit in feature_dim 1");
  }
  if (!(spec.feature_centroid_scale > 0.0) || !(spec.feature_noise >= 0.0)) {
    throw ContractError("SbmSpec: centroid scale must be > 0 and noise >= 0");
  }
}

std::vector<Graph> gen_sbm(const SbmSpec& spec, Rng& rng) {
  validate(spec);
  const Tensor centroids = base_centroids(spec.classes_per_domain, spec.feature_dim);
  const auto per_class = static_cast<std::size_t>(spec.nodes_per_class);
  const std::size_t n = per_class * static_cast<std::size_t>(spec.classes_per_domain);
  const auto d = static_cast<std::size_t>(spec.feature_dim);
  std::vector<Graph> graphs;
  graphs.reserve(static_cast<std::size_t>(spec.num_domains));
  for (int dom = 0; dom < spec.num_domains; ++dom) {
    Rng drng = rng.derive("sbm-domain", static_cast<std::uint64_t>(dom));
    Graph g;
    g.name = "domain_" + std::to_string(dom);
    g.domain = g.name;
    g.num_classes = spec.classes_per_domain;
    g.x = Tensor(n, d);
    g.a = Tensor(n, n);
    g.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t cls = i / per_class;
      g.labels[i] = static_cast<int>(cls);
      for (std::size_t k = 0; k < d; ++k) {
        g.x(i, k) = spec.feature_centroid_scale * centroids(cls, k) + spec.feature_noise * drng.normal();
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double p = g.labels[i] == g.labels[j] ? spec.p_in : spec.p_out;
        if (drng.bernoulli(p)) g.a(i, j) = g.a(j, i) = 1.0;
      }
    }
    graphs.push_back(std::move(g));
  }
  return graphs;
}

}  // namespace gfmlab
