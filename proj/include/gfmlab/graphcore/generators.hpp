#pragma once

#include <vector>

#include "gfmlab/graphcore/graph.hpp"
#include "gfmlab/graphcore/rng.hpp"

namespace gfmlab {

struct MixtureSpec {
  int num_classes = 4;          // m >= 2
  double centroid_scale = 1.0;  // lambda_sep >= 1
  double noise_sigma = 1.0;     // >= 0
  int n_per_class = 25;
  int dim = 2;
};

void validate(const MixtureSpec& spec);

// m base centroids with minimum pairwise distance 1: vertices of a regular
// simplex when dim >= m - 1, otherwise a regular m-gon in the first two
// coordinates. dim == 1 with m > 2 is rejected.
Tensor base_centroids(int num_classes, int dim);

struct LabeledPoints {
  Tensor points;  // (m * n_per_class) x dim, class-major
  std::vector<int> labels;
};

// Isotropic noise block Z, class-major, (m * n_per_class) x dim.
Tensor draw_mixture_noise(const MixtureSpec& spec, Rng& rng);
// X = lambda_sep * c_i + Z for a given noise block; reusing Z across scales
// couples datasets that differ only in centroid separation.
LabeledPoints mixture_points(const MixtureSpec& spec, const Tensor& noise);
LabeledPoints gen_gaussian_mixture(const MixtureSpec& spec, Rng& rng);

struct SbmSpec {
  int num_domains = 5;
  int classes_per_domain = 4;
  int nodes_per_class = 20;
  double p_in = 0.25;
  double p_out = 0.02;
  int feature_dim = 8;
  double feature_centroid_scale = 3.0;
  double feature_noise = 0.5;
};

void validate(const SbmSpec& spec);

// One labelled graph per domain. Nodes are class-major; each pair is linked
// with probability p_in (same class) or p_out; features are the scaled class
// centroid plus Gaussian noise.
std::vector<Graph> gen_sbm(const SbmSpec& spec, Rng& rng);

}  // namespace gfmlab
