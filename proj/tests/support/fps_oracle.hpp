#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "gfmlab/autodiff/tensor.hpp"

namespace gfmlab::testing {

// Farthest-point selection recomputing every min-distance from scratch at
// each step, with true (square-rooted) Euclidean distances.
inline std::vector<std::size_t> brute_force_fps(const ad::Tensor& pts, std::size_t k,
                                                std::size_t seed) {
  const std::size_t n = pts.rows();
  std::vector<std::size_t> sel{seed};
  while (sel.size() < k) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      bool taken = false;
      for (std::size_t s : sel) taken = taken || s == i;
      if (taken) continue;
      double dmin = INFINITY;
      for (std::size_t s : sel) {
        double acc = 0.0;
        for (std::size_t c = 0; c < pts.cols(); ++c) acc += std::pow(pts(i, c) - pts(s, c), 2);
        dmin = std::fmin(dmin, std::sqrt(acc));
      }
      if (dmin > best_d) {
        best_d = dmin;
        best = i;
      }
    }
    sel.push_back(best);
  }
  return sel;
}

}  // namespace gfmlab::testing
