#pragma once

#include <functional>

#include "gfmlab/autodiff/tape.hpp"

namespace gfmlab::ad {

// Builds a scalar expression of x on the given tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// Requires eps in (0, 1e-3]; throws NumericError if f is non-finite near x.
double grad_check(const ScalarFn& f, const Tensor& x, double eps);

// Analytic gradient of f at x via one backward pass.
Tensor gradient(const ScalarFn& f, const Tensor& x);

double evaluate(const ScalarFn& f, const Tensor& x);

}  // namespace gfmlab::ad
