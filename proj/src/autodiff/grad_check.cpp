#include "gfmlab/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "gfmlab/errors.hpp"

namespace gfmlab::ad {

double evaluate(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Var out = f(tape, tape.constant(x));
  const double v = out.value().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: f is non-finite");
  return v;
}

Tensor gradient(const ScalarFn& f, const Tensor& x) {
  Tape tape;
  Var leaf = tape.leaf(x, true);
  Var out = f(tape, leaf);
  tape.backward(out);
  return tape.grad(leaf);
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) throw ContractError("grad_check: eps must lie in (0, 1e-3]");
  const Tensor analytic = gradient(f, x);
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double fp = evaluate(f, probe);
    probe[i] = x[i] - eps;
    const double fm = evaluate(f, probe);
    probe[i] = x[i];
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace gfmlab::ad
