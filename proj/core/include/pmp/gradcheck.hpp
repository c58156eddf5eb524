#pragma once

#include <functional>
#include <vector>

#include "pmp/autodiff.hpp"

namespace pmp {

// Builds f once to obtain analytic gradients, then re-evaluates f with every
// parameter entry perturbed by +/-step and returns the worst
// |analytic - central_difference| / max(1, |analytic|) over all entries.
// f must return a single-element tensor.
double grad_check(const std::function<Var(Graph&, const std::vector<Var>&)>& f,
                  const std::vector<Tensor>& params, double step);

}  // namespace pmp
