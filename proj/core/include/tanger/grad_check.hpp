#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tanger/tensor.hpp"

namespace tanger {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;   // index into the parameter list
  std::size_t worst_entry = 0;   // flat index within that parameter
  std::size_t entries_checked = 0;
};

// Compares analytic gradients of the scalar produced by `f` against central
// finite differences for every entry of every parameter.  Parameters must be
// float64 leaves marked requires_grad; `f` must be deterministic in the
// parameter values.  The relative error of one entry is
//   |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult finite_difference_check(const std::function<Tensor()>& f,
                                        const std::vector<Tensor>& params, double eps = 1e-5);

}  // namespace tanger
