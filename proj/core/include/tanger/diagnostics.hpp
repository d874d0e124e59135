#pragma once

#include <string>

#include "tanger/model.hpp"

namespace tanger {

struct ModelGradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_entry = 0;
  std::size_t entries_checked = 0;
};

// The reduced configuration used for whole-model gradient verification:
// 16-dim embeddings, one block, two heads, 8 patch tokens (16x32 image),
// 12-token vocabulary (digits script only), maxlen 4, alpha 0.01.
ModelConfig grad_check_config();

// Renders one deterministic sample, builds its adaptive window plan, and
// compares analytic gradients of the full weighted loss against central
// finite differences for every entry of every parameter tensor.
ModelGradCheckReport run_model_grad_check();

}  // namespace tanger
