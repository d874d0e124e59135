#pragma once

#include <cstddef>
#include <vector>

#include "tanger/model.hpp"
#include "tanger/tensor.hpp"

namespace tanger {

// Optimizer state: one pair of moment buffers per parameter, in the
// deterministic ModelParams::named() order.
struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState make_adam_state(ModelParams& params);

// Extracts gradients for every parameter from a backward() result in named()
// order; parameters absent from the map get zero gradients.
std::vector<std::vector<double>> gradients_for(ModelParams& params, const GradientMap& grads);

// Standard bias-corrected Adam update:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
// applied over named() order.  Throws when any gradient entry is non-finite,
// naming the parameter and the step.
void adam_step(ModelParams& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

}  // namespace tanger
