#include "tanger/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace tanger {

AdamState make_adam_state(ModelParams& params) {
  AdamState st;
  for (const auto& [name, t] : params.named()) {
    (void)name;
    st.m.emplace_back(t->size(), 0.0);
    st.v.emplace_back(t->size(), 0.0);
  }
  return st;
}

std::vector<std::vector<double>> gradients_for(ModelParams& params, const GradientMap& grads) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : params.named()) {
    (void)name;
    if (grads.contains(*t)) {
      const auto g = grads.at(*t).values();
      out.emplace_back(g.begin(), g.end());
    } else {
      out.emplace_back(t->size(), 0.0);
    }
  }
  return out;
}

void adam_step(ModelParams& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  auto named = params.named();
  if (grads.size() != named.size() || state.m.size() != named.size() ||
      state.v.size() != named.size()) {
    throw std::invalid_argument("gradient/state lists do not match the parameter list");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < named.size(); ++p) {
    Tensor* t = named[p].second;
    if (grads[p].size() != t->size()) {
      throw std::invalid_argument("gradient size mismatch for parameter " + named[p].first);
    }
    std::span<double> values = t->mutable_values();
    std::vector<double>& m = state.m[p];
    std::vector<double>& v = state.v[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grads[p][i];
      if (!std::isfinite(g)) {
        throw std::runtime_error("non-finite gradient for parameter '" + named[p].first +
                                 "' at step " + std::to_string(state.step));
      }
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace tanger
