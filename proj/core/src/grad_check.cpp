#include "tanger/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace tanger {

GradCheckResult finite_difference_check(const std::function<Tensor()>& f,
                                        const std::vector<Tensor>& params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_difference_check: eps must be positive");
  if (params.empty()) {
    throw std::invalid_argument("finite_difference_check: no parameters given");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].defined() || !params[p].requires_grad()) {
      throw std::invalid_argument("finite_difference_check: parameter " + std::to_string(p) +
                                  " is not a differentiable leaf");
    }
    if (params[p].dtype() != DType::f64) {
      throw std::invalid_argument("finite_difference_check: parameter " + std::to_string(p) +
                                  " must be float64");
    }
  }

  Tensor loss = f();
  if (loss.size() != 1) {
    throw std::invalid_argument("finite_difference_check: f must return a scalar");
  }
  GradientMap grads = backward(loss);

  auto eval = [&f]() {
    NoGradGuard ng;
    const Tensor l = f();
    return l.item();
  };

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor param = params[p];
    const bool has_grad = grads.contains(param);
    auto pv = param.mutable_values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double saved = pv[i];
      pv[i] = saved + eps;
      const double plus = eval();
      pv[i] = saved - eps;
      const double minus = eval();
      pv[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw std::runtime_error("finite_difference_check: non-finite loss at parameter " +
                                 std::to_string(p) + " entry " + std::to_string(i));
      }
      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = has_grad ? grads.at(param).value_at(i) : 0.0;
      const double denom = std::max(1.0, std::max(std::abs(analytic), std::abs(numeric)));
      const double rel = std::abs(analytic - numeric) / denom;
      if (!std::isfinite(rel)) {
        throw std::runtime_error("finite_difference_check: non-finite gradient at parameter " +
                                 std::to_string(p) + " entry " + std::to_string(i));
      }
      ++result.entries_checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p;
        result.worst_entry = i;
      }
    }
  }
  return result;
}

}  // namespace tanger
