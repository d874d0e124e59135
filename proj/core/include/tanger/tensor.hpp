#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace tanger {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

// Values of an f32 tensor always sit on the float grid; arithmetic itself is
// carried out in double so that f64 tensors support tight gradient checks.
inline double quantize(DType t, double v) {
  return t == DType::f32 ? static_cast<double>(static_cast<float>(v)) : v;
}

class Tensor;

namespace detail {

// Accumulates gradients into the parent buffers.  A null parent pointer means
// that the parent does not participate in differentiation.
using BackwardFn =
    std::function<void(const double* out_grad, const std::vector<double*>& parent_grads)>;

struct TensorNode {
  std::vector<std::size_t> shape;
  DType dtype = DType::f64;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  BackwardFn backward_fn;

  bool traced() const { return requires_grad || static_cast<bool>(backward_fn); }
  std::size_t size() const { return values.size(); }
};

}  // namespace detail

// Value-semantic handle to an n-dimensional array that may be part of a
// reverse-mode computation graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, DType dtype = DType::f64);
  static Tensor full(std::vector<std::size_t> shape, double value, DType dtype = DType::f64);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> values,
                          DType dtype = DType::f64);
  static Tensor scalar(double value, DType dtype = DType::f64);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  DType dtype() const;

  std::span<const double> values() const;
  double value_at(std::size_t flat_index) const;
  double item() const;  // requires size() == 1

  // Marks a leaf tensor as a differentiable parameter.  Not allowed on
  // operation results.
  Tensor& set_requires_grad(bool on = true);
  bool requires_grad() const;
  bool traced() const;

  // Direct mutation is reserved for leaves (parameter updates); values are
  // re-quantized for f32 tensors by the caller via quantize().
  std::span<double> mutable_values();

  detail::TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend Tensor make_op_result(std::vector<std::size_t> shape, DType dtype,
                               std::vector<double> values, std::vector<Tensor> parents,
                               detail::BackwardFn fn);
  friend Tensor wrap_node(std::shared_ptr<detail::TensorNode> n);
};

// Gradients of the traced leaves reachable from a loss, keyed by leaf
// identity.  Untraced inputs never appear.
class GradientMap {
 public:
  bool contains(const Tensor& leaf) const;
  const Tensor& at(const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }
  void insert(const Tensor& leaf, Tensor grad);

 private:
  std::unordered_map<const detail::TensorNode*, Tensor> grads_;
};

// Reverse-mode sweep from a scalar traced tensor.
GradientMap backward(const Tensor& loss);

// While a NoGradGuard is alive, operations do not record graph nodes.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Internal factory shared by the operation suite.
Tensor make_op_result(std::vector<std::size_t> shape, DType dtype, std::vector<double> values,
                      std::vector<Tensor> parents, detail::BackwardFn fn);
Tensor wrap_node(std::shared_ptr<detail::TensorNode> n);

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace tanger
