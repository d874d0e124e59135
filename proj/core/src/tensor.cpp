#include "tanger/tensor.hpp"

#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace tanger {

namespace {

thread_local bool g_grad_enabled = true;

void quantize_in_place(DType dtype, std::vector<double>& v) {
  if (dtype == DType::f32) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  }
}

}  // namespace

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor wrap_node(std::shared_ptr<detail::TensorNode> n) { return Tensor(std::move(n)); }

Tensor Tensor::zeros(std::vector<std::size_t> shape, DType dtype) {
  return full(std::move(shape), 0.0, dtype);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, DType dtype) {
  auto n = std::make_shared<detail::TensorNode>();
  n->dtype = dtype;
  n->values.assign(shape_size(shape), quantize(dtype, value));
  n->shape = std::move(shape);
  return wrap_node(std::move(n));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> values,
                         DType dtype) {
  if (shape_size(shape) != values.size()) {
    throw std::invalid_argument("Tensor::from_data: value count " +
                                std::to_string(values.size()) + " does not match shape " +
                                shape_to_string(shape));
  }
  auto n = std::make_shared<detail::TensorNode>();
  n->dtype = dtype;
  quantize_in_place(dtype, values);
  n->values = std::move(values);
  n->shape = std::move(shape);
  return wrap_node(std::move(n));
}

Tensor Tensor::scalar(double value, DType dtype) { return full({1}, value, dtype); }

const std::vector<std::size_t>& Tensor::shape() const {
  if (!node_) throw std::runtime_error("Tensor: use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const {
  if (!node_) throw std::runtime_error("Tensor: use of an undefined tensor");
  return node_->values.size();
}

DType Tensor::dtype() const {
  if (!node_) throw std::runtime_error("Tensor: use of an undefined tensor");
  return node_->dtype;
}

std::span<const double> Tensor::values() const {
  if (!node_) throw std::runtime_error("Tensor: use of an undefined tensor");
  return {node_->values.data(), node_->values.size()};
}

double Tensor::value_at(std::size_t flat_index) const {
  if (flat_index >= size()) {
    throw std::out_of_range("Tensor: flat index " + std::to_string(flat_index) +
                            " out of range for size " + std::to_string(size()));
  }
  return node_->values[flat_index];
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(size()) +
                                " elements, expected exactly 1");
  }
  return node_->values[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_) throw std::runtime_error("Tensor: use of an undefined tensor");
  if (node_->backward_fn) {
    throw std::invalid_argument(
        "Tensor::set_requires_grad: only leaf tensors can be marked as parameters");
  }
  node_->requires_grad = on;
  return *this;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::traced() const { return node_ && node_->traced(); }

std::span<double> Tensor::mutable_values() {
  if (!node_) throw std::runtime_error("Tensor: use of an undefined tensor");
  if (node_->backward_fn) {
    throw std::invalid_argument("Tensor::mutable_values: operation results are immutable");
  }
  return {node_->values.data(), node_->values.size()};
}

Tensor make_op_result(std::vector<std::size_t> shape, DType dtype, std::vector<double> values,
                      std::vector<Tensor> parents, detail::BackwardFn fn) {
  if (shape_size(shape) != values.size()) {
    throw std::logic_error("make_op_result: value count does not match shape");
  }
  auto n = std::make_shared<detail::TensorNode>();
  n->dtype = dtype;
  quantize_in_place(dtype, values);
  n->values = std::move(values);
  n->shape = std::move(shape);
  if (grad_enabled()) {
    bool any_traced = false;
    for (const Tensor& p : parents) {
      if (p.traced()) {
        any_traced = true;
        break;
      }
    }
    if (any_traced) {
      n->parents.reserve(parents.size());
      for (Tensor& p : parents) n->parents.push_back(p.node_ptr());
      n->backward_fn = std::move(fn);
    }
  }
  return wrap_node(std::move(n));
}

bool GradientMap::contains(const Tensor& leaf) const {
  return grads_.find(leaf.node()) != grads_.end();
}

const Tensor& GradientMap::at(const Tensor& leaf) const {
  auto it = grads_.find(leaf.node());
  if (it == grads_.end()) {
    throw std::out_of_range("GradientMap::at: tensor has no recorded gradient");
  }
  return it->second;
}

void GradientMap::insert(const Tensor& leaf, Tensor grad) {
  grads_.emplace(leaf.node(), std::move(grad));
}

GradientMap backward(const Tensor& loss) {
  if (!loss.defined() || !loss.traced()) {
    throw std::invalid_argument("backward: tensor is not part of a traced computation");
  }
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_to_string(loss.shape()));
  }

  using detail::TensorNode;

  // Post-order over the traced subgraph: parents appear before consumers.
  std::vector<std::shared_ptr<TensorNode>> topo;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    std::shared_ptr<TensorNode> node;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node_ptr(), 0});
  seen.insert(loss.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      const std::shared_ptr<TensorNode>& p = f.node->parents[f.next++];
      if (p->traced() && seen.insert(p.get()).second) {
        stack.push_back({p, 0});
      }
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  std::unordered_map<TensorNode*, std::vector<double>> grad_buf;
  grad_buf[loss.node()] = {1.0};

  // Reverse post-order: every consumer of a node is processed before the
  // node itself, so accumulation is complete when its turn comes.
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* n = it->get();
    if (!n->backward_fn) continue;
    auto gi = grad_buf.find(n);
    if (gi == grad_buf.end()) continue;
    std::vector<double*> parent_ptrs(n->parents.size(), nullptr);
    for (std::size_t i = 0; i < n->parents.size(); ++i) {
      TensorNode* p = n->parents[i].get();
      if (!p->traced()) continue;
      auto [slot, inserted] = grad_buf.try_emplace(p);
      if (inserted) slot->second.assign(p->size(), 0.0);
      parent_ptrs[i] = slot->second.data();
    }
    n->backward_fn(gi->second.data(), parent_ptrs);
  }

  GradientMap result;
  for (const auto& node : topo) {
    if (!node->requires_grad) continue;
    auto gi = grad_buf.find(node.get());
    std::vector<double> g =
        gi != grad_buf.end() ? std::move(gi->second) : std::vector<double>(node->size(), 0.0);
    result.insert(wrap_node(node), Tensor::from_data(node->shape, std::move(g), DType::f64));
  }
  return result;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }

NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

}  // namespace tanger
