#include "cvsdeblur/tensor.hpp"

#include <unordered_set>

#include "cvsdeblur/errors.hpp"

namespace cvsdeblur::nn {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace {
void check_shape(const Shape& shape) {
  for (int d : shape) {
    if (d <= 0) throw ValidationError("tensor shape must have positive extents, got " + shape_str(shape));
  }
}
}  // namespace

template <typename T>
TensorT<T> TensorT<T>::zeros(const Shape& shape) {
  check_shape(shape);
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = shape;
  n->value.assign(static_cast<size_t>(shape_numel(shape)), T(0));
  return TensorT<T>(std::move(n));
}

template <typename T>
TensorT<T> TensorT<T>::full(const Shape& shape, T v) {
  TensorT<T> t = zeros(shape);
  std::fill(t.value().begin(), t.value().end(), v);
  return t;
}

template <typename T>
TensorT<T> TensorT<T>::from_vector(const Shape& shape, std::vector<T> data) {
  check_shape(shape);
  if (static_cast<std::int64_t>(data.size()) != shape_numel(shape)) {
    throw ValidationError("from_vector: " + std::to_string(data.size()) + " values for shape " + shape_str(shape));
  }
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = shape;
  n->value = std::move(data);
  return TensorT<T>(std::move(n));
}

template <typename T>
std::vector<T>& TensorT<T>::grad() {
  if (!node_->requires_grad) throw ValidationError("grad(): tensor does not require grad");
  return node_->grad;
}

template <typename T>
const std::vector<T>& TensorT<T>::grad() const {
  if (!node_->requires_grad) throw ValidationError("grad(): tensor does not require grad");
  return node_->grad;
}

template <typename T>
TensorT<T>& TensorT<T>::set_requires_grad(bool rg) {
  if (!node_->parents.empty()) throw ValidationError("set_requires_grad: only valid on leaf tensors");
  node_->requires_grad = rg;
  if (rg) {
    node_->grad.assign(node_->value.size(), T(0));
  } else {
    node_->grad.clear();
  }
  return *this;
}

template <typename T>
void TensorT<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
void backward(const TensorT<T>& root) {
  if (!root.defined()) throw ValidationError("backward: undefined tensor");
  if (root.numel() != 1) throw ValidationError("backward: root must be scalar, shape is " + shape_str(root.shape()));
  if (!root.requires_grad()) throw ValidationError("backward: root does not depend on any grad-enabled leaf");

  // Iterative post-order DFS; recursion depth would scale with recurrence steps.
  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> visited;
  std::vector<std::pair<TensorNode<T>*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      TensorNode<T>* child = node->parents[next_child++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<T>* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

namespace detail {
template <typename T>
TensorT<T> make_op(const Shape& shape, std::vector<TensorT<T>> parents) {
  check_shape(shape);
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = shape;
  n->value.assign(static_cast<size_t>(shape_numel(shape)), T(0));
  bool rg = false;
  n->parents.reserve(parents.size());
  for (auto& p : parents) {
    if (!p.defined()) throw ValidationError("make_op: undefined parent tensor");
    rg = rg || p.requires_grad();
    n->parents.push_back(p.node());
  }
  n->requires_grad = rg;
  if (rg) n->grad.assign(n->value.size(), T(0));
  return TensorT<T>(std::move(n));
}

template TensorT<float> make_op<float>(const Shape&, std::vector<TensorT<float>>);
template TensorT<double> make_op<double>(const Shape&, std::vector<TensorT<double>>);
}  // namespace detail

template class TensorT<float>;
template class TensorT<double>;
template void backward<float>(const TensorT<float>&);
template void backward<double>(const TensorT<double>&);

}  // namespace cvsdeblur::nn
