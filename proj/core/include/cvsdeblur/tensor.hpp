#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cvsdeblur::nn {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// One vertex of the reverse-mode tape. Interior nodes keep the parent edges
// plus a closure that scatters this node's grad into the parents' grads.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::string name;  // set on named parameters only
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  std::function<void(TensorNode<T>&)> backward_fn;
};

// Value-semantics handle onto a shared graph node. Copies alias the node.
template <typename T>
class TensorT {
 public:
  using value_type = T;

  TensorT() = default;
  explicit TensorT(std::shared_ptr<TensorNode<T>> n) : node_(std::move(n)) {}

  static TensorT zeros(const Shape& shape);
  static TensorT full(const Shape& shape, T v);
  static TensorT from_vector(const Shape& shape, std::vector<T> data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t numel() const { return shape_numel(node_->shape); }

  std::vector<T>& value() { return node_->value; }
  const std::vector<T>& value() const { return node_->value; }
  std::vector<T>& grad();
  const std::vector<T>& grad() const;

  bool requires_grad() const { return node_->requires_grad; }
  // Leaf-only switch; flips grad storage on or off.
  TensorT& set_requires_grad(bool rg);
  void zero_grad();

  const std::string& name() const { return node_->name; }
  TensorT& set_name(std::string n) {
    node_->name = std::move(n);
    return *this;
  }

  std::shared_ptr<TensorNode<T>>& node() { return node_; }
  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Runs reverse-mode accumulation from a scalar root: seeds d(root)/d(root)=1
// and visits the tape in reverse topological order. Existing grad contents
// are accumulated into, so callers zero leaf grads between passes.
template <typename T>
void backward(const TensorT<T>& root);

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

namespace detail {
// Allocates an op output: value sized to shape, requires_grad inherited from
// parents. The backward closure is attached by the op after filling value.
template <typename T>
TensorT<T> make_op(const Shape& shape, std::vector<TensorT<T>> parents);
}  // namespace detail

}  // namespace cvsdeblur::nn
