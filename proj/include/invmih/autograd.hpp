#pragma once

// Minimal reverse-mode differentiation over rank-4 tensors. A graph is
// recorded only when at least one input requires a gradient, so inference
// with frozen parameters builds nothing.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "invmih/tensor.hpp"

namespace invmih {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until something flows in
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Tensor<T>& g);
  void accumulate(Tensor<T>&& g);
  // Zero-filled gradient buffer for scatter-style accumulation.
  Tensor<T>& grad_buffer();
};

template <typename T>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<T>>;

  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  // Only meaningful on leaves (parameters); used by optimizers and tests.
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const Tensor<T>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad = Tensor<T>(); }

  // Seeds d(self)/d(self) = 1 and propagates. Requires a single-element value.
  void backward() const;

  // Same value, cut from the graph.
  Var detach() const { return Var(node_->value, false); }

  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

namespace ad {

template <typename T>
using BackwardFn = std::function<void(Node<T>&)>;

// Wraps a computed value; records `parents` and `fn` only if any parent needs a gradient.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<typename Var<T>::NodePtr> parents, BackwardFn<T> fn);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T factor);
template <typename T>
Var<T> exp(const Var<T>& a);
template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope);

// c * (2 * sigmoid(u) - 1), bounded in (-c, c).
template <typename T>
Var<T> clamp_scale(const Var<T>& u, T clamp_constant);

// Stride 1, zero padding k/2. weight is (out, in, k, k); bias is (1, out, 1, 1) or empty.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

template <typename T>
Var<T> concat_channels(std::span<const Var<T>> parts);
template <typename T>
Var<T> slice_channels(const Var<T>& x, int64_t start, int64_t count);
template <typename T>
Var<T> concat_batch(std::span<const Var<T>> parts);
template <typename T>
Var<T> slice_batch(const Var<T>& x, int64_t start, int64_t count);

// round(clip(x, 0, 1) * 255) / 255 forward; backward passes the gradient
// through the rounding and zeroes it where clipping is active.
template <typename T>
Var<T> quantize_ste(const Var<T>& x);

// Scalar (1,1,1,1) reductions.
template <typename T>
Var<T> mean_abs_error(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mean_squared_error(const Var<T>& a, const Var<T>& b);

// Applies a linear map whose adjoint is supplied; used by the fixed transforms.
template <typename T>
Var<T> linear_map(const Var<T>& x, const std::function<Tensor<T>(const Tensor<T>&)>& forward,
                  std::function<Tensor<T>(const Tensor<T>&)> adjoint);

}  // namespace ad

}  // namespace invmih
