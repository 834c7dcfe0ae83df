// SPDX-License-Identifier: Apache-2.0
/**
 * @file   tensor.hpp
 * @brief  Dense row-major float64 tensor with a dynamic reverse-mode tape.
 *
 * A Tensor is a cheap handle onto a shared node. Ops record their inputs and
 * a backward closure on the result node whenever any input requires a
 * gradient and gradient recording is enabled. `backward()` on a scalar walks
 * the recorded graph once in reverse topological order, accumulates into
 * every leaf that requires a gradient, and releases the tape.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace synctva {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape &shape);
std::string shape_str(const Shape &shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad; // empty until a gradient arrives
  bool requires_grad = false;
  bool leaf = true;
  bool released = false;
  const char *op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node &)> backward_fn;

  /// Gradient buffer of this node, allocated on first use. nullptr when the
  /// node does not participate in differentiation.
  double *grad_buffer() {
    if (!requires_grad)
      return nullptr;
    if (grad.empty())
      grad.assign(value.size(), 0.0);
    return grad.data();
  }
};

} // namespace detail

class Tensor {
public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape &shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t numel() const;
  /// Row count of a 2-D tensor (1 for a 1-D tensor).
  std::size_t rows() const;
  /// Column count of a 2-D tensor (length of a 1-D tensor).
  std::size_t cols() const;

  std::span<const double> values() const;
  /// Writable storage. Only leaves may be mutated in place.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  /// Accumulated gradient; zeros when none has arrived yet.
  std::vector<double> grad() const;
  void zero_grad();

  /// Reverse-mode pass from this scalar. Throws if the graph was already
  /// consumed by an earlier call.
  void backward() const;

  /// Same values, no history, no gradient.
  Tensor detach() const;
  /// Deep copy that is a fresh leaf with the given gradient flag.
  Tensor clone_leaf(bool requires_grad) const;

  const char *op_name() const;
  const std::shared_ptr<detail::Node> &node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

bool grad_enabled();

/// Non-finite detection after every op; on by default. When it fires the
/// op throws NumericError carrying the op name.
void set_finite_check(bool enabled);
bool finite_check_enabled();

namespace detail {
using BackwardFn = std::function<void(Node &)>;

/// Wraps a freshly computed value as an op result, recording `inputs` and
/// `fn` on the tape when a gradient is required.
Tensor make_result(const char *op, Shape shape, std::vector<double> value,
                   std::initializer_list<const Tensor *> inputs, BackwardFn fn);
} // namespace detail

} // namespace synctva
