// SPDX-License-Identifier: Apache-2.0
#include <synctva/errors.hpp>
#include <synctva/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace synctva {

namespace {
thread_local bool g_grad_enabled = true;
thread_local bool g_finite_check = true;
} // namespace

std::size_t shape_numel(const Shape &shape) {
  std::size_t n = 1;
  for (auto s : shape)
    n *= s;
  return n;
}

std::string shape_str(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("tensor shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  for (double v : values)
    if (!std::isfinite(v))
      throw NumericError("leaf", "non-finite value in tensor construction");
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows,
                      bool requires_grad) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto &row : rows) {
    if (row.size() != c)
      throw DimensionError("ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(v), requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    v[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(v));
}

const Shape &Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  const auto &s = shape();
  return s.size() >= 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto &s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() {
  if (!node_->leaf)
    throw Error("only leaf tensors may be modified in place");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1)
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->leaf; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty())
    return std::vector<double>(numel(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

const char *Tensor::op_name() const { return node_->op; }

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

Tensor Tensor::clone_leaf(bool requires_grad) const {
  return Tensor(shape(), node_->value, requires_grad);
}

void Tensor::backward() const {
  if (numel() != 1)
    throw DimensionError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  if (node_->released)
    throw Error("backward() already ran on this graph; rebuild the forward pass");
  if (!node_->requires_grad)
    return;

  // Iterative post-order DFS gives a topological order (inputs first). The
  // order owns its nodes: releasing a node's inputs below must not free
  // nodes that are still waiting for their turn.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node *> seen;
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(node_, 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto &[n, next] = stack.back();
    if (next < n->inputs.size()) {
      std::shared_ptr<detail::Node> child = n->inputs[next++];
      if (!child->requires_grad || seen.count(child.get()))
        continue;
      if (child->released)
        throw Error(std::string("graph through op '") + child->op +
                    "' was already consumed by an earlier backward()");
      seen.insert(child.get());
      stack.emplace_back(std::move(child), 0);
    } else {
      order.push_back(std::move(n));
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node *n = it->get();
    if (n->leaf)
      continue;
    if (n->backward_fn && !n->grad.empty())
      n->backward_fn(*n);
    n->backward_fn = nullptr;
    n->inputs.clear();
    n->grad.clear();
    n->grad.shrink_to_fit();
    n->released = true;
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }
void set_finite_check(bool enabled) { g_finite_check = enabled; }
bool finite_check_enabled() { return g_finite_check; }

namespace detail {

Tensor make_result(const char *op, Shape shape, std::vector<double> value,
                   std::initializer_list<const Tensor *> inputs, BackwardFn fn) {
  if (g_finite_check) {
    for (double v : value)
      if (!std::isfinite(v))
        throw NumericError(op, std::string("non-finite value produced by op '") + op + "'");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->leaf = false;
  bool needs = false;
  if (g_grad_enabled)
    for (const Tensor *t : inputs)
      needs = needs || t->requires_grad();
  node->requires_grad = needs;
  if (needs) {
    node->inputs.reserve(inputs.size());
    for (const Tensor *t : inputs)
      node->inputs.push_back(t->node());
    node->backward_fn = std::move(fn);
  }
  return Tensor(std::move(node));
}

} // namespace detail

} // namespace synctva
