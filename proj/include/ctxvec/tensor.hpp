#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "ctxvec/errors.hpp"

namespace ctxvec {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

template <typename T>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  if constexpr (std::is_same_v<T, float>) return "f32";
  return "f64";
}

namespace detail {

// When positive, operations do not record backward closures. Used for
// inference passes so evaluation never builds graphs.
inline thread_local int no_grad_depth = 0;

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated lazily on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backprop;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

}  // namespace detail

// Suppresses gradient recording for the lifetime of the guard.
struct NoGradGuard {
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

// Dense row-major tensor handle with an optional gradient slot. Copies are
// shallow: they alias the same storage and graph node.
template <typename T>
class Tensor {
 public:
  using Node = detail::TensorNode<T>;

  Tensor() : node_(std::make_shared<Node>()) { node_->shape = {0}; }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->data.assign(shape_numel(t.node_->shape), T(0));
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (shape_numel(shape) != values.size())
      throw DimError("tensor init: shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->data = std::move(values);
    t.node_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T v) { return from({1}, {v}); }

  static Tensor row(std::vector<T> values, bool requires_grad = false) {
    const std::size_t n = values.size();
    return from({1, n}, std::move(values), requires_grad);
  }

  template <typename Rng>
  static Tensor randn(Shape shape, Rng& rng, T stddev, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : t.data()) v = static_cast<T>(dist(rng)) * stddev;
    return t;
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t rank() const { return node_->shape.size(); }

  std::size_t rows() const {
    if (rank() != 2) throw DimError("rows(): tensor is not 2-D, shape " + shape_str(shape()));
    return node_->shape[0];
  }
  std::size_t cols() const {
    if (rank() != 2) throw DimError("cols(): tensor is not 2-D, shape " + shape_str(shape()));
    return node_->shape[1];
  }

  std::vector<T>& data() { return node_->data; }
  const std::vector<T>& data() const { return node_->data; }

  T at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
  T& mut(std::size_t r, std::size_t c) { return node_->data[r * cols() + c]; }

  T item() const {
    if (numel() != 1)
      throw ContractError("item(): tensor is not scalar, shape " + shape_str(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<T>& grad() const { return node_->grad; }
  std::vector<T>& grad_mut() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  bool all_finite() const {
    for (T v : node_->data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Detached copy of the values (no graph edge, no grad).
  Tensor clone_values() const { return from(shape(), data()); }

  std::shared_ptr<Node> node() const { return node_; }
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

// Output node factory: attaches parents and a backward closure only when the
// result participates in a recorded graph.
template <typename T>
Tensor<T> make_op_result(Shape shape, std::vector<T> values,
                         std::vector<Tensor<T>> parents,
                         std::function<void(TensorNode<T>&)> backprop) {
  bool needs = false;
  if (grad_enabled())
    for (const auto& p : parents) needs = needs || p.requires_grad();
  Tensor<T> out = Tensor<T>::from(std::move(shape), std::move(values));
  if (needs) {
    out.set_requires_grad(true);
    auto node = out.node();
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backprop = std::move(backprop);
  }
  return out;
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Visits each recorded node exactly
// once in reverse topological order; repeated calls without zeroing grads
// accumulate additively.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1)
    throw ContractError("backward(): loss must be scalar, shape " + shape_str(loss.shape()));
  using Node = detail::TensorNode<T>;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS over parent edges; list ends at the loss node.
  struct Frame {
    Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  Node* root = loss.node().get();
  if (seen.insert(root).second) stack.push_back({root, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Interior nodes carry per-sweep gradients; only leaves (no backprop
  // closure) accumulate across calls.
  for (Node* n : order) {
    if (!n->backprop) continue;
    n->ensure_grad();
    std::fill(n->grad.begin(), n->grad.end(), T(0));
  }
  root->ensure_grad();
  root->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) {
      n->ensure_grad();
      n->backprop(*n);
    }
  }
}

}  // namespace ctxvec
