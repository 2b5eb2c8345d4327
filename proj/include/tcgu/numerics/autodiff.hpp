#pragma once

// Reverse-mode automatic differentiation over Tensor values.
//
// A Var is a handle to an immutable node holding a forward value. Nodes are
// recorded only when at least one input requires a gradient; constants cost
// nothing beyond their value. backward() walks the recorded DAG in reverse
// topological order, visiting every node once, and returns gradients for the
// leaf parameters reachable from the root.

#include <cstddef>
#include <functional>
#include <memory>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tcgu/numerics/tensor.hpp"

namespace tcgu::ad {

struct Node;
using NodePtr = std::shared_ptr<const Node>;

class GradSink;
class Gradients;

/// Receives the node being differentiated and its upstream gradient.
using BackwardFn = std::function<void(const Node& self, const Tensor& upstream, GradSink& sink)>;

enum class VisitOrder { kInputsForward, kInputsReversed };

struct BackwardOptions {
  /// Order in which a node's inputs are explored when building the
  /// topological order; results must not depend on it.
  VisitOrder order = VisitOrder::kInputsForward;
};

struct Node {
  Tensor value;
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<NodePtr> inputs;
  BackwardFn backward;
};

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  const NodePtr& node() const noexcept { return node_; }
  explicit operator bool() const noexcept { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

/// A value that never receives gradient.
Var constant(Tensor value);
/// A leaf whose gradient backward() reports.
Var parameter(Tensor value);

/// Records an op node. `inputs` decide requires_grad; when none require it the
/// backward closure is dropped and the result is a constant.
Var record(std::string_view op, Tensor value, std::vector<NodePtr> inputs, BackwardFn backward);

/// Accumulates gradients during a backward pass. Hands out zero-initialised
/// buffers per node so kernels can accumulate in place.
class GradSink {
 public:
  /// nullptr when the node does not require a gradient.
  Tensor* slot(const NodePtr& node);
  void add(const NodePtr& node, const Tensor& g);

 private:
  friend class Gradients;
  friend Gradients backward(const Var&, BackwardOptions);
  std::unordered_map<const Node*, Tensor> grads_;
};

class Gradients {
 public:
  /// Gradient of a leaf parameter; zero tensor if it was unreachable.
  Tensor of(const Var& leaf) const;
  bool contains(const Var& v) const { return grads_.count(v.node().get()) != 0; }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  friend Gradients backward(const Var&, BackwardOptions);
  std::unordered_map<const Node*, Tensor> grads_;
};

/// Requires a 1x1 root. Throws std::logic_error otherwise.
Gradients backward(const Var& root, BackwardOptions options = {});

}  // namespace tcgu::ad
