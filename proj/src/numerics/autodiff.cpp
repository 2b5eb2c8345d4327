#include "tcgu/numerics/autodiff.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace tcgu::ad {

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "constant";
  return Var(std::move(n));
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->op = "parameter";
  return Var(std::move(n));
}

Var record(std::string_view op, Tensor value, std::vector<NodePtr> inputs, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite output from op '") + std::string(op) + "'");
  }
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  n->requires_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

Tensor* GradSink::slot(const NodePtr& node) {
  if (!node->requires_grad) return nullptr;
  auto it = grads_.find(node.get());
  if (it == grads_.end()) {
    it = grads_.emplace(node.get(), Tensor(node->value.rows(), node->value.cols())).first;
  }
  return &it->second;
}

void GradSink::add(const NodePtr& node, const Tensor& g) {
  Tensor* s = slot(node);
  if (!s) return;
  if (!s->same_shape(g)) {
    throw DimensionError("gradient shape " + shape_string(g) + " does not match value " +
                         shape_string(node->value) + " for op '" + std::string(node->op) + "'");
  }
  auto dst = s->data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor Gradients::of(const Var& leaf) const {
  auto it = grads_.find(leaf.node().get());
  if (it == grads_.end()) return Tensor(leaf.rows(), leaf.cols());
  return it->second;
}

Gradients backward(const Var& root, BackwardOptions options) {
  if (!root) throw std::logic_error("backward on empty Var");
  if (!root.value().is_scalar()) {
    throw std::logic_error("backward requires a scalar root, got " + shape_string(root.value()));
  }
  Gradients result;
  if (!root.requires_grad()) return result;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<const Node*> topo;
  std::unordered_set<const Node*> seen;
  struct Frame {
    const Node* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    const auto& ins = f.node->inputs;
    if (f.next < ins.size()) {
      const std::size_t idx =
          options.order == VisitOrder::kInputsForward ? f.next : ins.size() - 1 - f.next;
      ++f.next;
      const Node* child = ins[idx].get();
      if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
      continue;
    }
    topo.push_back(f.node);
    stack.pop_back();
  }

  GradSink sink;
  sink.grads_.emplace(root.node().get(), Tensor::scalar(1.0));
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const Node* n = *it;
    auto g = sink.grads_.find(n);
    if (g == sink.grads_.end()) continue;
    if (n->inputs.empty()) {
      result.grads_.emplace(n, std::move(g->second));
      sink.grads_.erase(g);
      continue;
    }
    const Tensor upstream = std::move(g->second);
    sink.grads_.erase(g);
    n->backward(*n, upstream, sink);
  }
  return result;
}

}  // namespace tcgu::ad
