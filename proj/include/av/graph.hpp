#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "av/tensor.hpp"

namespace av {

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid while the graph lives.
class Var {
public:
  Var() : g_(nullptr), id_(-1) {}
  Var(Graph* g, int id) : g_(g), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  const std::vector<size_t>& shape() const { return value().shape(); }
  bool valid() const { return g_ != nullptr; }
  int id() const { return id_; }
  Graph* graph() const { return g_; }

private:
  Graph* g_;
  int id_;
};

// Reverse-mode tape over dense tensors. Ops evaluate eagerly at creation and
// record a backward closure; creation order is a topological order, so
// backward() is a single reverse sweep that visits each node exactly once.
// A graph is confined to one thread; independent graphs run in parallel.
class Graph {
public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf that participates in gradients.
  Var input(Tensor v);
  // Leaf excluded from gradient propagation (frozen weights, transform masks).
  Var constant(Tensor v);

  // Accumulates gradients into every grad-enabled node reachable from root.
  // root must be scalar.
  void backward(const Var& root);

  size_t size() const { return nodes_.size(); }

  // Smallest distance to a relu/maxpool nondifferentiability seen while
  // building this graph. Finite-difference checks reject points too close
  // to a kink, where the comparison is meaningless.
  double kink_margin() const { return kink_margin_; }

  struct Node {
    Tensor value;
    Tensor grad;  // allocated by backward() when needed
    std::vector<int> parents;
    std::function<void(Graph&, int)> back;  // nullptr for leaves
    bool needs_grad = false;
  };

  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }

  // Internal: used by op builders.
  Var emplace(Tensor value, std::vector<int> parents, bool needs_grad,
              std::function<void(Graph&, int)> back);
  void note_kink(double margin);

private:
  // deque: node references stay valid while the graph grows, so builders may
  // hold value() references across op creation
  std::deque<Node> nodes_;
  double kink_margin_ = 1e300;
};

// ---- primitive ops ---------------------------------------------------------
// Every op validates shapes and reports the op name plus the offending
// dimensions on mismatch.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var relu(Var x);
// y = W x + b with W (out, in), x (in), b (out).
Var linear(Var x, Var w, Var b);
// x (C, H, W), w (OC, IC, KH, KW), b (OC); zero padding.
Var conv2d(Var x, Var w, Var b, size_t stride, size_t pad_h, size_t pad_w);
// 2x2 window, stride 2, floor on odd extents. Ties go to the first element
// in scan order.
Var maxpool2(Var x);
Var reshape(Var x, std::vector<size_t> shape);
// Subtensor at index i of the leading axis.
Var select0(Var x, size_t i);
// New leading axis from equal-shaped parts.
Var stack0(const std::vector<Var>& parts);
// 1-D concatenation.
Var concat(Var a, Var b);
Var sum_all(Var x);
Var mean_all(Var x);
// Mean over one axis, removing it.
Var mean_axis(Var x, size_t axis);
// Population variance over one axis, removing it.
Var var_axis(Var x, size_t axis);
// 1-D, numerically stable.
Var softmax(Var z);
// -log p[label] for a probability vector p.
Var cross_entropy(Var p, size_t label);
// Flattened cosine similarity with a 1e-12 floor on each norm.
Var cosine_similarity(Var a, Var b);
// x * mask * keep_scale; mask is a constant 0/1 tensor node.
Var dropout_mask_apply(Var x, Var mask, double keep_scale);

}  // namespace av
