#pragma once

#include <cstddef>
#include <deque>
#include <initializer_list>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mhmarl/tensor.hpp"

namespace mhmarl {

enum class OpKind {
  constant,
  parameter,
  matmul,
  affine,
  add,
  sub,
  mul,
  scalar_mul,
  relu,
  tanh,
  concat,
  slice,
  square,
  sum,
  mean,
  abs,
  l2_norm,
  stop_gradient,
};

std::string_view op_name(OpKind kind);

// Deliberately wrong derivative rules, used only to prove that the
// finite-difference checker notices a broken backward pass.
enum class PlantedFault { none, tanh_derivative };

// Handle to a node of a Graph. Only meaningful together with the graph that
// issued it.
struct Var {
  std::size_t id = 0;
};

class Graph;

// Result of Graph::backward. Nodes that the root does not depend on (or that
// are blocked by stop_gradient / constants) report a zero gradient of the
// node's shape.
class GradientMap {
 public:
  const Tensor& operator[](Var v) const;

  // Gradient for each parameter, aligned with `params`. Parameters that never
  // entered the graph as trainable leaves get zeros.
  std::vector<Tensor> for_parameters(std::span<Parameter* const> params) const&;
  // Same, but moves gradients out of a temporary map instead of copying.
  std::vector<Tensor> for_parameters(std::span<Parameter* const> params) &&;

 private:
  friend class Graph;
  GradientMap(const Graph* graph, std::vector<Tensor> grads, std::vector<char> reached)
      : graph_(graph), grads_(std::move(grads)), reached_(std::move(reached)) {}

  const Graph* graph_;
  std::vector<Tensor> grads_;
  std::vector<char> reached_;
  mutable std::deque<Tensor> zeros_;
};

// Define-by-run computation graph. Nodes are appended in evaluation order, so
// every input precedes its consumers and the node list is a topological order.
//
// Forward ops throw std::invalid_argument on shape mismatches and
// std::domain_error on non-finite values.
class Graph {
 public:
  explicit Graph(PlantedFault fault = PlantedFault::none) : fault_(fault) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Var constant(Tensor value);
  // Inserts a parameter leaf. A frozen parameter behaves like a constant: its
  // value participates in the forward pass but no gradient reaches it.
  // Repeated insertion of the same parameter returns the same node. The node
  // refers to param.value without copying it, so the parameter must stay
  // alive and unchanged while the graph is in use.
  Var parameter(const Parameter& param, bool trainable = true);

  Var matmul(Var a, Var b);
  // x W + b with the bias row broadcast over rows; one node per dense layer.
  Var affine(Var x, Var w, Var b);
  // add/sub/mul accept equal shapes, or a 1-D `b` whose length equals the
  // last axis of `a` (broadcast across rows).
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var relu(Var a);
  Var tanh(Var a);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }
  // Columns [begin, end) of the last axis.
  Var slice(Var a, std::size_t begin, std::size_t end);
  Var square(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var abs(Var a);
  // Euclidean norm over the last axis; the last axis collapses to length 1.
  Var l2_norm(Var a);
  Var stop_gradient(Var a);

  // References stay valid for the lifetime of the graph.
  const Tensor& value(Var v) const { return nodes_.at(v.id).val(); }
  const Shape& shape(Var v) const { return nodes_.at(v.id).val().shape(); }
  OpKind kind(Var v) const { return nodes_.at(v.id).kind; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  GradientMap backward(Var root) const;

  // Sign of every ReLU input in node order. Two evaluations with equal
  // patterns lie on the same linear piece of the network.
  std::vector<bool> relu_pattern() const;

 private:
  friend class GradientMap;

  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    double factor = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    bool row_broadcast = false;
    const Tensor* ref = nullptr;  // parameter leaves point at the owner's tensor

    const Tensor& val() const { return ref != nullptr ? *ref : value; }
  };

  Var push(Node node);
  const Node& node(Var v) const { return nodes_.at(v.id); }
  bool broadcast_mode(Var a, Var b, OpKind kind) const;
  void propagate(const Node& n, const Tensor& g, std::vector<Tensor>& grads,
                 std::vector<char>& reached) const;

  PlantedFault fault_;
  std::deque<Node> nodes_;  // stable addresses: value() references stay valid
  std::unordered_map<const Parameter*, std::size_t> trainable_;
  std::unordered_map<const Parameter*, std::size_t> frozen_;
};

}  // namespace mhmarl
