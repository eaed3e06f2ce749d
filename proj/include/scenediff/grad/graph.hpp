#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenediff/grad/dense_array.hpp"

namespace scenediff::grad {

class ParamStore;

using NodeId = std::size_t;

enum class OpKind {
  Input,
  Param,
  Constant,
  Add,
  Sub,
  Mul,
  MatMul,
  Concat,
  Slice,
  Transpose,
  Broadcast,
  Reshape,
  Sum,
  Mean,
  Softmax,
  Gelu,
  LayerNorm,
  Repeat,
  Scale,
};

const char* op_name(OpKind op);

struct Node {
  OpKind op = OpKind::Input;
  std::vector<NodeId> inputs;
  Shape shape;
  std::string name;         // leaf name for Input/Param
  std::ptrdiff_t axis = -1;  // Concat/Slice/Sum/Mean/Repeat; -1 on Sum/Mean = all
  std::size_t begin = 0;    // Slice
  std::size_t end = 0;      // Slice; Repeat count
  double scalar = 0.0;      // Scale factor, LayerNorm epsilon
  std::size_t constant = 0;  // index into the constant pool
};

/// Static computation graph. Nodes are appended in topological order, so a
/// node id is always larger than the ids of its inputs. Shapes are checked at
/// construction; a bad combination throws ShapeError naming the new node.
class Graph {
 public:
  NodeId input(std::string name, Shape shape);
  NodeId param(std::string name, Shape shape);
  /// Declares a parameter leaf with the shape it has in `store`. Repeated
  /// declarations of one name return the same node.
  NodeId param(const ParamStore& store, const std::string& name);
  NodeId constant(DenseArray value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  /// [..., m, k] x [k, n] -> [..., m, n], or [b, m, k] x [b, k, n] -> [b, m, n].
  NodeId matmul(NodeId a, NodeId b);
  NodeId concat(const std::vector<NodeId>& parts, std::size_t axis);
  NodeId slice(NodeId x, std::size_t axis, std::size_t begin, std::size_t end);
  /// Swaps the last two axes.
  NodeId transpose(NodeId x);
  /// Right-aligned broadcast: every source extent must equal the target or be 1.
  NodeId broadcast(NodeId x, Shape shape);
  NodeId reshape(NodeId x, Shape shape);
  NodeId sum(NodeId x, std::optional<std::size_t> axis = std::nullopt);
  NodeId mean(NodeId x, std::optional<std::size_t> axis = std::nullopt);
  /// Softmax over the last axis.
  NodeId softmax(NodeId x);
  /// Exact GELU, x * Phi(x).
  NodeId gelu(NodeId x);
  /// Normalizes over the last axis without affine parameters.
  NodeId layer_norm(NodeId x, double epsilon = 1e-5);
  /// Inserts a new axis of extent `count` at position `axis`.
  NodeId repeat(NodeId x, std::size_t axis, std::size_t count);
  NodeId scale(NodeId x, double factor);

  void mark_output(const std::string& name, NodeId id);

  const Node& node(NodeId id) const { return nodes_.at(id); }
  const Shape& shape(NodeId id) const { return nodes_.at(id).shape; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<NodeId>& param_nodes() const { return params_; }
  const std::vector<NodeId>& input_nodes() const { return inputs_; }
  const std::map<std::string, NodeId>& outputs() const { return outputs_; }
  const DenseArray& constant_value(const Node& n) const { return constants_.at(n.constant); }

  std::string describe(NodeId id) const;

 private:
  NodeId push(Node node);
  void check_id(NodeId id, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<DenseArray> constants_;
  std::vector<NodeId> params_;
  std::vector<NodeId> inputs_;
  std::map<std::string, NodeId> outputs_;
};

using Bindings = std::map<std::string, DenseArray>;
using GradientMap = std::map<std::string, DenseArray>;

/// All node values from one forward pass.
struct Trace {
  std::vector<DenseArray> values;
  const DenseArray& operator[](NodeId id) const { return values.at(id); }
};

/// Runs the forward pass. Throws ShapeError when a bound input or parameter
/// disagrees with its declared shape and NumericError when a node produces a
/// non-finite value.
Trace forward(const Graph& graph, const Bindings& inputs, const ParamStore& params);

/// Forward pass returning only the marked outputs.
std::map<std::string, DenseArray> evaluate(const Graph& graph, const Bindings& inputs,
                                           const ParamStore& params);

/// Reverse-mode accumulation from a scalar loss node. Returns dLoss/dParam for
/// every parameter leaf in the graph (zeros when the loss does not depend on it).
GradientMap backward(const Graph& graph, const Trace& trace, NodeId loss);

GradientMap gradients(const Graph& graph, NodeId loss, const Bindings& inputs,
                      const ParamStore& params);

}  // namespace scenediff::grad
