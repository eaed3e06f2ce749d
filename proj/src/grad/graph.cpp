#include "scenediff/grad/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "scenediff/grad/param_store.hpp"

namespace scenediff::grad {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Input: return "input";
    case OpKind::Param: return "param";
    case OpKind::Constant: return "constant";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::MatMul: return "matmul";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Transpose: return "transpose";
    case OpKind::Broadcast: return "broadcast";
    case OpKind::Reshape: return "reshape";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::Softmax: return "softmax";
    case OpKind::Gelu: return "gelu";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::Repeat: return "repeat";
    case OpKind::Scale: return "scale";
  }
  return "?";
}

namespace {

std::size_t prod(const Shape& s, std::size_t from, std::size_t to) {
  std::size_t p = 1;
  for (std::size_t i = from; i < to; ++i) p *= s[i];
  return p;
}

ShapeError shape_error(std::size_t id, OpKind op, const std::string& what) {
  return ShapeError("node " + std::to_string(id) + " (" + op_name(op) + "): " + what);
}

// Source strides of `from` right-aligned against `to`; zero where broadcasting.
std::vector<std::size_t> broadcast_strides(const Shape& from, const Shape& to) {
  std::vector<std::size_t> strides(to.size(), 0);
  const std::size_t offset = to.size() - from.size();
  std::size_t stride = 1;
  for (std::size_t i = from.size(); i-- > 0;) {
    strides[i + offset] = from[i] == 1 ? 0 : stride;
    stride *= from[i];
  }
  return strides;
}

// Visits every element of `shape` in row-major order, passing the flat output
// index and the matching offset under `strides`.
template <typename F>
void walk(const Shape& shape, const std::vector<std::size_t>& strides, F&& f) {
  const std::size_t total = element_count(shape);
  if (shape.empty()) {
    f(std::size_t{0}, std::size_t{0});
    return;
  }
  const std::size_t rank = shape.size();
  const std::size_t last = shape[rank - 1];
  const std::size_t last_stride = strides[rank - 1];
  std::vector<std::size_t> index(rank, 0);
  std::size_t base = 0;
  for (std::size_t out = 0; out < total; out += last) {
    for (std::size_t j = 0; j < last; ++j) f(out + j, base + j * last_stride);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++index[d];
      base += strides[d];
      if (index[d] < shape[d]) break;
      base -= strides[d] * shape[d];
      index[d] = 0;
    }
  }
}

Node make_node(OpKind op, std::vector<NodeId> inputs, Shape shape) {
  Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.shape = std::move(shape);
  return n;
}

double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

void Graph::check_id(NodeId id, const char* op) const {
  if (id >= nodes_.size()) {
    throw ShapeError(std::string(op) + ": unknown input node " + std::to_string(id));
  }
}

std::string Graph::describe(NodeId id) const {
  const Node& n = nodes_.at(id);
  std::string out = "node " + std::to_string(id) + " (" + op_name(n.op);
  if (!n.name.empty()) out += " '" + n.name + "'";
  return out + " " + to_string(n.shape) + ")";
}

NodeId Graph::input(std::string name, Shape shape) {
  Node n = make_node(OpKind::Input, {}, std::move(shape));
  n.name = std::move(name);
  const NodeId id = push(std::move(n));
  inputs_.push_back(id);
  return id;
}

NodeId Graph::param(std::string name, Shape shape) {
  for (NodeId id : params_) {
    if (nodes_[id].name == name) {
      if (nodes_[id].shape != shape) {
        throw shape_error(nodes_.size(), OpKind::Param,
                          "parameter '" + name + "' redeclared with a different shape");
      }
      return id;
    }
  }
  Node n = make_node(OpKind::Param, {}, std::move(shape));
  n.name = std::move(name);
  const NodeId id = push(std::move(n));
  params_.push_back(id);
  return id;
}

NodeId Graph::param(const ParamStore& store, const std::string& name) {
  return param(name, store.get(name).shape());
}

NodeId Graph::constant(DenseArray value) {
  Node n = make_node(OpKind::Constant, {}, value.shape());
  n.constant = constants_.size();
  constants_.push_back(std::move(value));
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  check_id(a, "add");
  check_id(b, "add");
  if (shape(a) != shape(b)) {
    throw shape_error(nodes_.size(), OpKind::Add, to_string(shape(a)) + " vs " + to_string(shape(b)));
  }
  return push(make_node(OpKind::Add, {a, b}, shape(a)));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  check_id(a, "sub");
  check_id(b, "sub");
  if (shape(a) != shape(b)) {
    throw shape_error(nodes_.size(), OpKind::Sub, to_string(shape(a)) + " vs " + to_string(shape(b)));
  }
  return push(make_node(OpKind::Sub, {a, b}, shape(a)));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  check_id(a, "mul");
  check_id(b, "mul");
  if (shape(a) != shape(b)) {
    throw shape_error(nodes_.size(), OpKind::Mul, to_string(shape(a)) + " vs " + to_string(shape(b)));
  }
  return push(make_node(OpKind::Mul, {a, b}, shape(a)));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  check_id(a, "matmul");
  check_id(b, "matmul");
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  const std::size_t id = nodes_.size();
  if (sa.size() < 2) throw shape_error(id, OpKind::MatMul, "left operand needs rank >= 2");
  Shape out = sa;
  if (sb.size() == 2) {
    if (sa.back() != sb[0]) {
      throw shape_error(id, OpKind::MatMul, to_string(sa) + " x " + to_string(sb));
    }
    out.back() = sb[1];
  } else if (sb.size() == 3 && sa.size() == 3) {
    if (sa[0] != sb[0] || sa[2] != sb[1]) {
      throw shape_error(id, OpKind::MatMul, to_string(sa) + " x " + to_string(sb));
    }
    out[2] = sb[2];
  } else {
    throw shape_error(id, OpKind::MatMul, "unsupported ranks " + to_string(sa) + " x " + to_string(sb));
  }
  return push(make_node(OpKind::MatMul, {a, b}, std::move(out)));
}

NodeId Graph::concat(const std::vector<NodeId>& parts, std::size_t axis) {
  const std::size_t id = nodes_.size();
  if (parts.empty()) throw shape_error(id, OpKind::Concat, "no inputs");
  for (NodeId p : parts) check_id(p, "concat");
  Shape out = shape(parts[0]);
  if (axis >= out.size()) throw shape_error(id, OpKind::Concat, "axis out of range");
  out[axis] = 0;
  for (NodeId p : parts) {
    const Shape& s = shape(p);
    if (s.size() != out.size()) throw shape_error(id, OpKind::Concat, "rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != out[d]) {
        throw shape_error(id, OpKind::Concat, to_string(s) + " incompatible on axis " + std::to_string(d));
      }
    }
    out[axis] += s[axis];
  }
  Node n = make_node(OpKind::Concat, parts, std::move(out));
  n.axis = static_cast<std::ptrdiff_t>(axis);
  return push(std::move(n));
}

NodeId Graph::slice(NodeId x, std::size_t axis, std::size_t begin, std::size_t end) {
  check_id(x, "slice");
  Shape out = shape(x);
  if (axis >= out.size() || begin >= end || end > out[axis]) {
    throw shape_error(nodes_.size(), OpKind::Slice,
                      "range [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                          std::to_string(axis) + " of " + to_string(out));
  }
  out[axis] = end - begin;
  Node n = make_node(OpKind::Slice, {x}, std::move(out));
  n.axis = static_cast<std::ptrdiff_t>(axis);
  n.begin = begin;
  n.end = end;
  return push(std::move(n));
}

NodeId Graph::transpose(NodeId x) {
  check_id(x, "transpose");
  Shape out = shape(x);
  if (out.size() < 2) throw shape_error(nodes_.size(), OpKind::Transpose, "needs rank >= 2");
  std::swap(out[out.size() - 1], out[out.size() - 2]);
  return push(make_node(OpKind::Transpose, {x}, std::move(out)));
}

NodeId Graph::broadcast(NodeId x, Shape target) {
  check_id(x, "broadcast");
  const Shape& s = shape(x);
  const std::size_t id = nodes_.size();
  if (s.size() > target.size()) throw shape_error(id, OpKind::Broadcast, "cannot reduce rank");
  const std::size_t offset = target.size() - s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != 1 && s[i] != target[i + offset]) {
      throw shape_error(id, OpKind::Broadcast, to_string(s) + " -> " + to_string(target));
    }
  }
  return push(make_node(OpKind::Broadcast, {x}, std::move(target)));
}

NodeId Graph::reshape(NodeId x, Shape target) {
  check_id(x, "reshape");
  if (element_count(target) != element_count(shape(x))) {
    throw shape_error(nodes_.size(), OpKind::Reshape, to_string(shape(x)) + " -> " + to_string(target));
  }
  return push(make_node(OpKind::Reshape, {x}, std::move(target)));
}

NodeId Graph::sum(NodeId x, std::optional<std::size_t> axis) {
  check_id(x, "sum");
  Shape out;
  if (axis) {
    out = shape(x);
    if (*axis >= out.size()) throw shape_error(nodes_.size(), OpKind::Sum, "axis out of range");
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(*axis));
  }
  Node n = make_node(OpKind::Sum, {x}, std::move(out));
  n.axis = axis ? static_cast<std::ptrdiff_t>(*axis) : -1;
  return push(std::move(n));
}

NodeId Graph::mean(NodeId x, std::optional<std::size_t> axis) {
  const NodeId s = sum(x, axis);
  nodes_[s].op = OpKind::Mean;
  return s;
}

NodeId Graph::softmax(NodeId x) {
  check_id(x, "softmax");
  if (shape(x).empty()) throw shape_error(nodes_.size(), OpKind::Softmax, "needs rank >= 1");
  return push(make_node(OpKind::Softmax, {x}, shape(x)));
}

NodeId Graph::gelu(NodeId x) {
  check_id(x, "gelu");
  return push(make_node(OpKind::Gelu, {x}, shape(x)));
}

NodeId Graph::layer_norm(NodeId x, double epsilon) {
  check_id(x, "layer_norm");
  if (shape(x).empty()) throw shape_error(nodes_.size(), OpKind::LayerNorm, "needs rank >= 1");
  Node n = make_node(OpKind::LayerNorm, {x}, shape(x));
  n.scalar = epsilon;
  return push(std::move(n));
}

NodeId Graph::repeat(NodeId x, std::size_t axis, std::size_t count) {
  check_id(x, "repeat");
  Shape out = shape(x);
  if (axis > out.size() || count == 0) {
    throw shape_error(nodes_.size(), OpKind::Repeat, "bad axis or zero count");
  }
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(axis), count);
  Node n = make_node(OpKind::Repeat, {x}, std::move(out));
  n.axis = static_cast<std::ptrdiff_t>(axis);
  n.end = count;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId x, double factor) {
  check_id(x, "scale");
  Node n = make_node(OpKind::Scale, {x}, shape(x));
  n.scalar = factor;
  return push(std::move(n));
}

void Graph::mark_output(const std::string& name, NodeId id) {
  check_id(id, "mark_output");
  outputs_[name] = id;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

void matmul_forward(const DenseArray& a, const DenseArray& b, DenseArray& c) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const std::size_t k = sa.back();
  const std::size_t n = sb.back();
  const std::size_t batches = sb.size() == 3 ? sb[0] : 1;
  const std::size_t m = sb.size() == 3 ? sa[1] : a.size() / k;
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  double* pc = c.values().data();
  std::fill(pc, pc + c.size(), 0.0);
  for (std::size_t batch = 0; batch < batches; ++batch) {
    const double* ab = pa + batch * m * k;
    const double* bb = pb + batch * k * n;
    double* cb = pc + batch * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = cb + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ab[i * k + p];
        if (av == 0.0) continue;
        const double* brow = bb + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

void matmul_backward(const DenseArray& a, const DenseArray& b, const DenseArray& dc, DenseArray* da,
                     DenseArray* db) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const std::size_t k = sa.back();
  const std::size_t n = sb.back();
  const std::size_t batches = sb.size() == 3 ? sb[0] : 1;
  const std::size_t m = sb.size() == 3 ? sa[1] : a.size() / k;
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  const double* pdc = dc.values().data();
  for (std::size_t batch = 0; batch < batches; ++batch) {
    const double* ab = pa + batch * m * k;
    const double* bb = pb + batch * k * n;
    const double* dcb = pdc + batch * m * n;
    if (da) {
      double* dab = da->values().data() + batch * m * k;
      for (std::size_t i = 0; i < m; ++i) {
        const double* dcrow = dcb + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = bb + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += dcrow[j] * brow[j];
          dab[i * k + p] += acc;
        }
      }
    }
    if (db) {
      double* dbb = db->values().data() + batch * k * n;
      for (std::size_t i = 0; i < m; ++i) {
        const double* dcrow = dcb + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = ab[i * k + p];
          if (av == 0.0) continue;
          double* dbrow = dbb + p * n;
          for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * dcrow[j];
        }
      }
    }
  }
}

}  // namespace

Trace forward(const Graph& graph, const Bindings& inputs, const ParamStore& params) {
  Trace trace;
  trace.values.resize(graph.size());
  for (NodeId id = 0; id < graph.size(); ++id) {
    const Node& n = graph.node(id);
    DenseArray& out = trace.values[id];
    auto in = [&](std::size_t i) -> const DenseArray& { return trace.values[n.inputs[i]]; };
    switch (n.op) {
      case OpKind::Input: {
        auto it = inputs.find(n.name);
        if (it == inputs.end()) throw ShapeError(graph.describe(id) + ": input not bound");
        if (it->second.shape() != n.shape) {
          throw ShapeError(graph.describe(id) + ": bound shape " + to_string(it->second.shape()));
        }
        out = it->second;
        break;
      }
      case OpKind::Param: {
        if (!params.contains(n.name)) throw ShapeError(graph.describe(id) + ": parameter missing from store");
        const DenseArray& p = params.get(n.name);
        if (p.shape() != n.shape) {
          throw ShapeError(graph.describe(id) + ": store shape " + to_string(p.shape()));
        }
        out = p;
        break;
      }
      case OpKind::Constant:
        out = graph.constant_value(n);
        break;
      case OpKind::Add:
      case OpKind::Sub:
      case OpKind::Mul: {
        out = DenseArray(n.shape);
        const auto a = in(0).values();
        const auto b = in(1).values();
        auto o = out.values();
        if (n.op == OpKind::Add) {
          for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + b[i];
        } else if (n.op == OpKind::Sub) {
          for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] - b[i];
        } else {
          for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] * b[i];
        }
        break;
      }
      case OpKind::MatMul:
        out = DenseArray(n.shape);
        matmul_forward(in(0), in(1), out);
        break;
      case OpKind::Concat: {
        out = DenseArray(n.shape);
        const auto axis = static_cast<std::size_t>(n.axis);
        const std::size_t outer = prod(n.shape, 0, axis);
        const std::size_t inner = prod(n.shape, axis + 1, n.shape.size());
        const std::size_t row = n.shape[axis] * inner;
        std::size_t offset = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const DenseArray& part = in(p);
          const std::size_t block = part.shape()[axis] * inner;
          for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(part.values().data() + o * block, block, out.values().data() + o * row + offset);
          }
          offset += block;
        }
        break;
      }
      case OpKind::Slice: {
        out = DenseArray(n.shape);
        const auto axis = static_cast<std::size_t>(n.axis);
        const Shape& src = in(0).shape();
        const std::size_t outer = prod(src, 0, axis);
        const std::size_t inner = prod(src, axis + 1, src.size());
        const std::size_t block = (n.end - n.begin) * inner;
        for (std::size_t o = 0; o < outer; ++o) {
          std::copy_n(in(0).values().data() + o * src[axis] * inner + n.begin * inner, block,
                      out.values().data() + o * block);
        }
        break;
      }
      case OpKind::Transpose: {
        out = DenseArray(n.shape);
        const Shape& src = in(0).shape();
        const std::size_t rows = src[src.size() - 2];
        const std::size_t cols = src.back();
        const std::size_t batches = in(0).size() / (rows * cols);
        const double* s = in(0).values().data();
        double* d = out.values().data();
        for (std::size_t b = 0; b < batches; ++b) {
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) d[b * rows * cols + j * rows + i] = s[b * rows * cols + i * cols + j];
          }
        }
        break;
      }
      case OpKind::Broadcast: {
        out = DenseArray(n.shape);
        const auto strides = broadcast_strides(in(0).shape(), n.shape);
        const double* s = in(0).values().data();
        double* d = out.values().data();
        walk(n.shape, strides, [&](std::size_t o, std::size_t i) { d[o] = s[i]; });
        break;
      }
      case OpKind::Reshape:
        out = in(0);
        out.reshape(n.shape);
        break;
      case OpKind::Sum:
      case OpKind::Mean: {
        out = DenseArray(n.shape);
        const DenseArray& x = in(0);
        if (n.axis < 0) {
          double acc = 0.0;
          for (double v : x.values()) acc += v;
          out[0] = n.op == OpKind::Mean ? acc / static_cast<double>(x.size()) : acc;
        } else {
          const auto axis = static_cast<std::size_t>(n.axis);
          const Shape& src = x.shape();
          const std::size_t outer = prod(src, 0, axis);
          const std::size_t extent = src[axis];
          const std::size_t inner = prod(src, axis + 1, src.size());
          const double factor = n.op == OpKind::Mean ? 1.0 / static_cast<double>(extent) : 1.0;
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t e = 0; e < extent; ++e) {
              const double* s = x.values().data() + (o * extent + e) * inner;
              double* d = out.values().data() + o * inner;
              for (std::size_t i = 0; i < inner; ++i) d[i] += s[i];
            }
          }
          if (factor != 1.0) {
            for (double& v : out.values()) v *= factor;
          }
        }
        break;
      }
      case OpKind::Softmax: {
        out = DenseArray(n.shape);
        const std::size_t width = n.shape.back();
        const std::size_t rows = out.size() / width;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* s = in(0).values().data() + r * width;
          double* d = out.values().data() + r * width;
          const double peak = *std::max_element(s, s + width);
          double total = 0.0;
          for (std::size_t j = 0; j < width; ++j) total += d[j] = std::exp(s[j] - peak);
          for (std::size_t j = 0; j < width; ++j) d[j] /= total;
        }
        break;
      }
      case OpKind::Gelu: {
        out = DenseArray(n.shape);
        const auto s = in(0).values();
        auto d = out.values();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = s[i] * normal_cdf(s[i]);
        break;
      }
      case OpKind::LayerNorm: {
        out = DenseArray(n.shape);
        const std::size_t width = n.shape.back();
        const std::size_t rows = out.size() / width;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* s = in(0).values().data() + r * width;
          double* d = out.values().data() + r * width;
          double mu = 0.0;
          for (std::size_t j = 0; j < width; ++j) mu += s[j];
          mu /= static_cast<double>(width);
          double var = 0.0;
          for (std::size_t j = 0; j < width; ++j) var += (s[j] - mu) * (s[j] - mu);
          var /= static_cast<double>(width);
          const double inv = 1.0 / std::sqrt(var + n.scalar);
          for (std::size_t j = 0; j < width; ++j) d[j] = (s[j] - mu) * inv;
        }
        break;
      }
      case OpKind::Repeat: {
        out = DenseArray(n.shape);
        const auto axis = static_cast<std::size_t>(n.axis);
        const Shape& src = in(0).shape();
        const std::size_t outer = prod(src, 0, axis);
        const std::size_t inner = prod(src, axis, src.size());
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t c = 0; c < n.end; ++c) {
            std::copy_n(in(0).values().data() + o * inner, inner,
                        out.values().data() + (o * n.end + c) * inner);
          }
        }
        break;
      }
      case OpKind::Scale: {
        out = in(0);
        for (double& v : out.values()) v *= n.scalar;
        break;
      }
    }
    if (!out.all_finite()) {
      throw NumericError(graph.describe(id) + " produced a non-finite value");
    }
  }
  return trace;
}

std::map<std::string, DenseArray> evaluate(const Graph& graph, const Bindings& inputs,
                                           const ParamStore& params) {
  Trace trace = forward(graph, inputs, params);
  std::map<std::string, DenseArray> out;
  for (const auto& [name, id] : graph.outputs()) out.emplace(name, std::move(trace.values[id]));
  return out;
}

// ---------------------------------------------------------------------------
// Backward

GradientMap backward(const Graph& graph, const Trace& trace, NodeId loss) {
  if (loss >= graph.size()) throw ShapeError("backward: unknown loss node");
  if (element_count(graph.shape(loss)) != 1) {
    throw ShapeError("backward: loss " + graph.describe(loss) + " is not scalar");
  }

  std::vector<char> needs(graph.size(), 0);
  for (NodeId id = 0; id <= loss; ++id) {
    const Node& n = graph.node(id);
    if (n.op == OpKind::Param) {
      needs[id] = 1;
    } else {
      for (NodeId i : n.inputs) needs[id] = needs[id] || needs[i];
    }
  }

  std::vector<DenseArray> grads(graph.size());
  std::vector<char> has(graph.size(), 0);
  auto grad_of = [&](NodeId id) -> DenseArray* {
    if (!needs[id]) return nullptr;
    if (!has[id]) {
      grads[id] = DenseArray(graph.shape(id));
      has[id] = 1;
    }
    return &grads[id];
  };

  if (needs[loss]) {
    grad_of(loss)->values()[0] = 1.0;
  }

  for (NodeId id = loss + 1; id-- > 0;) {
    if (!has[id]) continue;
    const Node& n = graph.node(id);
    const DenseArray& g = grads[id];
    const DenseArray& y = trace[id];
    auto x = [&](std::size_t i) -> const DenseArray& { return trace[n.inputs[i]]; };
    switch (n.op) {
      case OpKind::Input:
      case OpKind::Param:
      case OpKind::Constant:
        break;
      case OpKind::Add:
      case OpKind::Sub: {
        if (DenseArray* da = grad_of(n.inputs[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i];
        }
        if (DenseArray* db = grad_of(n.inputs[1])) {
          const double sign = n.op == OpKind::Add ? 1.0 : -1.0;
          for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += sign * g[i];
        }
        break;
      }
      case OpKind::Mul: {
        if (DenseArray* da = grad_of(n.inputs[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * x(1)[i];
        }
        if (DenseArray* db = grad_of(n.inputs[1])) {
          for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * x(0)[i];
        }
        break;
      }
      case OpKind::MatMul:
        matmul_backward(x(0), x(1), g, grad_of(n.inputs[0]), grad_of(n.inputs[1]));
        break;
      case OpKind::Concat: {
        const auto axis = static_cast<std::size_t>(n.axis);
        const std::size_t outer = prod(n.shape, 0, axis);
        const std::size_t inner = prod(n.shape, axis + 1, n.shape.size());
        const std::size_t row = n.shape[axis] * inner;
        std::size_t offset = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const std::size_t block = graph.shape(n.inputs[p])[axis] * inner;
          if (DenseArray* dp = grad_of(n.inputs[p])) {
            for (std::size_t o = 0; o < outer; ++o) {
              const double* s = g.values().data() + o * row + offset;
              double* d = dp->values().data() + o * block;
              for (std::size_t i = 0; i < block; ++i) d[i] += s[i];
            }
          }
          offset += block;
        }
        break;
      }
      case OpKind::Slice: {
        DenseArray* dx = grad_of(n.inputs[0]);
        const auto axis = static_cast<std::size_t>(n.axis);
        const Shape& src = x(0).shape();
        const std::size_t outer = prod(src, 0, axis);
        const std::size_t inner = prod(src, axis + 1, src.size());
        const std::size_t block = (n.end - n.begin) * inner;
        for (std::size_t o = 0; o < outer; ++o) {
          double* d = dx->values().data() + o * src[axis] * inner + n.begin * inner;
          const double* s = g.values().data() + o * block;
          for (std::size_t i = 0; i < block; ++i) d[i] += s[i];
        }
        break;
      }
      case OpKind::Transpose: {
        DenseArray* dx = grad_of(n.inputs[0]);
        const Shape& src = x(0).shape();
        const std::size_t rows = src[src.size() - 2];
        const std::size_t cols = src.back();
        const std::size_t batches = x(0).size() / (rows * cols);
        for (std::size_t b = 0; b < batches; ++b) {
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
              (*dx)[b * rows * cols + i * cols + j] += g[b * rows * cols + j * rows + i];
            }
          }
        }
        break;
      }
      case OpKind::Broadcast: {
        DenseArray* dx = grad_of(n.inputs[0]);
        const auto strides = broadcast_strides(x(0).shape(), n.shape);
        double* d = dx->values().data();
        const double* s = g.values().data();
        walk(n.shape, strides, [&](std::size_t o, std::size_t i) { d[i] += s[o]; });
        break;
      }
      case OpKind::Reshape: {
        DenseArray* dx = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
        break;
      }
      case OpKind::Sum:
      case OpKind::Mean: {
        DenseArray* dx = grad_of(n.inputs[0]);
        const Shape& src = x(0).shape();
        if (n.axis < 0) {
          const double v = n.op == OpKind::Mean ? g[0] / static_cast<double>(dx->size()) : g[0];
          for (double& d : dx->values()) d += v;
        } else {
          const auto axis = static_cast<std::size_t>(n.axis);
          const std::size_t outer = prod(src, 0, axis);
          const std::size_t extent = src[axis];
          const std::size_t inner = prod(src, axis + 1, src.size());
          const double factor = n.op == OpKind::Mean ? 1.0 / static_cast<double>(extent) : 1.0;
          for (std::size_t o = 0; o < outer; ++o) {
            const double* s = g.values().data() + o * inner;
            for (std::size_t e = 0; e < extent; ++e) {
              double* d = dx->values().data() + (o * extent + e) * inner;
              for (std::size_t i = 0; i < inner; ++i) d[i] += factor * s[i];
            }
          }
        }
        break;
      }
      case OpKind::Softmax: {
        DenseArray* dx = grad_of(n.inputs[0]);
        const std::size_t width = n.shape.back();
        const std::size_t rows = y.size() / width;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* yr = y.values().data() + r * width;
          const double* gr = g.values().data() + r * width;
          double dot = 0.0;
          for (std::size_t j = 0; j < width; ++j) dot += yr[j] * gr[j];
          double* d = dx->values().data() + r * width;
          for (std::size_t j = 0; j < width; ++j) d[j] += yr[j] * (gr[j] - dot);
        }
        break;
      }
      case OpKind::Gelu: {
        DenseArray* dx = grad_of(n.inputs[0]);
        const auto s = x(0).values();
        for (std::size_t i = 0; i < g.size(); ++i) {
          (*dx)[i] += g[i] * (normal_cdf(s[i]) + s[i] * normal_pdf(s[i]));
        }
        break;
      }
      case OpKind::LayerNorm: {
        DenseArray* dx = grad_of(n.inputs[0]);
        const std::size_t width = n.shape.back();
        const std::size_t rows = y.size() / width;
        const double w = static_cast<double>(width);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* s = x(0).values().data() + r * width;
          const double* yr = y.values().data() + r * width;
          const double* gr = g.values().data() + r * width;
          double mu = 0.0;
          for (std::size_t j = 0; j < width; ++j) mu += s[j];
          mu /= w;
          double var = 0.0;
          for (std::size_t j = 0; j < width; ++j) var += (s[j] - mu) * (s[j] - mu);
          var /= w;
          const double inv = 1.0 / std::sqrt(var + n.scalar);
          double g_mean = 0.0;
          double gy_mean = 0.0;
          for (std::size_t j = 0; j < width; ++j) {
            g_mean += gr[j];
            gy_mean += gr[j] * yr[j];
          }
          g_mean /= w;
          gy_mean /= w;
          double* d = dx->values().data() + r * width;
          for (std::size_t j = 0; j < width; ++j) d[j] += inv * (gr[j] - g_mean - yr[j] * gy_mean);
        }
        break;
      }
      case OpKind::Repeat: {
        DenseArray* dx = grad_of(n.inputs[0]);
        const auto axis = static_cast<std::size_t>(n.axis);
        const Shape& src = x(0).shape();
        const std::size_t outer = prod(src, 0, axis);
        const std::size_t inner = prod(src, axis, src.size());
        for (std::size_t o = 0; o < outer; ++o) {
          double* d = dx->values().data() + o * inner;
          for (std::size_t c = 0; c < n.end; ++c) {
            const double* s = g.values().data() + (o * n.end + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) d[i] += s[i];
          }
        }
        break;
      }
      case OpKind::Scale: {
        DenseArray* dx = grad_of(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += n.scalar * g[i];
        break;
      }
    }
  }

  GradientMap out;
  for (NodeId id : graph.param_nodes()) {
    const Node& n = graph.node(id);
    out.insert_or_assign(n.name, has[id] ? grads[id] : DenseArray(n.shape));
  }
  return out;
}

GradientMap gradients(const Graph& graph, NodeId loss, const Bindings& inputs,
                      const ParamStore& params) {
  if (loss >= graph.size()) throw ShapeError("gradients: unknown loss node");
  if (element_count(graph.shape(loss)) != 1) {
    throw ShapeError("gradients: loss " + graph.describe(loss) + " is not scalar");
  }
  return backward(graph, forward(graph, inputs, params), loss);
}

}  // namespace scenediff::grad
