#include "socsim/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "socsim/error.hpp"

namespace socsim {

std::size_t element_size(DataType t) {
  switch (t) {
    case DataType::Fixed16: return 2;
    case DataType::Fixed32: return 4;
    case DataType::Float16: return 2;
    case DataType::Float32: return 4;
  }
  return 0;
}

std::string_view to_string(DataType t) {
  switch (t) {
    case DataType::Fixed16: return "fixed16";
    case DataType::Fixed32: return "fixed32";
    case DataType::Float16: return "float16";
    case DataType::Float32: return "float32";
  }
  return "?";
}

std::string_view to_string(Layout l) {
  switch (l) {
    case Layout::NHWC: return "NHWC";
    case Layout::NCHW: return "NCHW";
    case Layout::Flat: return "flat";
  }
  return "?";
}

DataType parse_data_type(std::string_view s) {
  for (DataType t : {DataType::Fixed16, DataType::Fixed32, DataType::Float16, DataType::Float32}) {
    if (to_string(t) == s) return t;
  }
  throw ParseError(ParseError::Kind::MalformedHeader, "unknown dtype '" + std::string(s) + "'");
}

Layout parse_layout(std::string_view s) {
  for (Layout l : {Layout::NHWC, Layout::NCHW, Layout::Flat}) {
    if (to_string(l) == s) return l;
  }
  throw ParseError(ParseError::Kind::MalformedHeader, "unknown layout '" + std::string(s) + "'");
}

namespace {

template <typename Int>
Int saturate(double scaled) {
  if (std::isnan(scaled)) return 0;
  const double lo = static_cast<double>(std::numeric_limits<Int>::min());
  const double hi = static_cast<double>(std::numeric_limits<Int>::max());
  return static_cast<Int>(std::clamp(std::nearbyint(scaled), lo, hi));
}

}  // namespace

std::int16_t to_fixed16(double v) { return saturate<std::int16_t>(v * 256.0); }
std::int32_t to_fixed32(double v) { return saturate<std::int32_t>(v * 65536.0); }
double from_fixed16(std::int16_t v) { return v / 256.0; }
double from_fixed32(std::int32_t v) { return v / 65536.0; }

std::int64_t TensorDesc::elements() const {
  return std::accumulate(dims.begin(), dims.end(), std::int64_t{1}, std::multiplies<>());
}

Dims4 as_nhwc(const TensorDesc& t) {
  const auto& d = t.dims;
  switch (d.size()) {
    case 0: return {1, 1, 1, 1};
    case 1: return {1, 1, 1, d[0]};
    case 2: return {d[0], 1, 1, d[1]};
    case 3: return {1, d[0], d[1], d[2]};
    case 4:
      if (t.layout == Layout::NCHW) return {d[0], d[2], d[3], d[1]};
      return {d[0], d[1], d[2], d[3]};
    default: {
      std::int64_t inner = 1;
      for (std::size_t i = 1; i < d.size(); ++i) inner *= d[i];
      return {d[0], 1, 1, inner};
    }
  }
}

std::int64_t product(const Dims4& d) { return d[0] * d[1] * d[2] * d[3]; }

std::string format_dims(const Dims4& d) {
  return format_dims(std::vector<std::int64_t>(d.begin(), d.end()));
}

std::string format_dims(const std::vector<std::int64_t>& d) {
  std::string s;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(d[i]);
  }
  return s;
}

std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::Input: return "Input";
    case OpKind::Convolution: return "Convolution";
    case OpKind::InnerProduct: return "InnerProduct";
    case OpKind::Pooling: return "Pooling";
    case OpKind::BatchNorm: return "BatchNorm";
    case OpKind::EltwiseAdd: return "EltwiseAdd";
    case OpKind::Activation: return "Activation";
    case OpKind::Reorder: return "Reorder";
  }
  return "?";
}

std::optional<OpKind> parse_op_kind(std::string_view s) {
  for (OpKind k : {OpKind::Input, OpKind::Convolution, OpKind::InnerProduct, OpKind::Pooling,
                   OpKind::BatchNorm, OpKind::EltwiseAdd, OpKind::Activation, OpKind::Reorder}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Padding p) { return p == Padding::Same ? "same" : "valid"; }
std::string_view to_string(PoolKind p) { return p == PoolKind::Max ? "max" : "avg"; }

std::string_view to_string(ActivationKind a) {
  switch (a) {
    case ActivationKind::None: return "none";
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Elu: return "elu";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Tanh: return "tanh";
  }
  return "?";
}

Padding parse_padding(std::string_view s) {
  if (s == "same") return Padding::Same;
  if (s == "valid") return Padding::Valid;
  throw ParseError(ParseError::Kind::MalformedHeader, "unknown padding '" + std::string(s) + "'");
}

PoolKind parse_pool_kind(std::string_view s) {
  if (s == "max") return PoolKind::Max;
  if (s == "avg") return PoolKind::Avg;
  throw ParseError(ParseError::Kind::MalformedHeader, "unknown pooling '" + std::string(s) + "'");
}

ActivationKind parse_activation(std::string_view s) {
  for (ActivationKind a : {ActivationKind::None, ActivationKind::Relu, ActivationKind::Elu,
                           ActivationKind::Sigmoid, ActivationKind::Tanh}) {
    if (to_string(a) == s) return a;
  }
  throw ParseError(ParseError::Kind::MalformedHeader, "unknown activation '" + std::string(s) + "'");
}

// Graph ----------------------------------------------------------------------

const TensorDesc* Graph::find_tensor(std::string_view n) const {
  for (const auto& t : tensors) {
    if (t.name == n) return &t;
  }
  return nullptr;
}

TensorDesc* Graph::find_tensor(std::string_view n) {
  for (auto& t : tensors) {
    if (t.name == n) return &t;
  }
  return nullptr;
}

const TensorDesc& Graph::tensor(std::string_view n) const {
  const TensorDesc* t = find_tensor(n);
  if (!t) throw GraphError("unknown tensor '" + std::string(n) + "'");
  return *t;
}

const OperatorNode* Graph::find_node(std::string_view n) const {
  for (const auto& node : nodes) {
    if (node.name == n) return &node;
  }
  return nullptr;
}

const OperatorNode& Graph::node(std::string_view n) const {
  const OperatorNode* node = find_node(n);
  if (!node) throw GraphError("unknown node '" + std::string(n) + "'");
  return *node;
}

bool Graph::is_parameter(std::string_view n) const {
  return std::find(parameters.begin(), parameters.end(), n) != parameters.end();
}

void Graph::set_tensor(TensorDesc t) {
  if (TensorDesc* existing = find_tensor(t.name)) {
    *existing = std::move(t);
  } else {
    tensors.push_back(std::move(t));
  }
}

std::optional<std::size_t> Graph::producer(std::string_view t) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& outs = nodes[i].outputs;
    if (std::find(outs.begin(), outs.end(), t) != outs.end()) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> Graph::consumers(std::string_view t) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& ins = nodes[i].inputs;
    if (std::find(ins.begin(), ins.end(), t) != ins.end()) out.push_back(i);
  }
  return out;
}

std::vector<std::string> Graph::graph_outputs() const {
  std::vector<std::string> out;
  for (const auto& n : nodes) {
    for (const auto& t : n.outputs) {
      if (consumers(t).empty()) out.push_back(t);
    }
  }
  return out;
}

std::vector<std::string> Graph::graph_inputs() const {
  std::vector<std::string> out;
  for (const auto& n : nodes) {
    if (n.kind == OpKind::Input) out.insert(out.end(), n.outputs.begin(), n.outputs.end());
  }
  return out;
}

std::int64_t Graph::parameter_bytes() const {
  std::int64_t total = 0;
  for (const auto& p : parameters) total += tensor(p).bytes();
  return total;
}

void validate(const Graph& g) {
  std::set<std::string> names;
  std::map<std::string, std::string> producedBy;
  for (const auto& n : g.nodes) {
    if (!names.insert(n.name).second) throw GraphError("duplicate node name '" + n.name + "'");
    for (const auto& t : n.outputs) {
      auto [it, inserted] = producedBy.emplace(t, n.name);
      if (!inserted) {
        throw GraphError("tensor '" + t + "' produced by both '" + it->second + "' and '" +
                         n.name + "'");
      }
      if (g.is_parameter(t)) throw GraphError("node '" + n.name + "' writes parameter '" + t + "'");
    }
  }
  for (const auto& n : g.nodes) {
    if (n.kind == OpKind::Input) {
      if (!n.inputs.empty()) throw GraphError("input node '" + n.name + "' has inputs");
      if (n.outputs.size() != 1) throw GraphError("input node '" + n.name + "' needs one output");
      continue;
    }
    if (n.outputs.size() != 1) throw GraphError("node '" + n.name + "' needs exactly one output");
    for (const auto& t : n.inputs) {
      if (!producedBy.count(t) && !g.is_parameter(t)) {
        throw GraphError("node '" + n.name + "' consumes tensor '" + t + "' with no producer");
      }
      if (!g.find_tensor(t) && g.is_parameter(t)) {
        throw GraphError("parameter '" + t + "' has no descriptor");
      }
    }
  }
  for (const auto& p : g.parameters) {
    if (!g.find_tensor(p)) throw GraphError("parameter '" + p + "' has no descriptor");
  }
}

std::vector<std::size_t> topo_schedule(const Graph& g) {
  const std::size_t n = g.nodes.size();
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indegree(n, 0);
  std::map<std::string, std::size_t> producer;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& t : g.nodes[i].outputs) producer[t] = i;
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::set<std::size_t> preds;
    for (const auto& t : g.nodes[j].inputs) {
      auto it = producer.find(t);
      if (it != producer.end()) preds.insert(it->second);
    }
    for (std::size_t i : preds) {
      succ[i].push_back(j);
      ++indegree[j];
    }
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t j : succ[i]) {
      if (--indegree[j] == 0) ready.push(j);
    }
  }
  if (order.size() != n) throw GraphError("graph '" + g.name + "' contains a cycle");
  return order;
}

std::int64_t window_output_extent(std::int64_t in, std::int64_t window, std::int64_t stride,
                                  Padding padding) {
  if (window < 1 || stride < 1) throw ShapeError("window and stride must be >= 1");
  if (padding == Padding::Same) return (in + stride - 1) / stride;
  if (in < window) {
    throw ShapeError("window " + std::to_string(window) + " larger than input " +
                     std::to_string(in));
  }
  return (in - window) / stride + 1;
}

std::int64_t window_pad_before(std::int64_t in, std::int64_t window, std::int64_t stride,
                               Padding padding) {
  if (padding == Padding::Valid) return 0;
  const std::int64_t out = window_output_extent(in, window, stride, padding);
  const std::int64_t total = std::max<std::int64_t>((out - 1) * stride + window - in, 0);
  return total / 2;
}

namespace {

[[noreturn]] void shape_fail(const OperatorNode& n, const std::string& what) {
  throw ShapeError("node '" + n.name + "' (" + std::string(to_string(n.kind)) + "): " + what);
}

const TensorDesc& input_desc(const Graph& g, const OperatorNode& n, std::size_t i) {
  if (n.inputs.size() <= i) shape_fail(n, "missing input " + std::to_string(i));
  const TensorDesc* t = g.find_tensor(n.inputs[i]);
  if (!t || t->dims.empty()) shape_fail(n, "input '" + n.inputs[i] + "' has no shape");
  return *t;
}

TensorDesc infer_node(const Graph& g, const OperatorNode& n) {
  TensorDesc out;
  out.name = n.outputs.at(0);
  switch (n.kind) {
    case OpKind::Input: {
      const TensorDesc* t = g.find_tensor(out.name);
      if (!t || t->dims.empty()) shape_fail(n, "input tensor needs explicit dims");
      for (auto d : t->dims) {
        if (d < 1) shape_fail(n, "dims must be >= 1");
      }
      return *t;
    }
    case OpKind::Convolution: {
      const TensorDesc& in = input_desc(g, n, 0);
      const TensorDesc& w = input_desc(g, n, 1);
      const Dims4 x = as_nhwc(in);
      if (w.dims.size() != 4) shape_fail(n, "weights must be KxRxSxC");
      const auto k = w.dims[0], r = w.dims[1], s = w.dims[2], c = w.dims[3];
      if (r < 1 || s < 1) shape_fail(n, "kernel dims must be >= 1");
      if (n.attrs.stride[0] < 1 || n.attrs.stride[1] < 1) shape_fail(n, "stride must be >= 1");
      if (c != x[kC]) {
        shape_fail(n, "weight channels " + std::to_string(c) + " != input channels " +
                          std::to_string(x[kC]));
      }
      try {
        const auto ho = window_output_extent(x[kH], r, n.attrs.stride[0], n.attrs.padding);
        const auto wo = window_output_extent(x[kW], s, n.attrs.stride[1], n.attrs.padding);
        out.dims = {x[kN], ho, wo, k};
      } catch (const ShapeError& e) {
        shape_fail(n, e.what());
      }
      out.dtype = in.dtype;
      return out;
    }
    case OpKind::InnerProduct: {
      const TensorDesc& in = input_desc(g, n, 0);
      const TensorDesc& w = input_desc(g, n, 1);
      const Dims4 x = as_nhwc(in);
      const std::int64_t flat = x[kH] * x[kW] * x[kC];
      if (w.dims.size() != 2) shape_fail(n, "weights must be [outputs, inputs]");
      if (w.dims[1] != flat) {
        shape_fail(n, "weight inputs " + std::to_string(w.dims[1]) + " != flattened input " +
                          std::to_string(flat));
      }
      out.dims = {x[kN], w.dims[0]};
      out.layout = Layout::Flat;
      out.dtype = in.dtype;
      return out;
    }
    case OpKind::Pooling: {
      const TensorDesc& in = input_desc(g, n, 0);
      const Dims4 x = as_nhwc(in);
      try {
        const auto ho =
            window_output_extent(x[kH], n.attrs.kernel[0], n.attrs.stride[0], n.attrs.padding);
        const auto wo =
            window_output_extent(x[kW], n.attrs.kernel[1], n.attrs.stride[1], n.attrs.padding);
        out.dims = {x[kN], ho, wo, x[kC]};
      } catch (const ShapeError& e) {
        shape_fail(n, e.what());
      }
      out.dtype = in.dtype;
      return out;
    }
    case OpKind::BatchNorm: {
      const TensorDesc& in = input_desc(g, n, 0);
      const TensorDesc& p = input_desc(g, n, 1);
      const Dims4 x = as_nhwc(in);
      if (p.dims.size() != 2 || p.dims[0] != 4 || p.dims[1] != x[kC]) {
        shape_fail(n, "batchnorm parameters must be [4, " + std::to_string(x[kC]) + "]");
      }
      out.dims = in.dims;
      out.layout = in.layout;
      out.dtype = in.dtype;
      return out;
    }
    case OpKind::EltwiseAdd: {
      const TensorDesc& a = input_desc(g, n, 0);
      const TensorDesc& b = input_desc(g, n, 1);
      if (as_nhwc(a) != as_nhwc(b)) {
        shape_fail(n, "operand shapes differ: " + format_dims(a.dims) + " vs " +
                          format_dims(b.dims));
      }
      out.dims = a.dims;
      out.layout = a.layout;
      out.dtype = a.dtype;
      return out;
    }
    case OpKind::Activation: {
      const TensorDesc& in = input_desc(g, n, 0);
      out.dims = in.dims;
      out.layout = in.layout;
      out.dtype = in.dtype;
      return out;
    }
    case OpKind::Reorder: {
      const TensorDesc& in = input_desc(g, n, 0);
      if (in.layout != Layout::NCHW || in.dims.size() != 4) {
        shape_fail(n, "reorder expects a 4-d NCHW input");
      }
      out.dims = {in.dims[0], in.dims[2], in.dims[3], in.dims[1]};
      out.dtype = in.dtype;
      return out;
    }
  }
  shape_fail(n, "unsupported operator");
}

}  // namespace

Graph infer_shapes(Graph g) {
  validate(g);
  for (std::size_t idx : topo_schedule(g)) {
    const OperatorNode& n = g.nodes[idx];
    if (n.outputs.size() != 1) shape_fail(n, "expected one output");
    g.set_tensor(infer_node(g, n));
  }
  return g;
}

Graph fuse_operators(Graph g) {
  std::vector<bool> removed(g.nodes.size(), false);
  std::vector<std::string> deadTensors;
  for (std::size_t idx : topo_schedule(g)) {
    const OperatorNode& act = g.nodes[idx];
    if (act.kind != OpKind::Activation || act.inputs.size() != 1) continue;
    const std::string& t = act.inputs[0];
    auto p = g.producer(t);
    if (!p || removed[*p]) continue;
    OperatorNode& prod = g.nodes[*p];
    const bool fusable = prod.kind == OpKind::Convolution || prod.kind == OpKind::InnerProduct ||
                         prod.kind == OpKind::EltwiseAdd;
    if (!fusable || prod.attrs.fused != ActivationKind::None) continue;
    if (g.consumers(t).size() != 1) continue;
    prod.attrs.fused = act.attrs.activation;
    prod.outputs[0] = act.outputs[0];
    removed[idx] = true;
    deadTensors.push_back(t);
  }
  std::vector<OperatorNode> kept;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!removed[i]) kept.push_back(std::move(g.nodes[i]));
  }
  g.nodes = std::move(kept);
  std::erase_if(g.tensors, [&](const TensorDesc& t) {
    return std::find(deadTensors.begin(), deadTensors.end(), t.name) != deadTensors.end();
  });
  return g;
}

Parameters random_parameters(const Graph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Parameters out;
  for (const auto& name : g.parameters) {
    const TensorDesc& t = g.tensor(name);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(t.bytes()));
    for (std::size_t i = 0; i < bytes.size(); i += 8) {
      std::uint64_t word = rng();
      for (std::size_t b = 0; b < 8 && i + b < bytes.size(); ++b) {
        bytes[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
      }
    }
    out.emplace(name, std::move(bytes));
  }
  return out;
}

}  // namespace socsim
