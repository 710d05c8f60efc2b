#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace socsim {

enum class DataType : std::uint8_t { Fixed16, Fixed32, Float16, Float32 };
enum class Layout : std::uint8_t { NHWC, NCHW, Flat };

std::size_t element_size(DataType t);
std::string_view to_string(DataType t);
std::string_view to_string(Layout l);
DataType parse_data_type(std::string_view s);
Layout parse_layout(std::string_view s);

/// Q8.8 and Q16.16 conversions, saturating at the representable range.
std::int16_t to_fixed16(double v);
std::int32_t to_fixed32(double v);
double from_fixed16(std::int16_t v);
double from_fixed32(std::int32_t v);

struct TensorDesc {
  std::string name;
  std::vector<std::int64_t> dims;  // NHWC for activations
  DataType dtype = DataType::Fixed16;
  Layout layout = Layout::NHWC;

  std::int64_t elements() const;
  std::int64_t bytes() const { return elements() * static_cast<std::int64_t>(element_size(dtype)); }
  bool operator==(const TensorDesc&) const = default;
};

using Dims4 = std::array<std::int64_t, 4>;
enum DimIndex : int { kN = 0, kH = 1, kW = 2, kC = 3 };

/// Views a tensor's dims as NHWC. Rank-2 [N, X] becomes [N, 1, 1, X]; rank-1
/// [X] becomes [1, 1, 1, X]. NCHW tensors are permuted to NHWC.
Dims4 as_nhwc(const TensorDesc& t);
std::int64_t product(const Dims4& d);
std::string format_dims(const Dims4& d);
std::string format_dims(const std::vector<std::int64_t>& d);

enum class OpKind : std::uint8_t {
  Input,
  Convolution,
  InnerProduct,
  Pooling,
  BatchNorm,
  EltwiseAdd,
  Activation,
  Reorder,
};

enum class Padding : std::uint8_t { Same, Valid };
enum class PoolKind : std::uint8_t { Max, Avg };
enum class ActivationKind : std::uint8_t { None, Relu, Elu, Sigmoid, Tanh };

std::string_view to_string(OpKind k);
std::optional<OpKind> parse_op_kind(std::string_view s);
std::string_view to_string(Padding p);
std::string_view to_string(PoolKind p);
std::string_view to_string(ActivationKind a);
Padding parse_padding(std::string_view s);
PoolKind parse_pool_kind(std::string_view s);
ActivationKind parse_activation(std::string_view s);

struct OpAttrs {
  std::array<std::int64_t, 2> kernel{1, 1};  // pooling window; conv reads weights
  std::array<std::int64_t, 2> stride{1, 1};
  Padding padding = Padding::Same;
  PoolKind pool = PoolKind::Max;
  ActivationKind activation = ActivationKind::None;  // function of an Activation node
  ActivationKind fused = ActivationKind::None;       // fused tag on Conv/IP/EltwiseAdd

  bool operator==(const OpAttrs&) const = default;
};

struct OperatorNode {
  std::string name;
  OpKind kind = OpKind::Input;
  OpAttrs attrs;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  bool operator==(const OperatorNode&) const = default;
};

/// A network as a dataflow graph. Tensors are referenced by name; tensors
/// listed in `parameters` are model parameters (weights) rather than edges.
struct Graph {
  std::string name;
  std::string backend;
  std::vector<TensorDesc> tensors;
  std::vector<std::string> parameters;
  std::vector<OperatorNode> nodes;

  const TensorDesc& tensor(std::string_view name) const;
  TensorDesc* find_tensor(std::string_view name);
  const TensorDesc* find_tensor(std::string_view name) const;
  const OperatorNode& node(std::string_view name) const;
  const OperatorNode* find_node(std::string_view name) const;
  bool is_parameter(std::string_view name) const;

  /// Adds or replaces a tensor descriptor.
  void set_tensor(TensorDesc t);

  /// Node index producing the tensor, if any.
  std::optional<std::size_t> producer(std::string_view tensor) const;
  /// Indices of nodes consuming the tensor, in insertion order.
  std::vector<std::size_t> consumers(std::string_view tensor) const;

  /// Tensors produced by some node and consumed by none.
  std::vector<std::string> graph_outputs() const;
  std::vector<std::string> graph_inputs() const;

  std::int64_t parameter_bytes() const;

  bool operator==(const Graph&) const = default;
};

/// Parameter payloads keyed by tensor name, stored as little-endian bytes.
using Parameters = std::map<std::string, std::vector<std::uint8_t>>;

/// Checks producer uniqueness and that every consumed tensor has a source.
void validate(const Graph& g);

/// Resolves every edge tensor's dims. Idempotent.
Graph infer_shapes(Graph g);

/// Absorbs single-consumer activations into their producing
/// Convolution/InnerProduct/EltwiseAdd node.
Graph fuse_operators(Graph g);

/// Node indices ordered so producers precede consumers; ties broken by
/// insertion order.
std::vector<std::size_t> topo_schedule(const Graph& g);

/// Output spatial extent of a windowed operator along one axis.
std::int64_t window_output_extent(std::int64_t in, std::int64_t window, std::int64_t stride,
                                  Padding padding);
/// Zero-padding rows/cols added before the first input element.
std::int64_t window_pad_before(std::int64_t in, std::int64_t window, std::int64_t stride,
                               Padding padding);

// Container format -----------------------------------------------------------

inline constexpr int kContainerVersion = 1;
inline constexpr std::size_t kParamsHeaderBytes = 24;

std::string write_topology(const Graph& g);
std::vector<std::uint8_t> write_parameters(const Graph& g, const Parameters& params);

struct Model {
  Graph graph;
  Parameters params;
};

Model read_model(std::string_view topology, const std::vector<std::uint8_t>& payload);

/// Writes `<base>.topo` and `<base>.params`.
void serialize_model(const Graph& g, const Parameters& params, const std::string& basePath);
/// Reads `<base>.topo` and `<base>.params`; a trailing ".topo" on the path is
/// accepted.
Model deserialize_model(const std::string& basePath);

/// Deterministic pseudo-random fixed16 data for every parameter tensor.
Parameters random_parameters(const Graph& g, std::uint64_t seed);

}  // namespace socsim
