#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "socsim/graph.hpp"

namespace socsim {

/// Appends operators to a graph, inferring shapes as it goes so parameter
/// tensors can be sized from their inputs. Every method returns the name of
/// the tensor it produces.
class GraphBuilder {
 public:
  explicit GraphBuilder(std::string name, std::string backend = "nvdla-conv");

  std::string input(const std::string& name, const Dims4& nhwc);
  std::string conv(const std::string& name, const std::string& in, std::int64_t kernels,
                   std::int64_t rows, std::int64_t cols, std::int64_t stride = 1,
                   Padding padding = Padding::Same, ActivationKind act = ActivationKind::None);
  std::string fc(const std::string& name, const std::string& in, std::int64_t outputs,
                 ActivationKind act = ActivationKind::None);
  std::string pool(const std::string& name, const std::string& in, std::int64_t window,
                   std::int64_t stride, Padding padding = Padding::Valid,
                   PoolKind kind = PoolKind::Max);
  std::string batchnorm(const std::string& name, const std::string& in);
  std::string add(const std::string& name, const std::string& a, const std::string& b,
                  ActivationKind act = ActivationKind::None);
  std::string activation(const std::string& name, const std::string& in, ActivationKind act);
  /// NHWC view of an NCHW tensor.
  std::string input_nchw(const std::string& name, const std::vector<std::int64_t>& nchw);
  std::string reorder(const std::string& name, const std::string& in);

  const Graph& graph() const { return g_; }

 private:
  std::string finish(OperatorNode node, ActivationKind act);
  std::string param(const std::string& name, std::vector<std::int64_t> dims);

  Graph g_;
};

inline constexpr std::uint64_t kModelSeed = 0x5eed5eedULL;

/// 784-256-256-256-10 multilayer perceptron.
Graph minerva_model(const std::string& backend = "nvdla-conv");
/// Two 3x3 convolutions, max pooling and two fully connected layers on 28x28x1.
Graph lenet5_model(const std::string& backend = "nvdla-conv");
/// Four 3x3 convolutions in two blocks with batch norm and pooling, then two
/// fully connected layers on 32x32x3.
Graph cnn10_model(const std::string& backend = "nvdla-conv");

std::vector<std::string> bundled_model_names();
Graph bundled_model(const std::string& name, const std::string& backend = "nvdla-conv");

/// Writes every bundled model as <dir>/<name>.topo and <dir>/<name>.params.
std::vector<std::string> write_bundled_models(const std::string& dir);

}  // namespace socsim
