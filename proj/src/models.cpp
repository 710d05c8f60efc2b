#include "socsim/models.hpp"

#include <filesystem>

#include "socsim/error.hpp"

namespace socsim {

GraphBuilder::GraphBuilder(std::string name, std::string backend) {
  g_.name = std::move(name);
  g_.backend = std::move(backend);
}

std::string GraphBuilder::finish(OperatorNode node, ActivationKind act) {
  const std::string out = node.name + "_out";
  node.outputs = {out};
  TensorDesc t;
  t.name = out;
  g_.set_tensor(t);
  const std::string nodeName = node.name;
  g_.nodes.push_back(std::move(node));
  g_ = infer_shapes(std::move(g_));
  if (act == ActivationKind::None) return out;
  return activation(nodeName + "_act", out, act);
}

std::string GraphBuilder::param(const std::string& name, std::vector<std::int64_t> dims) {
  TensorDesc t;
  t.name = name;
  t.dims = std::move(dims);
  t.layout = Layout::Flat;
  g_.set_tensor(t);
  g_.parameters.push_back(name);
  return name;
}

std::string GraphBuilder::input(const std::string& name, const Dims4& nhwc) {
  TensorDesc t;
  t.name = name;
  t.dims.assign(nhwc.begin(), nhwc.end());
  g_.set_tensor(t);
  OperatorNode n;
  n.name = name + "_input";
  n.kind = OpKind::Input;
  n.outputs = {name};
  g_.nodes.push_back(std::move(n));
  return name;
}

std::string GraphBuilder::input_nchw(const std::string& name, const std::vector<std::int64_t>& nchw) {
  TensorDesc t;
  t.name = name;
  t.dims = nchw;
  t.layout = Layout::NCHW;
  g_.set_tensor(t);
  OperatorNode n;
  n.name = name + "_input";
  n.kind = OpKind::Input;
  n.outputs = {name};
  g_.nodes.push_back(std::move(n));
  return name;
}

std::string GraphBuilder::conv(const std::string& name, const std::string& in, std::int64_t kernels,
                               std::int64_t rows, std::int64_t cols, std::int64_t stride,
                               Padding padding, ActivationKind act) {
  const Dims4 x = as_nhwc(g_.tensor(in));
  OperatorNode n;
  n.name = name;
  n.kind = OpKind::Convolution;
  n.attrs.stride = {stride, stride};
  n.attrs.padding = padding;
  n.inputs = {in, param(name + "_weights", {kernels, rows, cols, x[kC]})};
  return finish(std::move(n), act);
}

std::string GraphBuilder::fc(const std::string& name, const std::string& in, std::int64_t outputs,
                             ActivationKind act) {
  const Dims4 x = as_nhwc(g_.tensor(in));
  OperatorNode n;
  n.name = name;
  n.kind = OpKind::InnerProduct;
  n.inputs = {in, param(name + "_weights", {outputs, x[kH] * x[kW] * x[kC]})};
  return finish(std::move(n), act);
}

std::string GraphBuilder::pool(const std::string& name, const std::string& in, std::int64_t window,
                               std::int64_t stride, Padding padding, PoolKind kind) {
  OperatorNode n;
  n.name = name;
  n.kind = OpKind::Pooling;
  n.attrs.kernel = {window, window};
  n.attrs.stride = {stride, stride};
  n.attrs.padding = padding;
  n.attrs.pool = kind;
  n.inputs = {in};
  return finish(std::move(n), ActivationKind::None);
}

std::string GraphBuilder::batchnorm(const std::string& name, const std::string& in) {
  const Dims4 x = as_nhwc(g_.tensor(in));
  OperatorNode n;
  n.name = name;
  n.kind = OpKind::BatchNorm;
  n.inputs = {in, param(name + "_params", {4, x[kC]})};
  return finish(std::move(n), ActivationKind::None);
}

std::string GraphBuilder::add(const std::string& name, const std::string& a, const std::string& b,
                              ActivationKind act) {
  OperatorNode n;
  n.name = name;
  n.kind = OpKind::EltwiseAdd;
  n.inputs = {a, b};
  return finish(std::move(n), act);
}

std::string GraphBuilder::activation(const std::string& name, const std::string& in,
                                     ActivationKind act) {
  OperatorNode n;
  n.name = name;
  n.kind = OpKind::Activation;
  n.attrs.activation = act;
  n.inputs = {in};
  return finish(std::move(n), ActivationKind::None);
}

std::string GraphBuilder::reorder(const std::string& name, const std::string& in) {
  OperatorNode n;
  n.name = name;
  n.kind = OpKind::Reorder;
  n.inputs = {in};
  return finish(std::move(n), ActivationKind::None);
}

Graph minerva_model(const std::string& backend) {
  GraphBuilder b("minerva", backend);
  auto x = b.input("input", {1, 28, 28, 1});
  x = b.fc("fc0", x, 256, ActivationKind::Relu);
  x = b.fc("fc1", x, 256, ActivationKind::Relu);
  x = b.fc("fc2", x, 256, ActivationKind::Relu);
  b.fc("fc3", x, 10);
  return b.graph();
}

Graph lenet5_model(const std::string& backend) {
  GraphBuilder b("lenet5", backend);
  auto x = b.input("input", {1, 28, 28, 1});
  x = b.conv("conv0", x, 32, 3, 3, 1, Padding::Valid, ActivationKind::Relu);
  x = b.conv("conv1", x, 32, 3, 3, 1, Padding::Valid, ActivationKind::Relu);
  x = b.pool("pool", x, 2, 2);
  x = b.fc("fc0", x, 128, ActivationKind::Relu);
  b.fc("fc1", x, 10);
  return b.graph();
}

Graph cnn10_model(const std::string& backend) {
  GraphBuilder b("cnn10", backend);
  auto x = b.input("input", {1, 32, 32, 3});
  x = b.conv("conv0", x, 32, 3, 3, 1, Padding::Same, ActivationKind::Relu);
  x = b.conv("conv1", x, 32, 3, 3, 1, Padding::Same, ActivationKind::Relu);
  x = b.batchnorm("bn0", x);
  x = b.pool("pool0", x, 2, 2);
  x = b.conv("conv2", x, 64, 3, 3, 1, Padding::Same, ActivationKind::Relu);
  x = b.conv("conv3", x, 64, 3, 3, 1, Padding::Same, ActivationKind::Relu);
  x = b.batchnorm("bn1", x);
  x = b.pool("pool1", x, 2, 2);
  x = b.fc("fc0", x, 512, ActivationKind::Relu);
  b.fc("fc1", x, 10);
  return b.graph();
}

std::vector<std::string> bundled_model_names() { return {"minerva", "lenet5", "cnn10"}; }

Graph bundled_model(const std::string& name, const std::string& backend) {
  if (name == "minerva") return minerva_model(backend);
  if (name == "lenet5") return lenet5_model(backend);
  if (name == "cnn10") return cnn10_model(backend);
  throw Error("unknown bundled model '" + name + "'");
}

std::vector<std::string> write_bundled_models(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  std::vector<std::string> written;
  for (const auto& name : bundled_model_names()) {
    const Graph g = bundled_model(name);
    const std::string base = (std::filesystem::path(dir) / name).string();
    serialize_model(g, random_parameters(g, kModelSeed), base);
    written.push_back(base);
  }
  return written;
}

}  // namespace socsim
