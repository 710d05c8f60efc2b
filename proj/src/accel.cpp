#include "socsim/accel.hpp"

#include <algorithm>

#include "socsim/error.hpp"

namespace socsim {

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::uint64_t u(std::int64_t v) { return static_cast<std::uint64_t>(v); }

void require_fits(const char* what, std::int64_t bytes, std::int64_t capacity) {
  if (bytes > capacity) {
    throw CapacityError(std::string(what) + " operand of " + std::to_string(bytes) +
                        " bytes exceeds the " + std::to_string(capacity) + "-byte scratchpad");
  }
}

}  // namespace

std::string_view to_string(JobKind k) {
  switch (k) {
    case JobKind::Convolution: return "conv";
    case JobKind::InnerProduct: return "fc";
    case JobKind::Pooling: return "pool";
    case JobKind::BatchNorm: return "batchnorm";
    case JobKind::Eltwise: return "eltwise";
    case JobKind::Activation: return "activation";
  }
  return "?";
}

ComputeResult conv_engine_cycles(const ConvKernelJob& j, const ConvEngineConfig& cfg) {
  if (cfg.numPEs < 1 || cfg.maccWidth < 1) throw ConfigError("conv engine needs PEs and MACC lanes");
  if (j.OUT_R < 1 || j.OUT_C < 1 || j.kernels < 1 || j.IN_H < 1 || j.batch < 1 || j.WGT_R < 1 ||
      j.WGT_C < 1) {
    throw CapacityError("empty convolution job");
  }
  const std::int64_t eb = j.elemBytes;
  require_fits("input", j.batch * j.IN_R * j.IN_C * j.IN_H * eb, cfg.scratchpadBytes);
  require_fits("weight", j.kernels * j.WGT_R * j.WGT_C * j.IN_H * eb, cfg.scratchpadBytes);
  require_fits("output", j.batch * j.kernels * j.OUT_R * j.OUT_C * eb, cfg.scratchpadBytes);

  const std::int64_t rounds = ceil_div(j.kernels, cfg.numPEs);
  const std::int64_t blocks = ceil_div(j.IN_H, cfg.maccWidth);
  const std::int64_t area = j.OUT_R * j.OUT_C;
  const std::int64_t triples = j.WGT_R * j.WGT_C * blocks;

  ComputeResult r;
  r.cycles = u(j.batch * rounds * triples * (cfg.weightLoadCycles + area));
  r.util.active = u(j.batch * j.kernels * j.WGT_R * j.WGT_C * j.IN_H * area);
  r.util.capacity = u(j.batch * rounds * triples * area * cfg.numPEs * cfg.maccWidth);
  // Each PE loads its weight register once per (kr, kc, cb); input vectors are
  // broadcast to all PEs once per round and output position.
  r.spadReadBytes[kWeights] = u(j.kernels * triples * cfg.maccWidth * eb);
  r.spadReadBytes[kInputs] = u(j.batch * rounds * triples * area * cfg.maccWidth * eb);
  r.spadWriteBytes[kOutputs] = u(j.batch * j.kernels * area * eb);
  return r;
}

ComputeResult conv_engine_fc_cycles(std::int64_t inputWidth, std::int64_t outputs,
                                    const ConvEngineConfig& cfg, std::int64_t batch) {
  ConvKernelJob j;
  j.IN_H = inputWidth;
  j.kernels = outputs;
  j.batch = batch;
  return conv_engine_cycles(j, cfg);
}

ComputeResult systolic_matmul_cycles(std::int64_t M, std::int64_t N, std::int64_t K,
                                     const SystolicConfig& cfg, std::int64_t elemBytes) {
  if (cfg.rows < 1 || cfg.cols < 1) throw ConfigError("systolic array needs rows and cols >= 1");
  if (M < 1 || N < 1 || K < 1) throw CapacityError("empty matmul job");
  const std::int64_t a = ceil_div(M, cfg.rows);
  const std::int64_t b = ceil_div(N, cfg.cols);
  // Sum over passes of (m_p + n_p + K - 2), with m_p, n_p the occupied rows
  // and cols of each pass.
  const std::int64_t cycles = b * M + a * N + a * b * (K - 2) + a * b * cfg.commitCycles;
  ComputeResult r;
  r.cycles = u(cycles);
  r.util.active = u(M * N);
  r.util.capacity = u(a * b * cfg.rows * cfg.cols);
  r.spadReadBytes[kInputs] = u(b * M * K * elemBytes);
  r.spadReadBytes[kWeights] = u(a * N * K * elemBytes);
  r.spadWriteBytes[kOutputs] = u(M * N * elemBytes);
  return r;
}

ComputeResult vector_unit_cycles(JobKind, std::int64_t elems, std::int64_t lanes,
                                 std::int64_t elemBytes, int operands) {
  if (lanes < 1) throw ConfigError("vector unit needs at least one lane");
  ComputeResult r;
  if (elems <= 0) return r;
  r.cycles = u(ceil_div(elems, lanes));
  r.util.active = u(elems);
  r.util.capacity = r.cycles * u(lanes);
  r.spadReadBytes[kInputs] = u(elems * elemBytes * operands);
  r.spadWriteBytes[kOutputs] = u(elems * elemBytes);
  return r;
}

DataflowConstraints AcceleratorModel::constraints(const OperatorShape& op) const {
  DataflowConstraints c;
  c.channelGranularity = 8;
  c.minRows = op.kernelRows;
  c.minCols = op.kernelCols;
  return c;
}

TileLimits AcceleratorModel::limits(std::int64_t elemBytes) const {
  TileLimits l;
  l.inputElems = l.weightElems = l.outputElems = scratchpad_bytes() / elemBytes;
  l.kernelGranularity = kernel_granularity();
  return l;
}

namespace {

std::int64_t weight_limited_channels(const OperatorShape& op, std::int64_t spadElems,
                                     std::int64_t kernelsPerBlock, std::int64_t gran) {
  const std::int64_t kmin = std::min(op.kernels, kernelsPerBlock);
  std::int64_t ch = spadElems / (op.kernelRows * op.kernelCols * kmin);
  if (ch >= gran) ch -= ch % gran;
  return std::max<std::int64_t>(ch, 1);
}

// Splits the elementwise work of non-MACC operators onto the vector unit.
ComputeResult vector_job(const AcceleratorJob& job, std::int64_t lanes, std::int64_t spad) {
  require_fits("input", product(job.input) * job.elemBytes, spad);
  require_fits("output", product(job.output) * job.elemBytes, spad);
  return vector_unit_cycles(job.kind, product(job.output), lanes, job.elemBytes, job.operands);
}

}  // namespace

ConvEngineModel::ConvEngineModel(ConvEngineConfig cfg, std::string name)
    : cfg_(cfg), name_(std::move(name)) {
  if (cfg_.numPEs < 1 || cfg_.maccWidth < 1 || cfg_.scratchpadBytes < 1 || cfg_.clockHz == 0) {
    throw ConfigError("invalid conv engine configuration");
  }
}

ConvKernelJob conv_kernel_job(const AcceleratorJob& job) {
  ConvKernelJob k;
  k.batch = job.output[kN];
  k.IN_R = job.input[kH];
  k.IN_C = job.input[kW];
  k.IN_H = job.input[kC];
  k.WGT_R = job.kernelRows;
  k.WGT_C = job.kernelCols;
  k.OUT_R = job.output[kH];
  k.OUT_C = job.output[kW];
  k.kernels = job.output[kC];
  k.elemBytes = job.elemBytes;
  return k;
}

ComputeResult ConvEngineModel::run(const AcceleratorJob& job) const {
  switch (job.kind) {
    case JobKind::Convolution:
    case JobKind::InnerProduct: {
      const ConvKernelJob k = conv_kernel_job(job);
      return conv_engine_cycles(k, cfg_);
    }
    default: return vector_job(job, cfg_.vectorLanes, cfg_.scratchpadBytes);
  }
}

DataflowConstraints ConvEngineModel::constraints(const OperatorShape& op) const {
  if (op.kernels == 0) return AcceleratorModel::constraints(op);
  DataflowConstraints c;
  const std::int64_t C = op.input[kC];
  c.channelGranularity = C >= cfg_.maccWidth ? cfg_.maccWidth : C;
  c.minRows = op.kernelRows;
  c.minCols = op.kernelCols;
  c.maxChannels = weight_limited_channels(op, cfg_.scratchpadBytes / 2, cfg_.numPEs,
                                          cfg_.maccWidth);
  return c;
}

SystolicModel::SystolicModel(SystolicConfig cfg, std::string name)
    : cfg_(cfg), name_(std::move(name)) {
  if (cfg_.rows < 1 || cfg_.cols < 1 || cfg_.scratchpadBytes < 1 || cfg_.clockHz == 0) {
    throw ConfigError("invalid systolic array configuration");
  }
}

ComputeResult SystolicModel::run(const AcceleratorJob& job) const {
  switch (job.kind) {
    case JobKind::Convolution:
    case JobKind::InnerProduct: {
      require_fits("input", product(job.input) * job.elemBytes, cfg_.scratchpadBytes);
      require_fits("weight",
                   job.output[kC] * job.kernelRows * job.kernelCols * job.input[kC] * job.elemBytes,
                   cfg_.scratchpadBytes);
      require_fits("output", product(job.output) * job.elemBytes, cfg_.scratchpadBytes);
      const std::int64_t M = job.output[kN] * job.output[kH] * job.output[kW];
      const std::int64_t K = job.kernelRows * job.kernelCols * job.input[kC];
      return systolic_matmul_cycles(M, job.output[kC], K, cfg_, job.elemBytes);
    }
    default: return vector_job(job, cfg_.vectorLanes, cfg_.scratchpadBytes);
  }
}

DataflowConstraints SystolicModel::constraints(const OperatorShape& op) const {
  DataflowConstraints c = AcceleratorModel::constraints(op);
  if (op.kernels > 0) {
    c.maxChannels = weight_limited_channels(op, cfg_.scratchpadBytes / 2, cfg_.cols,
                                            c.channelGranularity);
  }
  return c;
}

ConstantLatencyModel::ConstantLatencyModel(std::string name, std::uint64_t cyclesPerJob,
                                           std::uint64_t clockHz, std::int64_t scratchpadBytes)
    : name_(std::move(name)), cycles_(cyclesPerJob), clockHz_(clockHz), spad_(scratchpadBytes) {
  if (clockHz_ == 0 || spad_ < 1) throw ConfigError("invalid constant-latency model");
}

ComputeResult ConstantLatencyModel::run(const AcceleratorJob& job) const {
  if (product(job.output) < 1) throw CapacityError("empty job");
  ComputeResult r;
  r.cycles = cycles_;
  r.util = {1, 1};
  r.spadReadBytes[kInputs] = u(product(job.input) * job.elemBytes * job.operands);
  r.spadWriteBytes[kOutputs] = u(product(job.output) * job.elemBytes);
  return r;
}

void ModelRegistry::register_model(const std::string& name,
                                   std::shared_ptr<const AcceleratorModel> model) {
  if (!model) throw Error("null accelerator model for '" + name + "'");
  if (!models_.emplace(name, std::move(model)).second) {
    throw Error("accelerator model '" + name + "' is already registered");
  }
}

std::shared_ptr<const AcceleratorModel> ModelRegistry::get(const std::string& name) const {
  auto it = models_.find(name);
  if (it == models_.end()) {
    std::string known;
    for (const auto& [n, m] : models_) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown accelerator backend '" + name + "' (registered: " + known + ")");
  }
  return it->second;
}

std::vector<std::string> ModelRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, m] : models_) out.push_back(n);
  return out;
}

ModelRegistry ModelRegistry::with_builtins(const ConvEngineConfig& conv,
                                           const SystolicConfig& systolic) {
  ModelRegistry r;
  r.register_model("nvdla-conv", std::make_shared<ConvEngineModel>(conv, "nvdla-conv"));
  r.register_model("systolic", std::make_shared<SystolicModel>(systolic, "systolic"));
  SystolicConfig fixed = systolic;
  fixed.rows = fixed.cols = 8;
  r.register_model("systolic-8x8", std::make_shared<SystolicModel>(fixed, "systolic-8x8"));
  return r;
}

AcceleratorJob job_for_unit(const TilingPlan& plan, const WorkUnit& unit, JobKind kind,
                            std::int64_t elemBytes) {
  AcceleratorJob j;
  j.kind = kind;
  j.input = plan.inputTiles.at(static_cast<std::size_t>(unit.inputTile)).shape;
  j.output = plan.outputTiles.at(static_cast<std::size_t>(unit.outputTile)).shape;
  if (kind == JobKind::Convolution || kind == JobKind::InnerProduct) {
    j.kernelRows = plan.op.kernelRows;
    j.kernelCols = plan.op.kernelCols;
  }
  j.elemBytes = elemBytes;
  j.operands = plan.op.operands;
  return j;
}

Utilization plan_utilization(const TilingPlan& plan, JobKind kind, const AcceleratorModel& model,
                             std::int64_t elemBytes) {
  Utilization total;
  for (const WorkUnit& unit : plan.units) {
    const ComputeResult r = model.run(job_for_unit(plan, unit, kind, elemBytes));
    total.active += r.util.active;
    total.capacity += r.util.capacity;
  }
  return total;
}

}  // namespace socsim
