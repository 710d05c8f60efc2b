#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "socsim/tiling.hpp"

namespace socsim {

enum class JobKind : std::uint8_t {
  Convolution,
  InnerProduct,
  Pooling,
  BatchNorm,
  Eltwise,
  Activation,
};

std::string_view to_string(JobKind k);

/// One work unit handed to an accelerator: a single input tile (per operand),
/// the matching weight block and the output tile it accumulates into.
struct AcceleratorJob {
  JobKind kind = JobKind::Convolution;
  Dims4 input{};   // NHWC tile shape
  Dims4 output{};  // NHWC tile shape; C is the kernel count for conv/FC
  std::int64_t kernelRows = 1;
  std::int64_t kernelCols = 1;
  std::int64_t elemBytes = 2;
  int operands = 1;
};

enum Scratchpad : int { kInputs = 0, kWeights = 1, kOutputs = 2 };

struct ComputeResult {
  std::uint64_t cycles = 0;
  std::array<std::uint64_t, 3> spadReadBytes{};
  std::array<std::uint64_t, 3> spadWriteBytes{};
  Utilization util;

  double utilization() const { return util.value(); }
};

struct ConvEngineConfig {
  std::int64_t numPEs = 8;
  std::int64_t maccWidth = 32;
  std::int64_t scratchpadBytes = 32 * 1024;  // per SRAM
  std::uint64_t clockHz = 1'000'000'000;
  std::int64_t weightLoadCycles = 1;
  std::int64_t vectorLanes = 8;
};

/// Loop bounds of the convolution engine's nest for one tile.
struct ConvKernelJob {
  std::int64_t IN_R = 1, IN_C = 1, IN_H = 32;
  std::int64_t WGT_R = 1, WGT_C = 1;
  std::int64_t OUT_R = 1, OUT_C = 1;
  std::int64_t kernels = 1;
  std::int64_t batch = 1;
  std::int64_t elemBytes = 2;
};

ComputeResult conv_engine_cycles(const ConvKernelJob& job, const ConvEngineConfig& cfg);
ConvKernelJob conv_kernel_job(const AcceleratorJob& job);
/// Inner product as a 1x1 convolution over a 1x1 output.
ComputeResult conv_engine_fc_cycles(std::int64_t inputWidth, std::int64_t outputs,
                                    const ConvEngineConfig& cfg, std::int64_t batch = 1);

struct SystolicConfig {
  std::int64_t rows = 8;
  std::int64_t cols = 8;
  std::int64_t scratchpadBytes = 32 * 1024;
  std::uint64_t clockHz = 1'000'000'000;
  std::int64_t commitCycles = 0;  // per pass
  std::int64_t vectorLanes = 8;
};

/// Output-stationary array computing an MxN result with reduction depth K.
ComputeResult systolic_matmul_cycles(std::int64_t M, std::int64_t N, std::int64_t K,
                                     const SystolicConfig& cfg, std::int64_t elemBytes = 2);

ComputeResult vector_unit_cycles(JobKind kind, std::int64_t elems, std::int64_t lanes = 8,
                                 std::int64_t elemBytes = 2, int operands = 1);

class AcceleratorModel {
 public:
  virtual ~AcceleratorModel() = default;

  virtual std::string name() const = 0;
  virtual std::uint64_t clock_hz() const = 0;
  virtual std::int64_t scratchpad_bytes() const = 0;
  virtual ComputeResult run(const AcceleratorJob& job) const = 0;

  /// Tile-search minima for an operator on this dataflow.
  virtual DataflowConstraints constraints(const OperatorShape& op) const;
  /// Kernel blocks are rounded to a multiple of this.
  virtual std::int64_t kernel_granularity() const { return 1; }

  TileLimits limits(std::int64_t elemBytes) const;
};

class ConvEngineModel final : public AcceleratorModel {
 public:
  explicit ConvEngineModel(ConvEngineConfig cfg = {}, std::string name = "nvdla-conv");

  std::string name() const override { return name_; }
  std::uint64_t clock_hz() const override { return cfg_.clockHz; }
  std::int64_t scratchpad_bytes() const override { return cfg_.scratchpadBytes; }
  ComputeResult run(const AcceleratorJob& job) const override;
  DataflowConstraints constraints(const OperatorShape& op) const override;
  std::int64_t kernel_granularity() const override { return cfg_.numPEs; }

  const ConvEngineConfig& config() const { return cfg_; }

 private:
  ConvEngineConfig cfg_;
  std::string name_;
};

class SystolicModel final : public AcceleratorModel {
 public:
  explicit SystolicModel(SystolicConfig cfg = {}, std::string name = "systolic");

  std::string name() const override { return name_; }
  std::uint64_t clock_hz() const override { return cfg_.clockHz; }
  std::int64_t scratchpad_bytes() const override { return cfg_.scratchpadBytes; }
  ComputeResult run(const AcceleratorJob& job) const override;
  DataflowConstraints constraints(const OperatorShape& op) const override;
  std::int64_t kernel_granularity() const override { return cfg_.cols; }

  const SystolicConfig& config() const { return cfg_; }

 private:
  SystolicConfig cfg_;
  std::string name_;
};

/// Charges a fixed number of cycles per job regardless of its size.
class ConstantLatencyModel final : public AcceleratorModel {
 public:
  ConstantLatencyModel(std::string name, std::uint64_t cyclesPerJob, std::uint64_t clockHz,
                       std::int64_t scratchpadBytes = 32 * 1024);

  std::string name() const override { return name_; }
  std::uint64_t clock_hz() const override { return clockHz_; }
  std::int64_t scratchpad_bytes() const override { return spad_; }
  ComputeResult run(const AcceleratorJob& job) const override;

 private:
  std::string name_;
  std::uint64_t cycles_;
  std::uint64_t clockHz_;
  std::int64_t spad_;
};

class ModelRegistry {
 public:
  /// Throws Error on a duplicate name.
  void register_model(const std::string& name, std::shared_ptr<const AcceleratorModel> model);
  std::shared_ptr<const AcceleratorModel> get(const std::string& name) const;
  bool contains(const std::string& name) const { return models_.count(name) != 0; }
  std::vector<std::string> names() const;

  /// "nvdla-conv", "systolic" (array dims from `systolic`) and "systolic-8x8".
  static ModelRegistry with_builtins(const ConvEngineConfig& conv = {},
                                     const SystolicConfig& systolic = {});

 private:
  std::map<std::string, std::shared_ptr<const AcceleratorModel>> models_;
};

/// Job for one work unit of a tiling plan.
AcceleratorJob job_for_unit(const TilingPlan& plan, const WorkUnit& unit, JobKind kind,
                            std::int64_t elemBytes = 2);

/// Utilization of a plan on a model, summed over its work units.
Utilization plan_utilization(const TilingPlan& plan, JobKind kind, const AcceleratorModel& model,
                             std::int64_t elemBytes = 2);

}  // namespace socsim
