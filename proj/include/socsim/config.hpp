#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "socsim/accel.hpp"
#include "socsim/memsys.hpp"
#include "socsim/sampling.hpp"

namespace socsim {

struct CpuConfig {
  std::int64_t cores = 8;
  std::uint64_t clockHz = 2'500'000'000;
};

struct AcceleratorsConfig {
  std::string backend = "nvdla-conv";
  std::int64_t count = 1;
  std::uint64_t clockHz = 1'000'000'000;
  std::int64_t scratchpadBytes = 32 * 1024;
  std::int64_t numPEs = 8;
  std::int64_t maccWidth = 32;
  std::int64_t weightLoadCycles = 1;
  std::int64_t systolicRows = 8;
  std::int64_t systolicCols = 8;
  std::int64_t commitCycles = 0;
  std::int64_t vectorLanes = 8;
  std::uint64_t stubCycles = 100;
};

struct SoftwareConfig {
  std::int64_t threadCount = 1;
  std::int64_t perCopyOverheadCycles = 120;
  std::int64_t copyBytesPerCycle = 8;
  std::int64_t layerOverheadCycles = 2000;
  std::int64_t perTaskOverheadCycles = 200;
  std::int64_t cpuCyclesPerElement = 4;  // operators without an accelerated kernel
};

struct PipelineConfig {
  double preStageLatencyMs = 0;
  double frameDeadlineMs = 0;
};

struct SoCConfig {
  CpuConfig cpu;
  AcceleratorsConfig accelerators;
  MemConfig memory;
  EnergyParams energy;
  SoftwareConfig software;
  /// Keyed "<backend>.<loop label>".
  std::map<std::string, Rational> sampling;
  std::optional<PipelineConfig> pipeline;

  void validate() const;

  ConvEngineConfig conv_engine() const;
  SystolicConfig systolic() const;
  CpuCopyConfig cpu_copy() const;
  /// Built-in models plus a constant-latency "stub" model.
  ModelRegistry registry() const;
  /// Sampling factors configured for one backend's loops.
  SamplingFactors sampling_for(const std::string& backend) const;
};

/// Parses INI text with sections [cpu] [accelerators] [memory] [software]
/// [sampling] [pipeline]. Missing keys keep their defaults; unknown keys are
/// errors.
SoCConfig parse_config(const std::string& text);
SoCConfig load_config(const std::string& path);
std::string write_config(const SoCConfig& cfg);

}  // namespace socsim
