#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "socsim/accel.hpp"
#include "socsim/config.hpp"
#include "socsim/graph.hpp"
#include "socsim/memsys.hpp"
#include "socsim/sim.hpp"
#include "socsim/tiling.hpp"

namespace socsim {

/// How a graph operator maps onto the tiling and accelerator models.
struct OperatorMapping {
  bool accelerated = false;
  JobKind kind = JobKind::Convolution;
  OperatorShape shape;
  std::vector<std::string> activations;  // input activation tensors, one per operand
  std::string weights;                   // parameter tensor, if any
  std::string output;
};

OperatorMapping map_operator(const Graph& g, const OperatorNode& node);

/// Tiling for one operator on one accelerator model.
PlanChoice plan_operator(const OperatorMapping& m, const AcceleratorModel& model,
                         std::int64_t elemBytes = 2);

enum class TaskKind : std::uint8_t { Prepare, Compute, Finalize };

std::string_view to_string(TaskKind k);

struct TileTask {
  std::int64_t id = 0;
  TaskKind kind = TaskKind::Prepare;
  std::vector<std::int64_t> deps;
  std::int64_t queue = 0;  // accelerator index for compute, thread index otherwise
  std::int64_t inputTile = -1;
  std::int64_t operand = 0;
  std::int64_t weightTile = -1;
  std::int64_t outputTile = -1;
  std::int64_t group = -1;
  bool lastInGroup = false;
};

struct TaskGraph {
  std::vector<TileTask> tasks;
  std::int64_t accelerators = 1;
  std::int64_t threads = 1;

  std::int64_t count(TaskKind k) const;
  /// Accelerators that receive at least one compute task.
  std::int64_t busy_accelerators() const;
};

/// Prepare tasks per input tile and operand, dealt round-robin over threads;
/// one compute task per work unit with whole reduction groups dealt
/// round-robin over accelerators; one finalize task per output tile.
TaskGraph plan_layer(const TilingPlan& plan, std::int64_t accelerators, std::int64_t threads);

/// Bytes moved between memory and scratchpads when the plan runs on `k`
/// accelerators, skipping tiles already resident in a scratchpad.
std::uint64_t plan_transfer_bytes(const TilingPlan& plan, std::int64_t k,
                                  std::int64_t elemBytes = 2);

/// Extra bytes caused by sending shared tiles to several accelerators.
std::uint64_t plan_broadcast_bytes(const TilingPlan& plan, std::int64_t k,
                                   std::int64_t elemBytes = 2);

/// Contiguous address runs of a tile inside a tensor stored at `base`.
std::vector<AddressRun> tile_runs(std::uint64_t base, const Dims4& parent, const TileSpec& tile,
                                  std::int64_t elemBytes = 2);

/// Wall time of a layer split into exclusive categories. Time when two or
/// more categories are active counts as overlap; time when none is active is
/// CPU time. The four parts sum to the wall time.
struct Breakdown {
  std::uint64_t computePs = 0;
  std::uint64_t transferPs = 0;
  std::uint64_t cpuPs = 0;
  std::uint64_t overlapPs = 0;

  std::uint64_t sum() const { return computePs + transferPs + cpuPs + overlapPs; }
  Breakdown& operator+=(const Breakdown& o);
};

Breakdown breakdown_of(const std::vector<SimEvent>& events, SimTime start, SimTime end);

struct LayerReport {
  std::string name;
  OpKind kind = OpKind::Input;
  bool accelerated = false;
  std::string strategy;
  SimTime start;
  SimTime end;
  Breakdown breakdown;
  std::int64_t inputTiles = 0;
  std::int64_t outputTiles = 0;
  std::int64_t units = 0;
  std::int64_t groups = 0;
  std::int64_t busyAccelerators = 0;
  std::int64_t copies = 0;
  std::uint64_t cpuCopyPs = 0;  // time with at least one copy in flight
  std::uint64_t transferPs = 0;  // time with at least one transfer in flight
  std::uint64_t broadcastBytes = 0;

  std::uint64_t wall() const { return end.ps - start.ps; }
};

struct BusyInterval {
  std::int64_t accelerator = 0;
  SimTime start;
  SimTime end;
  bool busy = true;
  std::int32_t layer = -1;
  std::int64_t tile = -1;
};

struct RunResult {
  std::string model;
  std::string backend;
  Trace trace;
  std::vector<LayerReport> layers;
  Breakdown total;
  SimTime endTime;
  TrafficCounters traffic;
  EnergyReport energy;
  std::uint64_t dramCapacity = 0;
  std::vector<AgentId> threadAgents;
  std::vector<AgentId> acceleratorAgents;
  std::vector<DramServer::Segment> dramSegments;

  std::uint64_t cpu_copy_ps() const;
  std::uint64_t transfer_ps() const;
  std::uint64_t flush_invalidate_events() const;
  std::uint64_t broadcast_bytes() const;
  /// DRAM bytes over capacity times elapsed time.
  double bandwidth_utilization() const;
};

RunResult run_network(const Graph& graph, const SoCConfig& cfg);
RunResult run_network(const Graph& graph, const SoCConfig& cfg, const ModelRegistry& registry);

/// Per-accelerator busy and idle intervals over [0, endTime].
std::vector<BusyInterval> utilization_timeline(const RunResult& run);

/// Makespan of copy tasks dealt round-robin over `threads` CPU threads that
/// share the DRAM server. Caches start cold.
SimTime cpu_copy_time(const std::vector<MemcpyPlan>& plans, std::int64_t threads,
                      const MemConfig& mem, const CpuCopyConfig& cpu);

struct DeadlineReport {
  SimTime total;
  std::int64_t slackPs = 0;  // negative when the deadline is missed
  bool violated = false;
};

DeadlineReport pipeline_stage(SimTime preStage, SimTime deadline, SimTime dnn);
SimTime ms_to_time(double ms);

/// One run of a parameter sweep.
struct SweepRow {
  std::string value;
  SoCConfig config;
  RunResult run;
  std::optional<DeadlineReport> deadline;  // when the config has a [pipeline] section
};

/// Sets one sweep axis: interface, acceleratorCount, threadCount or
/// systolicDims ("RxC", which also selects the systolic backend).
void apply_sweep_value(SoCConfig& cfg, const std::string& axis, const std::string& value);
std::vector<SweepRow> run_sweep(const Graph& graph, const SoCConfig& base, const std::string& axis,
                                const std::vector<std::string>& values);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Writes stats.txt, breakdown.csv, utilization.csv and trace.json.
void write_reports(const RunResult& run, const SoCConfig& cfg, const std::string& outDir);
std::string stats_text(const RunResult& run, const SoCConfig& cfg);
std::string breakdown_csv(const RunResult& run);
std::string utilization_csv(const RunResult& run);

}  // namespace socsim
