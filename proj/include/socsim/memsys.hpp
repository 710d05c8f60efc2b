#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "socsim/sim.hpp"

namespace socsim {

enum class InterfaceKind : std::uint8_t { DMA, ACP };

std::string_view to_string(InterfaceKind k);
InterfaceKind parse_interface(std::string_view s);

struct MemConfig {
  std::int64_t cachelineBytes = 32;
  std::int64_t llcBytes = 2 * 1024 * 1024;
  std::int64_t llcWays = 16;
  std::int64_t llcHitCycles = 20;  // CPU clock
  std::uint64_t dramBandwidth = 25'600'000'000;  // bytes per second
  std::int64_t dramChannels = 4;
  InterfaceKind interface = InterfaceKind::DMA;
  std::int64_t flushCyclesPerLine = 21;
  std::int64_t invalidateCyclesPerLine = 21;
  std::int64_t dmaSetupCycles = 1000;
  std::int64_t acpWindow = 16;

  void validate() const;
};

/// Per-event energy coefficients in picojoules. Defaults are placeholders.
struct EnergyParams {
  double dramPjPerByte = 20.0;
  double llcPjPerAccess = 50.0;
  double spadPjPerByte = 1.0;
  double cpuCopyPjPerByte = 5.0;

  void validate() const;
};

/// Set-associative LRU cache. Each set is an MRU-first list of line tags.
class Llc {
 public:
  Llc(std::int64_t bytes, std::int64_t ways, std::int64_t lineBytes);

  /// Looks up and, on a miss, installs the line holding `address`.
  bool access(std::uint64_t address);
  bool contains(std::uint64_t address) const;
  void invalidate(std::uint64_t address);

  std::int64_t sets() const { return static_cast<std::int64_t>(sets_.size()); }
  std::int64_t ways() const { return ways_; }
  std::int64_t line_bytes() const { return line_; }
  std::uint64_t hits() const { return hits_; }
  std::uint64_t misses() const { return misses_; }

 private:
  std::vector<std::vector<std::uint64_t>> sets_;
  std::int64_t ways_;
  std::int64_t line_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

/// Fluid max-min fair-share bandwidth server. Every active flow receives an
/// equal share of the capacity unless its own cap is lower, in which case the
/// surplus is redistributed.
class DramServer {
 public:
  using Done = std::function<void()>;

  struct Segment {
    SimTime start;
    SimTime end;
    std::uint64_t rate;  // aggregate bytes per second over [start, end)
  };

  DramServer(EventQueue& queue, std::uint64_t bytesPerSecond);

  /// Starts a flow of `bytes`; `cap` of 0 means limited only by the server.
  void start_flow(std::uint64_t bytes, AgentId agent, std::uint64_t cap, Done done);

  std::uint64_t capacity() const { return capacity_; }
  std::uint64_t bytes_served() const { return served_; }
  std::size_t active_flows() const { return flows_.size(); }
  const std::vector<Segment>& segments() const { return segments_; }

 private:
  using u128 = unsigned __int128;
  static constexpr std::uint64_t kPico = 1'000'000'000'000ULL;

  struct Flow {
    std::uint64_t id;
    AgentId agent;
    std::uint64_t cap;
    std::uint64_t bytes;
    u128 remaining;  // picobytes
    std::uint64_t rate = 0;
    Done done;
  };

  void drain();
  void reallocate();
  void on_wake(std::uint64_t generation);

  EventQueue& queue_;
  std::uint64_t capacity_;
  std::map<std::uint64_t, Flow> flows_;
  std::uint64_t nextId_ = 0;
  std::uint64_t generation_ = 0;
  SimTime lastDrain_{};
  std::uint64_t served_ = 0;
  std::vector<Segment> segments_;
};

enum class Direction : std::uint8_t { ToScratchpad, FromScratchpad };

struct AddressRun {
  std::uint64_t address = 0;
  std::uint64_t bytes = 0;
};

struct TransferRequest {
  std::vector<AddressRun> runs;
  Direction direction = Direction::ToScratchpad;
  AgentId agent = 0;
  std::int32_t layer = -1;
  std::int64_t tile = -1;

  std::uint64_t bytes() const;
};

/// Whole lines touched by a set of runs, in first-touch order.
std::vector<std::uint64_t> touched_lines(const std::vector<AddressRun>& runs,
                                         std::int64_t lineBytes);

struct TrafficCounters {
  std::uint64_t dramBytes = 0;
  std::uint64_t llcAccesses = 0;
  std::uint64_t llcHits = 0;
  std::uint64_t spadBytes = 0;
  std::uint64_t cpuCopyBytes = 0;
  std::uint64_t flushLines = 0;
  std::uint64_t invalidateLines = 0;
  std::uint64_t transferBytes = 0;
};

struct EnergyReport {
  double dramPj = 0;
  double llcPj = 0;
  double spadPj = 0;
  double cpuCopyPj = 0;

  double total() const { return dramPj + llcPj + spadPj + cpuCopyPj; }
};

EnergyReport energy_account(const TrafficCounters& c, const EnergyParams& p);

/// A gather or scatter executed by a CPU thread.
struct CopyTask {
  std::vector<AddressRun> source;
  std::vector<AddressRun> destination;
  std::uint64_t copyCount = 0;
  AgentId agent = 0;
  std::int32_t layer = -1;
  std::int64_t tile = -1;
};

struct CpuCopyConfig {
  std::uint64_t cpuClockHz = 2'500'000'000;
  std::int64_t perCopyOverheadCycles = 120;
  std::int64_t copyBytesPerCycle = 8;
};

/// Memory-side timing: LLC, DRAM server and the accelerator interfaces.
/// Every operation records its events in the trace and invokes `done` from
/// the event loop when it completes.
class MemorySystem {
 public:
  using Done = std::function<void()>;

  MemorySystem(EventQueue& queue, Trace& trace, MemConfig cfg, CpuCopyConfig cpu);

  void transfer(const TransferRequest& req, Done done);
  void dma_transfer(const TransferRequest& req, Done done);
  void acp_transfer(const TransferRequest& req, Done done);
  void cpu_copy(const CopyTask& task, Done done);

  /// Scratchpad-internal traffic from compute jobs.
  void add_scratchpad_bytes(std::uint64_t bytes) { counters_.spadBytes += bytes; }

  const MemConfig& config() const { return cfg_; }
  const CpuCopyConfig& cpu_config() const { return cpu_; }
  const TrafficCounters& counters() const { return counters_; }
  Llc& llc() { return llc_; }
  const Llc& llc() const { return llc_; }
  DramServer& dram() { return dram_; }
  const DramServer& dram() const { return dram_; }
  AgentId dram_agent() const { return dramAgent_; }

 private:
  void dram_flow(std::uint64_t bytes, AgentId agent, std::uint64_t cap, std::int32_t layer,
                 std::int64_t tile, Done done);
  SimTime cpu_cycles(std::uint64_t n) const { return cycles_to_time(n, cpu_.cpuClockHz); }

  EventQueue& queue_;
  Trace& trace_;
  MemConfig cfg_;
  CpuCopyConfig cpu_;
  Llc llc_;
  DramServer dram_;
  TrafficCounters counters_;
  AgentId dramAgent_;
};

}  // namespace socsim
