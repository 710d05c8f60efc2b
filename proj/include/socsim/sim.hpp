#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <queue>
#include <string>
#include <vector>

namespace socsim {

/// Simulated time in integer picoseconds.
struct SimTime {
  std::uint64_t ps = 0;

  constexpr auto operator<=>(const SimTime&) const = default;

  static constexpr SimTime from_ps(std::uint64_t v) { return SimTime{v}; }
  double as_us() const { return static_cast<double>(ps) / 1e6; }
  double as_ms() const { return static_cast<double>(ps) / 1e9; }
};

inline constexpr std::uint64_t kMaxSimPs = std::uint64_t{1} << 63;

/// Checked addition; throws TimeOverflowError at or past 2^63 ps.
SimTime operator+(SimTime a, SimTime b);
SimTime operator-(SimTime a, SimTime b);

/// Converts a cycle count in a clock domain to picoseconds, rounding up.
SimTime cycles_to_time(std::uint64_t cycles, std::uint64_t clockHz);

/// Renders picoseconds as microseconds with six decimals ("0.017000").
std::string format_us(std::uint64_t ps);

using AgentId = std::uint32_t;

/// Deterministic event queue. Ties on time are broken by agent id, then by
/// insertion order.
class EventQueue {
 public:
  using Action = std::function<void()>;

  void schedule(SimTime when, AgentId agent, Action action);
  void schedule_after(SimTime delay, AgentId agent, Action action) {
    schedule(now_ + delay, agent, std::move(action));
  }

  /// Pops and runs exactly one event. Returns false when the queue is empty.
  bool advance();
  void run();

  SimTime now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t pending() const { return heap_.size(); }

 private:
  struct Entry {
    SimTime when;
    AgentId agent;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.when != b.when) return a.when > b.when;
      if (a.agent != b.agent) return a.agent > b.agent;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  SimTime now_{};
  std::uint64_t nextSeq_ = 0;
};

enum class Category : std::uint8_t {
  AcceleratorCompute,
  ScratchpadTransfer,
  DramTraffic,
  CpuCopy,
  CpuOther,
  FlushInvalidate,
};

std::string_view to_string(Category c);

struct SimEvent {
  SimTime start;
  SimTime duration;
  AgentId agent = 0;
  Category category = Category::CpuOther;
  std::int32_t layer = -1;  // index into Trace::layer_names(), -1 for none
  std::int64_t tile = -1;
  std::uint64_t bytes = 0;
  std::uint64_t cycles = 0;
  std::uint64_t llcAccesses = 0;
  std::uint64_t seq = 0;

  SimTime end() const { return start + duration; }
};

/// Collected simulation events plus the agent and layer name tables.
///
/// Exported as a Chrome trace-event JSON array written one record per line:
/// each record is a complete ("ph":"X") event whose args carry the schema
/// fields time_us, dur_us, agent, category, layer, tile, bytes. The closing
/// bracket is omitted, which trace viewers accept, so the file stays
/// line-oriented and diff-able.
class Trace {
 public:
  AgentId add_agent(std::string name);
  std::int32_t add_layer(std::string name);

  void record(SimEvent ev);

  const std::vector<SimEvent>& events() const { return events_; }
  /// Events ordered by (start, agent, sequence).
  std::vector<SimEvent> sorted_events() const;

  const std::string& agent_name(AgentId id) const { return agents_.at(id); }
  const std::vector<std::string>& agents() const { return agents_; }
  const std::vector<std::string>& layer_names() const { return layers_; }

  void write(std::ostream& os) const;
  void write_file(const std::string& path) const;

 private:
  std::vector<std::string> agents_;
  std::vector<std::string> layers_;
  std::vector<SimEvent> events_;
  std::uint64_t nextSeq_ = 0;
};

}  // namespace socsim
