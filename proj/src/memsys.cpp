#include "socsim/memsys.hpp"

#include <algorithm>
#include <limits>
#include <memory>
#include <unordered_set>

#include "socsim/error.hpp"

namespace socsim {

std::string_view to_string(InterfaceKind k) { return k == InterfaceKind::DMA ? "dma" : "acp"; }

InterfaceKind parse_interface(std::string_view s) {
  if (s == "dma" || s == "DMA") return InterfaceKind::DMA;
  if (s == "acp" || s == "ACP") return InterfaceKind::ACP;
  throw ConfigError("unknown interface '" + std::string(s) + "' (expected dma or acp)");
}

void MemConfig::validate() const {
  if (cachelineBytes < 1 || llcWays < 1 || llcBytes < 1) {
    throw ConfigError("cache geometry must be positive");
  }
  if (llcBytes % (cachelineBytes * llcWays) != 0) {
    throw ConfigError("llcBytes must be divisible by cachelineBytes * llcWays");
  }
  if (llcHitCycles < 0 || flushCyclesPerLine < 0 || invalidateCyclesPerLine < 0 ||
      dmaSetupCycles < 0) {
    throw ConfigError("memory latencies must be >= 0");
  }
  if (dramBandwidth == 0) throw ConfigError("dram bandwidth must be positive");
  if (dramChannels < 1) throw ConfigError("dram channels must be >= 1");
  if (acpWindow < 1) throw ConfigError("acp window must be >= 1");
}

void EnergyParams::validate() const {
  if (dramPjPerByte < 0 || llcPjPerAccess < 0 || spadPjPerByte < 0 || cpuCopyPjPerByte < 0) {
    throw ConfigError("energy coefficients must be >= 0");
  }
}

Llc::Llc(std::int64_t bytes, std::int64_t ways, std::int64_t lineBytes) : ways_(ways), line_(lineBytes) {
  if (bytes < 1 || ways < 1 || lineBytes < 1 || bytes % (ways * lineBytes) != 0) {
    throw ConfigError("invalid LLC geometry");
  }
  sets_.resize(static_cast<std::size_t>(bytes / (ways * lineBytes)));
}

bool Llc::access(std::uint64_t address) {
  const std::uint64_t line = address / static_cast<std::uint64_t>(line_);
  auto& set = sets_[line % sets_.size()];
  auto it = std::find(set.begin(), set.end(), line);
  if (it != set.end()) {
    std::rotate(set.begin(), it, it + 1);
    ++hits_;
    return true;
  }
  if (static_cast<std::int64_t>(set.size()) == ways_) set.pop_back();
  set.insert(set.begin(), line);
  ++misses_;
  return false;
}

bool Llc::contains(std::uint64_t address) const {
  const std::uint64_t line = address / static_cast<std::uint64_t>(line_);
  const auto& set = sets_[line % sets_.size()];
  return std::find(set.begin(), set.end(), line) != set.end();
}

void Llc::invalidate(std::uint64_t address) {
  const std::uint64_t line = address / static_cast<std::uint64_t>(line_);
  auto& set = sets_[line % sets_.size()];
  std::erase(set, line);
}

DramServer::DramServer(EventQueue& queue, std::uint64_t bytesPerSecond)
    : queue_(queue), capacity_(bytesPerSecond) {
  if (capacity_ == 0) throw ConfigError("dram bandwidth must be positive");
}

void DramServer::start_flow(std::uint64_t bytes, AgentId agent, std::uint64_t cap, Done done) {
  if (bytes == 0) {
    queue_.schedule(queue_.now(), agent, std::move(done));
    return;
  }
  drain();
  const std::uint64_t id = nextId_++;
  flows_.emplace(id, Flow{id, agent, cap, bytes, static_cast<u128>(bytes) * kPico, 0, std::move(done)});
  reallocate();
}

void DramServer::drain() {
  const SimTime now = queue_.now();
  const std::uint64_t dt = now.ps - lastDrain_.ps;
  if (dt > 0) {
    for (auto& [id, f] : flows_) {
      const u128 used = static_cast<u128>(f.rate) * dt;
      f.remaining = f.remaining > used ? f.remaining - used : 0;
    }
  }
  lastDrain_ = now;
}

void DramServer::reallocate() {
  const SimTime now = queue_.now();
  std::vector<Flow*> order;
  for (auto& [id, f] : flows_) order.push_back(&f);
  std::sort(order.begin(), order.end(), [](const Flow* a, const Flow* b) {
    const std::uint64_t ca = a->cap ? a->cap : std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t cb = b->cap ? b->cap : std::numeric_limits<std::uint64_t>::max();
    if (ca != cb) return ca < cb;
    if (a->agent != b->agent) return a->agent < b->agent;
    return a->id < b->id;
  });
  std::uint64_t left = capacity_;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::uint64_t fair = left / (order.size() - i);
    const std::uint64_t r = order[i]->cap && order[i]->cap < fair ? order[i]->cap : fair;
    order[i]->rate = r;
    left -= r;
    total += r;
  }

  // Close the segment that ran at the previous aggregate rate.
  if (!segments_.empty() && segments_.back().end.ps == std::numeric_limits<std::uint64_t>::max()) {
    segments_.back().end = now;
    if (segments_.back().start == now) segments_.pop_back();
  }
  if (total > 0) {
    segments_.push_back(Segment{now, SimTime{std::numeric_limits<std::uint64_t>::max()}, total});
  }

  ++generation_;
  std::uint64_t soonest = std::numeric_limits<std::uint64_t>::max();
  AgentId wakeAgent = 0;
  for (const auto& [id, f] : flows_) {
    if (f.rate == 0) continue;
    const u128 t = (f.remaining + f.rate - 1) / f.rate;
    if (t < soonest) {
      soonest = static_cast<std::uint64_t>(t);
      wakeAgent = f.agent;
    }
  }
  if (soonest != std::numeric_limits<std::uint64_t>::max()) {
    const std::uint64_t gen = generation_;
    queue_.schedule(now + SimTime{soonest}, wakeAgent, [this, gen] { on_wake(gen); });
  }
}

void DramServer::on_wake(std::uint64_t generation) {
  if (generation != generation_) return;
  drain();
  std::vector<Done> finished;
  for (auto it = flows_.begin(); it != flows_.end();) {
    if (it->second.remaining == 0) {
      served_ += it->second.bytes;
      finished.push_back(std::move(it->second.done));
      it = flows_.erase(it);
    } else {
      ++it;
    }
  }
  reallocate();
  for (auto& d : finished) {
    if (d) d();
  }
}

std::uint64_t TransferRequest::bytes() const {
  std::uint64_t n = 0;
  for (const auto& r : runs) n += r.bytes;
  return n;
}

std::vector<std::uint64_t> touched_lines(const std::vector<AddressRun>& runs,
                                         std::int64_t lineBytes) {
  const auto lb = static_cast<std::uint64_t>(lineBytes);
  std::vector<std::uint64_t> out;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& r : runs) {
    if (r.bytes == 0) continue;
    const std::uint64_t first = r.address / lb;
    const std::uint64_t last = (r.address + r.bytes - 1) / lb;
    for (std::uint64_t l = first; l <= last; ++l) {
      if (seen.insert(l).second) out.push_back(l * lb);
    }
  }
  return out;
}

EnergyReport energy_account(const TrafficCounters& c, const EnergyParams& p) {
  EnergyReport e;
  e.dramPj = static_cast<double>(c.dramBytes) * p.dramPjPerByte;
  e.llcPj = static_cast<double>(c.llcAccesses) * p.llcPjPerAccess;
  e.spadPj = static_cast<double>(c.spadBytes) * p.spadPjPerByte;
  e.cpuCopyPj = static_cast<double>(c.cpuCopyBytes) * p.cpuCopyPjPerByte;
  return e;
}

MemorySystem::MemorySystem(EventQueue& queue, Trace& trace, MemConfig cfg, CpuCopyConfig cpu)
    : queue_(queue),
      trace_(trace),
      cfg_(cfg),
      cpu_(cpu),
      llc_(cfg.llcBytes, cfg.llcWays, cfg.cachelineBytes),
      dram_(queue, cfg.dramBandwidth) {
  cfg_.validate();
  if (cpu_.cpuClockHz == 0 || cpu_.copyBytesPerCycle < 1 || cpu_.perCopyOverheadCycles < 0) {
    throw ConfigError("invalid CPU copy parameters");
  }
  dramAgent_ = trace_.add_agent("dram");
}

void MemorySystem::dram_flow(std::uint64_t bytes, AgentId agent, std::uint64_t cap,
                             std::int32_t layer, std::int64_t tile, Done done) {
  const SimTime start = queue_.now();
  dram_.start_flow(bytes, agent, cap, [this, start, bytes, layer, tile, done = std::move(done)] {
    if (bytes > 0) {
      SimEvent ev;
      ev.start = start;
      ev.duration = queue_.now() - start;
      ev.agent = dramAgent_;
      ev.category = Category::DramTraffic;
      ev.layer = layer;
      ev.tile = tile;
      ev.bytes = bytes;
      trace_.record(ev);
      counters_.dramBytes += bytes;
    }
    done();
  });
}

void MemorySystem::transfer(const TransferRequest& req, Done done) {
  if (cfg_.interface == InterfaceKind::DMA) {
    dma_transfer(req, std::move(done));
  } else {
    acp_transfer(req, std::move(done));
  }
}

void MemorySystem::dma_transfer(const TransferRequest& req, Done done) {
  const std::uint64_t bytes = req.bytes();
  if (bytes == 0) {
    queue_.schedule(queue_.now(), req.agent, std::move(done));
    return;
  }
  const std::vector<std::uint64_t> lines = touched_lines(req.runs, cfg_.cachelineBytes);
  const SimTime t0 = queue_.now();
  const SimTime setup = cpu_cycles(static_cast<std::uint64_t>(cfg_.dmaSetupCycles));
  const bool in = req.direction == Direction::ToScratchpad;
  const std::uint64_t perLine =
      static_cast<std::uint64_t>(in ? cfg_.flushCyclesPerLine : cfg_.invalidateCyclesPerLine);
  const SimTime maintenance = cpu_cycles(perLine * lines.size());

  SimEvent ev;
  ev.agent = req.agent;
  ev.layer = req.layer;
  ev.tile = req.tile;
  if (setup.ps > 0) {
    ev.start = t0;
    ev.duration = setup;
    ev.category = Category::ScratchpadTransfer;
    trace_.record(ev);
  }
  if (in) {
    counters_.flushLines += lines.size();
  } else {
    counters_.invalidateLines += lines.size();
    for (std::uint64_t a : lines) llc_.invalidate(a);
  }
  ev.start = t0 + setup;
  ev.duration = maintenance;
  ev.category = Category::FlushInvalidate;
  trace_.record(ev);

  const SimTime streamStart = t0 + setup + maintenance;
  queue_.schedule(streamStart, req.agent, [this, req, bytes, streamStart, done = std::move(done)] {
    dram_flow(bytes, req.agent, 0, req.layer, req.tile,
              [this, req, bytes, streamStart, done] {
                SimEvent s;
                s.start = streamStart;
                s.duration = queue_.now() - streamStart;
                s.agent = req.agent;
                s.category = Category::ScratchpadTransfer;
                s.layer = req.layer;
                s.tile = req.tile;
                s.bytes = bytes;
                trace_.record(s);
                counters_.transferBytes += bytes;
                counters_.spadBytes += bytes;
                done();
              });
  });
}

void MemorySystem::acp_transfer(const TransferRequest& req, Done done) {
  const std::uint64_t bytes = req.bytes();
  if (bytes == 0) {
    queue_.schedule(queue_.now(), req.agent, std::move(done));
    return;
  }
  struct State {
    std::vector<std::uint64_t> lines;
    std::size_t next = 0;
    std::size_t outstanding = 0;
    std::size_t completed = 0;
    SimTime start;
    std::uint64_t hits = 0;
    Done done;
    std::function<void()> issue;
  };
  auto st = std::make_shared<State>();
  st->lines = touched_lines(req.runs, cfg_.cachelineBytes);
  st->start = queue_.now();
  st->done = std::move(done);
  const SimTime hitLatency = cpu_cycles(static_cast<std::uint64_t>(cfg_.llcHitCycles));
  const auto line = static_cast<std::uint64_t>(cfg_.cachelineBytes);

  auto complete = [this, st, req, bytes] {
    --st->outstanding;
    ++st->completed;
    if (st->completed == st->lines.size()) {
      SimEvent s;
      s.start = st->start;
      s.duration = queue_.now() - st->start;
      s.agent = req.agent;
      s.category = Category::ScratchpadTransfer;
      s.layer = req.layer;
      s.tile = req.tile;
      s.bytes = bytes;
      s.llcAccesses = st->lines.size();
      trace_.record(s);
      counters_.transferBytes += bytes;
      counters_.spadBytes += bytes;
      Done d = std::move(st->done);
      st->issue = nullptr;  // break the self-reference
      d();
    } else {
      st->issue();
    }
  };

  st->issue = [this, st, req, hitLatency, line, complete] {
    while (st->outstanding < static_cast<std::size_t>(cfg_.acpWindow) &&
           st->next < st->lines.size()) {
      const std::uint64_t addr = st->lines[st->next++];
      ++st->outstanding;
      ++counters_.llcAccesses;
      if (llc_.access(addr)) {
        ++counters_.llcHits;
        queue_.schedule_after(hitLatency, req.agent, complete);
      } else {
        queue_.schedule_after(hitLatency, req.agent, [this, req, line, complete] {
          dram_flow(line, req.agent, 0, req.layer, req.tile, complete);
        });
      }
    }
  };
  st->issue();
}

void MemorySystem::cpu_copy(const CopyTask& task, Done done) {
  std::uint64_t bytes = 0;
  for (const auto& r : task.source) bytes += r.bytes;
  const SimTime start = queue_.now();

  std::uint64_t misses = 0;
  std::uint64_t accesses = 0;
  for (const auto* runs : {&task.source, &task.destination}) {
    for (std::uint64_t a : touched_lines(*runs, cfg_.cachelineBytes)) {
      ++accesses;
      if (!llc_.access(a)) ++misses;
    }
  }
  counters_.llcAccesses += accesses;
  counters_.llcHits += accesses - misses;
  const std::uint64_t missBytes = misses * static_cast<std::uint64_t>(cfg_.cachelineBytes);

  const auto bpc = static_cast<std::uint64_t>(cpu_.copyBytesPerCycle);
  const SimTime overhead =
      cpu_cycles(task.copyCount * static_cast<std::uint64_t>(cpu_.perCopyOverheadCycles));
  const SimTime stream = cpu_cycles((bytes + bpc - 1) / bpc);
  const std::uint64_t threadBandwidth = bpc * cpu_.cpuClockHz;

  struct Join {
    int pending = 2;
    Done done;
  };
  auto join = std::make_shared<Join>();
  auto finish = [this, join, task, bytes, start] {
    if (--join->pending > 0) return;
    SimEvent ev;
    ev.start = start;
    ev.duration = queue_.now() - start;
    ev.agent = task.agent;
    ev.category = Category::CpuCopy;
    ev.layer = task.layer;
    ev.tile = task.tile;
    ev.bytes = bytes;
    trace_.record(ev);
    counters_.cpuCopyBytes += bytes;
    Done d = std::move(join->done);
    d();
  };
  join->done = std::move(done);
  queue_.schedule(start + overhead, task.agent,
                  [this, task, stream, missBytes, threadBandwidth, finish] {
                    queue_.schedule_after(stream, task.agent, finish);
                    dram_flow(missBytes, task.agent, threadBandwidth, task.layer, task.tile, finish);
                  });
}

}  // namespace socsim
