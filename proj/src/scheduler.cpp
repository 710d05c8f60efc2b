#include "socsim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "socsim/error.hpp"
#include "socsim/sampling.hpp"

namespace socsim {

namespace {

std::uint64_t u(std::int64_t v) { return static_cast<std::uint64_t>(v); }
std::size_t z(std::int64_t v) { return static_cast<std::size_t>(v); }

std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

Dims4 flatten(const Dims4& d) { return {d[kN], 1, 1, d[kH] * d[kW] * d[kC]}; }

}  // namespace

OperatorMapping map_operator(const Graph& g, const OperatorNode& node) {
  OperatorMapping m;
  if (!node.outputs.empty()) m.output = node.outputs[0];
  auto act = [&](std::size_t i) { return as_nhwc(g.tensor(node.inputs.at(i))); };
  OperatorShape& s = m.shape;
  switch (node.kind) {
    case OpKind::Convolution: {
      const TensorDesc& w = g.tensor(node.inputs.at(1));
      m.accelerated = true;
      m.kind = JobKind::Convolution;
      s.input = act(0);
      s.kernels = w.dims[0];
      s.kernelRows = w.dims[1];
      s.kernelCols = w.dims[2];
      s.strideRows = node.attrs.stride[0];
      s.strideCols = node.attrs.stride[1];
      s.padding = node.attrs.padding;
      m.activations = {node.inputs[0]};
      m.weights = node.inputs[1];
      break;
    }
    case OpKind::InnerProduct: {
      const TensorDesc& w = g.tensor(node.inputs.at(1));
      m.accelerated = true;
      m.kind = JobKind::InnerProduct;
      s.input = flatten(act(0));
      s.kernels = w.dims[0];
      s.padding = Padding::Valid;
      m.activations = {node.inputs[0]};
      m.weights = node.inputs[1];
      break;
    }
    case OpKind::Pooling:
      m.accelerated = true;
      m.kind = JobKind::Pooling;
      s.input = act(0);
      s.kernelRows = node.attrs.kernel[0];
      s.kernelCols = node.attrs.kernel[1];
      s.strideRows = node.attrs.stride[0];
      s.strideCols = node.attrs.stride[1];
      s.padding = node.attrs.padding;
      m.activations = {node.inputs[0]};
      break;
    case OpKind::BatchNorm:
      m.accelerated = true;
      m.kind = JobKind::BatchNorm;
      s.input = act(0);
      s.channelParams = true;
      s.paramRows = 4;
      m.activations = {node.inputs[0]};
      m.weights = node.inputs[1];
      break;
    case OpKind::EltwiseAdd:
      m.accelerated = true;
      m.kind = JobKind::Eltwise;
      s.input = act(0);
      s.operands = 2;
      m.activations = {node.inputs[0], node.inputs[1]};
      break;
    case OpKind::Activation:
      m.accelerated = true;
      m.kind = JobKind::Activation;
      s.input = act(0);
      m.activations = {node.inputs[0]};
      break;
    case OpKind::Input:
    case OpKind::Reorder:
      for (const auto& in : node.inputs) m.activations.push_back(in);
      if (!node.inputs.empty()) s.input = act(0);
      break;
  }
  return m;
}

PlanChoice plan_operator(const OperatorMapping& m, const AcceleratorModel& model,
                         std::int64_t elemBytes) {
  if (!m.accelerated) throw Error("operator has no accelerated kernel");
  const JobKind kind = m.kind;
  return plan_tiling(m.shape, model.limits(elemBytes), model.constraints(m.shape),
                     [&](const TilingPlan& p) { return plan_utilization(p, kind, model, elemBytes); });
}

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Prepare: return "prepare";
    case TaskKind::Compute: return "compute";
    case TaskKind::Finalize: return "finalize";
  }
  return "?";
}

std::int64_t TaskGraph::count(TaskKind k) const {
  return std::count_if(tasks.begin(), tasks.end(), [k](const TileTask& t) { return t.kind == k; });
}

std::int64_t TaskGraph::busy_accelerators() const {
  std::set<std::int64_t> used;
  for (const auto& t : tasks) {
    if (t.kind == TaskKind::Compute) used.insert(t.queue);
  }
  return static_cast<std::int64_t>(used.size());
}

TaskGraph plan_layer(const TilingPlan& plan, std::int64_t accelerators, std::int64_t threads) {
  if (accelerators < 1 || threads < 1) throw ConfigError("need at least one accelerator and thread");
  TaskGraph tg;
  tg.accelerators = accelerators;
  tg.threads = threads;
  std::int64_t cursor = 0;
  const auto nIn = static_cast<std::int64_t>(plan.inputTiles.size());
  std::vector<std::vector<std::int64_t>> prep(z(plan.op.operands));
  for (int o = 0; o < plan.op.operands; ++o) {
    for (std::int64_t i = 0; i < nIn; ++i) {
      TileTask t;
      t.id = static_cast<std::int64_t>(tg.tasks.size());
      t.kind = TaskKind::Prepare;
      t.queue = cursor++ % threads;
      t.inputTile = i;
      t.operand = o;
      prep[z(o)].push_back(t.id);
      tg.tasks.push_back(t);
    }
  }
  std::vector<std::vector<std::int64_t>> groupTasks;
  for (std::size_t g = 0; g < plan.reductionGroups.size(); ++g) {
    const auto& group = plan.reductionGroups[g];
    std::vector<std::int64_t> ids;
    for (std::size_t j = 0; j < group.size(); ++j) {
      const WorkUnit& unit = plan.units.at(z(group[j]));
      TileTask t;
      t.id = static_cast<std::int64_t>(tg.tasks.size());
      t.kind = TaskKind::Compute;
      t.queue = static_cast<std::int64_t>(g) % accelerators;
      t.inputTile = unit.inputTile;
      t.weightTile = unit.weightTile;
      t.outputTile = unit.outputTile;
      t.group = static_cast<std::int64_t>(g);
      t.lastInGroup = j + 1 == group.size();
      for (int o = 0; o < plan.op.operands; ++o) t.deps.push_back(prep[z(o)].at(z(unit.inputTile)));
      ids.push_back(t.id);
      tg.tasks.push_back(t);
    }
    groupTasks.push_back(std::move(ids));
  }
  for (std::size_t g = 0; g < plan.reductionGroups.size(); ++g) {
    TileTask t;
    t.id = static_cast<std::int64_t>(tg.tasks.size());
    t.kind = TaskKind::Finalize;
    t.queue = cursor++ % threads;
    t.group = static_cast<std::int64_t>(g);
    t.outputTile = plan.units.at(z(plan.reductionGroups[g].front())).outputTile;
    t.deps = groupTasks[g];
    tg.tasks.push_back(t);
  }
  return tg;
}

std::uint64_t plan_transfer_bytes(const TilingPlan& plan, std::int64_t k, std::int64_t elemBytes) {
  const TaskGraph tg = plan_layer(plan, k, 1);
  struct Resident {
    std::int64_t input = -1;
    std::int64_t weight = -1;
  };
  std::vector<Resident> res(z(k));
  std::uint64_t bytes = 0;
  for (const TileTask& t : tg.tasks) {
    if (t.kind != TaskKind::Compute) continue;
    Resident& r = res[z(t.queue)];
    if (r.input != t.inputTile) {
      bytes += u(plan.inputTiles[z(t.inputTile)].elements() * elemBytes * plan.op.operands);
      r.input = t.inputTile;
    }
    if (t.weightTile >= 0 && r.weight != t.weightTile) {
      bytes += u(plan.weightTiles[z(t.weightTile)].elements() * elemBytes);
      r.weight = t.weightTile;
    }
    if (t.lastInGroup) bytes += u(plan.outputTiles[z(t.outputTile)].elements() * elemBytes);
  }
  return bytes;
}

std::uint64_t plan_broadcast_bytes(const TilingPlan& plan, std::int64_t k, std::int64_t elemBytes) {
  return plan_transfer_bytes(plan, k, elemBytes) - plan_transfer_bytes(plan, 1, elemBytes);
}

std::vector<AddressRun> tile_runs(std::uint64_t base, const Dims4& parent, const TileSpec& tile,
                                  std::int64_t elemBytes) {
  const MemcpyPlan mp = memcpy_plan(parent, tile, elemBytes);
  // Innermost dims that the tile spans completely form one contiguous run.
  int split = 3;
  while (split > 0 && tile.shape[split] == parent[split]) --split;
  std::vector<AddressRun> runs;
  runs.reserve(z(mp.copyCount));
  Dims4 idx{};
  const auto stride = [&](int d) {
    std::int64_t s = 1;
    for (int e = d + 1; e < 4; ++e) s *= parent[e];
    return s;
  };
  std::array<std::int64_t, 4> strides{stride(0), stride(1), stride(2), stride(3)};
  for (;;) {
    std::int64_t off = 0;
    for (int d = 0; d < 4; ++d) off += (tile.origin[d] + (d < split ? idx[d] : 0)) * strides[d];
    runs.push_back({base + u(off * elemBytes), u(mp.run_bytes())});
    int d = split - 1;
    while (d >= 0) {
      if (++idx[d] < tile.shape[d]) break;
      idx[d] = 0;
      --d;
    }
    if (d < 0) break;
  }
  return runs;
}

Breakdown& Breakdown::operator+=(const Breakdown& o) {
  computePs += o.computePs;
  transferPs += o.transferPs;
  cpuPs += o.cpuPs;
  overlapPs += o.overlapPs;
  return *this;
}

namespace {

int group_of(Category c) {
  switch (c) {
    case Category::AcceleratorCompute: return 0;
    case Category::ScratchpadTransfer:
    case Category::FlushInvalidate: return 1;
    case Category::CpuCopy:
    case Category::CpuOther: return 2;
    case Category::DramTraffic: return -1;
  }
  return -1;
}

// Length of the union of intervals of events accepted by `pick`.
template <typename Pick>
std::uint64_t union_length(const std::vector<SimEvent>& events, Pick pick) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> iv;
  for (const auto& e : events) {
    if (pick(e) && e.duration.ps > 0) iv.emplace_back(e.start.ps, e.end().ps);
  }
  std::sort(iv.begin(), iv.end());
  std::uint64_t total = 0, curS = 0, curE = 0;
  bool open = false;
  for (auto [s, e] : iv) {
    if (!open || s > curE) {
      if (open) total += curE - curS;
      curS = s;
      curE = e;
      open = true;
    } else {
      curE = std::max(curE, e);
    }
  }
  if (open) total += curE - curS;
  return total;
}

}  // namespace

Breakdown breakdown_of(const std::vector<SimEvent>& events, SimTime start, SimTime end) {
  struct Edge {
    std::uint64_t t;
    int group;
    int delta;
  };
  std::vector<Edge> edges;
  for (const auto& e : events) {
    const int g = group_of(e.category);
    if (g < 0 || e.duration.ps == 0) continue;
    const std::uint64_t s = std::max(e.start.ps, start.ps);
    const std::uint64_t f = std::min(e.end().ps, end.ps);
    if (s >= f) continue;
    edges.push_back({s, g, +1});
    edges.push_back({f, g, -1});
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.t < b.t; });
  Breakdown b;
  std::array<int, 3> active{};
  std::uint64_t t = start.ps;
  auto charge = [&](std::uint64_t until) {
    if (until <= t) return;
    const std::uint64_t d = until - t;
    const int n = (active[0] > 0) + (active[1] > 0) + (active[2] > 0);
    if (n >= 2) {
      b.overlapPs += d;
    } else if (active[0] > 0) {
      b.computePs += d;
    } else if (active[1] > 0) {
      b.transferPs += d;
    } else {
      b.cpuPs += d;
    }
    t = until;
  };
  for (const Edge& e : edges) {
    charge(e.t);
    active[z(e.group)] += e.delta;
  }
  charge(end.ps);
  return b;
}

std::uint64_t RunResult::cpu_copy_ps() const {
  std::uint64_t s = 0;
  for (const auto& l : layers) s += l.cpuCopyPs;
  return s;
}

std::uint64_t RunResult::transfer_ps() const {
  std::uint64_t s = 0;
  for (const auto& l : layers) s += l.transferPs;
  return s;
}

std::uint64_t RunResult::flush_invalidate_events() const {
  return std::count_if(trace.events().begin(), trace.events().end(),
                       [](const SimEvent& e) { return e.category == Category::FlushInvalidate; });
}

std::uint64_t RunResult::broadcast_bytes() const {
  std::uint64_t s = 0;
  for (const auto& l : layers) s += l.broadcastBytes;
  return s;
}

double RunResult::bandwidth_utilization() const {
  if (endTime.ps == 0 || dramCapacity == 0) return 0.0;
  return static_cast<double>(traffic.dramBytes) /
         (static_cast<double>(dramCapacity) * static_cast<double>(endTime.ps) * 1e-12);
}

namespace {

struct LayerSetup {
  const OperatorNode* node = nullptr;
  OperatorMapping map;
  std::optional<PlanChoice> choice;
  TaskGraph tasks;
  std::int64_t elemBytes = 2;
  std::uint64_t weightBase = 0;
  std::vector<std::uint64_t> weightTileAddr;
};

using Step = std::function<void(std::function<void()>)>;

void run_steps(std::shared_ptr<std::vector<Step>> steps, std::size_t i, std::function<void()> done) {
  if (i == steps->size()) {
    done();
    return;
  }
  (*steps)[i]([steps, i, done = std::move(done)]() mutable { run_steps(steps, i + 1, std::move(done)); });
}

class LayerExecutor {
 public:
  LayerExecutor(EventQueue& q, MemorySystem& mem, Trace& trace, const LayerSetup& L,
                const AcceleratorModel& model, const SamplingFactors& factors,
                const std::map<std::string, std::uint64_t>& addr,
                std::uint64_t arena, const std::vector<AgentId>& threads,
                const std::vector<AgentId>& accels, std::int32_t layer)
      : q_(q), mem_(mem), trace_(trace), L_(L), plan_(L.choice->plan()), model_(model),
        factors_(factors), addr_(addr), threads_(threads), accels_(accels), layer_(layer) {
    const auto& tasks = L_.tasks.tasks;
    remaining_.resize(tasks.size());
    dependents_.resize(tasks.size());
    for (const auto& t : tasks) {
      remaining_[z(t.id)] = static_cast<std::int64_t>(t.deps.size());
      for (auto d : t.deps) dependents_[z(d)].push_back(t.id);
    }
    threadQ_.resize(threads_.size());
    accelQ_.resize(accels_.size());
    threadBusy_.assign(threads_.size(), false);
    accelBusy_.assign(accels_.size(), false);
    resident_.assign(accels_.size(), Resident{});
    for (const auto& t : tasks) {
      if (t.kind == TaskKind::Compute) {
        accelQ_[z(t.queue)].push_back(t.id);
      } else {
        threadQ_[z(t.queue)].push_back(t.id);
      }
    }
    // Tile buffers: one per input tile and operand, then one per output tile.
    std::uint64_t a = arena;
    const auto E = u(L_.elemBytes);
    inBuf_.resize(z(plan_.op.operands));
    for (int o = 0; o < plan_.op.operands; ++o) {
      for (const auto& t : plan_.inputTiles) {
        inBuf_[z(o)].push_back(a);
        a = align_up(a + u(t.elements()) * E, 64);
      }
    }
    for (const auto& t : plan_.outputTiles) {
      outBuf_.push_back(a);
      a = align_up(a + u(t.elements()) * E, 64);
    }
  }

  void start() {
    for (std::size_t t = 0; t < threadQ_.size(); ++t) dispatch_thread(t);
    for (std::size_t a = 0; a < accelQ_.size(); ++a) dispatch_accel(a);
  }

 private:
  struct Resident {
    std::vector<std::int64_t> input = {-1, -1};
    std::int64_t weight = -1;
  };

  const TileTask& task(std::int64_t id) const { return L_.tasks.tasks[z(id)]; }

  void complete(std::int64_t id) {
    for (auto d : dependents_[z(id)]) {
      if (--remaining_[z(d)] == 0) {
        const TileTask& t = task(d);
        if (t.kind == TaskKind::Compute) {
          dispatch_accel(z(t.queue));
        } else {
          dispatch_thread(z(t.queue));
        }
      }
    }
  }

  void dispatch_thread(std::size_t th) {
    if (threadBusy_[th]) return;
    auto& dq = threadQ_[th];
    auto it = std::find_if(dq.begin(), dq.end(), [&](std::int64_t id) { return remaining_[z(id)] == 0; });
    if (it == dq.end()) return;
    const std::int64_t id = *it;
    dq.erase(it);
    threadBusy_[th] = true;
    const TileTask& t = task(id);
    CopyTask copy;
    copy.agent = threads_[th];
    copy.layer = layer_;
    const auto E = L_.elemBytes;
    if (t.kind == TaskKind::Prepare) {
      const std::string& tensor = L_.map.activations.at(z(t.operand));
      const Dims4 parent = plan_.op.input;
      const TileSpec& tile = plan_.inputTiles[z(t.inputTile)];
      copy.source = tile_runs(addr_.at(tensor), parent, tile, E);
      copy.destination = {{inBuf_[z(t.operand)][z(t.inputTile)], u(tile.elements() * E)}};
      copy.copyCount = copy.source.size();
      copy.tile = t.inputTile;
    } else {
      const Dims4 parent = plan_.op.output();
      const TileSpec& tile = plan_.outputTiles[z(t.outputTile)];
      copy.source = {{outBuf_[z(t.outputTile)], u(tile.elements() * E)}};
      copy.destination = tile_runs(addr_.at(L_.map.output), parent, tile, E);
      copy.copyCount = copy.destination.size();
      copy.tile = t.outputTile;
    }
    mem_.cpu_copy(copy, [this, th, id] {
      threadBusy_[th] = false;
      complete(id);
      dispatch_thread(th);
    });
  }

  void dispatch_accel(std::size_t a) {
    if (accelBusy_[a]) return;
    auto& dq = accelQ_[a];
    if (dq.empty() || remaining_[z(dq.front())] != 0) return;
    const std::int64_t id = dq.front();
    dq.pop_front();
    accelBusy_[a] = true;
    const TileTask& t = task(id);
    const auto E = L_.elemBytes;
    const AgentId agent = accels_[a];
    Resident& res = resident_[a];
    auto steps = std::make_shared<std::vector<Step>>();

    auto transfer = [this, agent, t](std::vector<AddressRun> runs, Direction dir, std::int64_t tile) {
      return Step([this, agent, runs = std::move(runs), dir, tile](std::function<void()> next) {
        TransferRequest req;
        req.runs = runs;
        req.direction = dir;
        req.agent = agent;
        req.layer = layer_;
        req.tile = tile;
        mem_.transfer(req, std::move(next));
      });
    };
    for (int o = 0; o < plan_.op.operands; ++o) {
      if (res.input[z(o)] != t.inputTile) {
        res.input[z(o)] = t.inputTile;
        const auto bytes = u(plan_.inputTiles[z(t.inputTile)].elements() * E);
        steps->push_back(transfer({{inBuf_[z(o)][z(t.inputTile)], bytes}}, Direction::ToScratchpad,
                                  t.inputTile));
      }
    }
    if (t.weightTile >= 0 && res.weight != t.weightTile) {
      res.weight = t.weightTile;
      const auto bytes = u(plan_.weightTiles[z(t.weightTile)].elements() * E);
      steps->push_back(transfer({{L_.weightTileAddr[z(t.weightTile)], bytes}},
                                Direction::ToScratchpad, t.weightTile));
    }
    steps->push_back([this, agent, t](std::function<void()> next) {
      WorkUnit unit{t.inputTile, t.weightTile, t.outputTile, t.group};
      const AcceleratorJob job = job_for_unit(plan_, unit, L_.map.kind, L_.elemBytes);
      ComputeResult r = model_.run(job);
      if (!factors_.empty() &&
          (job.kind == JobKind::Convolution || job.kind == JobKind::InnerProduct)) {
        if (const auto* ce = dynamic_cast<const ConvEngineModel*>(&model_)) {
          r.cycles = sample_conv_engine(conv_kernel_job(job), ce->config(), factors_).estimatedCycles;
        }
      }
      std::uint64_t spad = 0;
      for (int i = 0; i < 3; ++i) spad += r.spadReadBytes[z(i)] + r.spadWriteBytes[z(i)];
      mem_.add_scratchpad_bytes(spad);
      SimEvent ev;
      ev.start = q_.now();
      ev.duration = cycles_to_time(r.cycles, model_.clock_hz());
      ev.agent = agent;
      ev.category = Category::AcceleratorCompute;
      ev.layer = layer_;
      ev.tile = t.outputTile;
      ev.cycles = r.cycles;
      trace_.record(ev);
      q_.schedule_after(ev.duration, agent, std::move(next));
    });
    if (t.lastInGroup) {
      const auto bytes = u(plan_.outputTiles[z(t.outputTile)].elements() * E);
      steps->push_back(transfer({{outBuf_[z(t.outputTile)], bytes}}, Direction::FromScratchpad,
                                t.outputTile));
    }
    run_steps(steps, 0, [this, a, id] {
      accelBusy_[a] = false;
      complete(id);
      dispatch_accel(a);
    });
  }

  EventQueue& q_;
  MemorySystem& mem_;
  Trace& trace_;
  const LayerSetup& L_;
  const TilingPlan& plan_;
  const AcceleratorModel& model_;
  const SamplingFactors& factors_;
  const std::map<std::string, std::uint64_t>& addr_;
  const std::vector<AgentId>& threads_;
  const std::vector<AgentId>& accels_;
  std::int32_t layer_;

  std::vector<std::int64_t> remaining_;
  std::vector<std::vector<std::int64_t>> dependents_;
  std::vector<std::deque<std::int64_t>> threadQ_;
  std::vector<std::deque<std::int64_t>> accelQ_;
  std::vector<bool> threadBusy_;
  std::vector<bool> accelBusy_;
  std::vector<Resident> resident_;
  std::vector<std::vector<std::uint64_t>> inBuf_;
  std::vector<std::uint64_t> outBuf_;
};

}  // namespace

RunResult run_network(const Graph& graph, const SoCConfig& cfg) {
  return run_network(graph, cfg, cfg.registry());
}

RunResult run_network(const Graph& input, const SoCConfig& cfg, const ModelRegistry& registry) {
  cfg.validate();
  const Graph g = fuse_operators(infer_shapes(input));
  const std::vector<std::size_t> order = topo_schedule(g);
  const std::string backend = cfg.accelerators.backend;
  const auto model = registry.get(backend);
  const SamplingFactors factors = cfg.sampling_for(backend);
  const std::int64_t k = cfg.accelerators.count;
  const std::int64_t threads = cfg.software.threadCount;

  RunResult run;
  run.model = g.name;
  run.backend = backend;

  // Plan every layer up front.
  std::vector<LayerSetup> layers;
  for (std::size_t idx : order) {
    const OperatorNode& node = g.nodes[idx];
    if (node.kind == OpKind::Input) continue;
    LayerSetup L;
    L.node = &node;
    L.map = map_operator(g, node);
    if (!node.inputs.empty()) {
      L.elemBytes = static_cast<std::int64_t>(element_size(g.tensor(node.inputs[0]).dtype));
    }
    if (L.map.accelerated) {
      L.choice = plan_operator(L.map, *model, L.elemBytes);
      L.tasks = plan_layer(L.choice->plan(), k, threads);
    }
    layers.push_back(std::move(L));
  }

  // Address space: pre-tiled weights, then activations, then the tile arena.
  std::map<std::string, std::uint64_t> addr;
  std::uint64_t next = 0x1000;
  for (auto& L : layers) {
    if (!L.choice || L.map.weights.empty()) continue;
    L.weightBase = next;
    for (const auto& t : L.choice->plan().weightTiles) {
      L.weightTileAddr.push_back(next);
      next = align_up(next + u(t.elements() * L.elemBytes), 64);
    }
  }
  for (const auto& t : g.tensors) {
    if (g.is_parameter(t.name)) continue;
    addr[t.name] = next;
    next = align_up(next + u(t.bytes()), 64);
  }
  const std::uint64_t arena = align_up(next, 4096);

  EventQueue q;
  for (std::int64_t t = 0; t < threads; ++t) run.threadAgents.push_back(run.trace.add_agent("cpu" + std::to_string(t)));
  for (std::int64_t a = 0; a < k; ++a) {
    run.acceleratorAgents.push_back(run.trace.add_agent(backend + std::to_string(a)));
  }
  MemorySystem mem(q, run.trace, cfg.memory, cfg.cpu_copy());
  const auto cpuCycles = [&](std::uint64_t n) { return cycles_to_time(n, cfg.cpu.clockHz); };

  for (const auto& L : layers) {
    const std::int32_t li = run.trace.add_layer(L.node->name);
    LayerReport rep;
    rep.name = L.node->name;
    rep.kind = L.node->kind;
    rep.accelerated = L.map.accelerated;
    rep.start = q.now();

    std::uint64_t overhead = u(cfg.software.layerOverheadCycles);
    if (L.choice) {
      const TilingPlan& p = L.choice->plan();
      overhead += u(cfg.software.perTaskOverheadCycles) * L.tasks.tasks.size();
      rep.strategy = std::string(to_string(p.strategy));
      rep.inputTiles = static_cast<std::int64_t>(p.inputTiles.size());
      rep.outputTiles = static_cast<std::int64_t>(p.outputTiles.size());
      rep.units = static_cast<std::int64_t>(p.units.size());
      rep.groups = static_cast<std::int64_t>(p.reductionGroups.size());
      rep.busyAccelerators = L.tasks.busy_accelerators();
      rep.copies = p.input_copies() +
                   total_copies(p.op.output(), p.outputTiles);
      rep.broadcastBytes = plan_broadcast_bytes(p, k, L.elemBytes);
    } else {
      std::int64_t elems = 0;
      for (const auto& o : L.node->outputs) elems += g.tensor(o).elements();
      overhead += u(cfg.software.cpuCyclesPerElement * elems);
    }

    SimEvent ev;
    ev.start = q.now();
    ev.duration = cpuCycles(overhead);
    ev.agent = run.threadAgents[0];
    ev.category = Category::CpuOther;
    ev.layer = li;
    ev.cycles = overhead;
    run.trace.record(ev);

    std::unique_ptr<LayerExecutor> exec;
    if (L.choice) {
      exec = std::make_unique<LayerExecutor>(q, mem, run.trace, L, *model, factors, addr, arena,
                                             run.threadAgents, run.acceleratorAgents, li);
      LayerExecutor* e = exec.get();
      q.schedule(ev.end(), run.threadAgents[0], [e] { e->start(); });
    } else {
      q.schedule(ev.end(), run.threadAgents[0], [] {});
    }
    q.run();
    rep.end = q.now();

    std::vector<SimEvent> mine;
    for (const auto& e : run.trace.events()) {
      if (e.layer == li) mine.push_back(e);
    }
    rep.breakdown = breakdown_of(mine, rep.start, rep.end);
    rep.cpuCopyPs = union_length(mine, [](const SimEvent& e) { return e.category == Category::CpuCopy; });
    rep.transferPs = union_length(mine, [](const SimEvent& e) { return group_of(e.category) == 1; });
    run.total += rep.breakdown;
    run.layers.push_back(std::move(rep));
  }

  run.endTime = q.now();
  run.traffic = mem.counters();
  run.energy = energy_account(run.traffic, cfg.energy);
  run.dramCapacity = cfg.memory.dramBandwidth;
  run.dramSegments = mem.dram().segments();
  return run;
}

std::vector<BusyInterval> utilization_timeline(const RunResult& run) {
  std::vector<BusyInterval> out;
  for (std::size_t a = 0; a < run.acceleratorAgents.size(); ++a) {
    const AgentId agent = run.acceleratorAgents[a];
    std::vector<SimEvent> busy;
    for (const auto& e : run.trace.events()) {
      if (e.agent == agent && e.category == Category::AcceleratorCompute) busy.push_back(e);
    }
    std::sort(busy.begin(), busy.end(),
              [](const SimEvent& x, const SimEvent& y) { return x.start < y.start; });
    SimTime t{};
    const auto idx = static_cast<std::int64_t>(a);
    for (const auto& e : busy) {
      if (e.start > t) out.push_back({idx, t, e.start, false, -1, -1});
      out.push_back({idx, e.start, e.end(), true, e.layer, e.tile});
      t = std::max(t, e.end());
    }
    if (run.endTime > t) out.push_back({idx, t, run.endTime, false, -1, -1});
  }
  return out;
}

SimTime cpu_copy_time(const std::vector<MemcpyPlan>& plans, std::int64_t threads,
                      const MemConfig& memCfg, const CpuCopyConfig& cpu) {
  if (threads < 1) throw ConfigError("need at least one thread");
  EventQueue q;
  Trace trace;
  std::vector<AgentId> agents;
  for (std::int64_t t = 0; t < threads; ++t) agents.push_back(trace.add_agent("cpu" + std::to_string(t)));
  MemorySystem mem(q, trace, memCfg, cpu);

  std::uint64_t total = 0;
  for (const auto& p : plans) total += u(p.bytes());
  std::uint64_t src = 0x1000;
  std::uint64_t dst = align_up(src + total, 4096) + 4096;
  std::vector<std::deque<CopyTask>> queues(z(threads));
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const MemcpyPlan& p = plans[i];
    CopyTask c;
    c.agent = agents[i % agents.size()];
    c.copyCount = u(p.copyCount);
    c.tile = static_cast<std::int64_t>(i);
    for (std::int64_t r = 0; r < p.copyCount; ++r) {
      c.source.push_back({src, u(p.run_bytes())});
      src += u(p.run_bytes());
    }
    c.destination = {{dst, u(p.bytes())}};
    dst += u(p.bytes());
    queues[i % queues.size()].push_back(std::move(c));
  }
  std::function<void(std::size_t)> pump = [&](std::size_t t) {
    if (queues[t].empty()) return;
    CopyTask c = std::move(queues[t].front());
    queues[t].pop_front();
    mem.cpu_copy(c, [&pump, t] { pump(t); });
  };
  for (std::size_t t = 0; t < queues.size(); ++t) pump(t);
  q.run();
  return q.now();
}

SimTime ms_to_time(double ms) {
  if (!(ms >= 0) || !std::isfinite(ms)) throw ConfigError("time must be a finite non-negative value");
  return SimTime{static_cast<std::uint64_t>(std::llround(ms * 1e9))};
}

DeadlineReport pipeline_stage(SimTime preStage, SimTime deadline, SimTime dnn) {
  DeadlineReport r;
  r.total = preStage + dnn;
  r.slackPs = static_cast<std::int64_t>(deadline.ps) - static_cast<std::int64_t>(r.total.ps);
  r.violated = r.slackPs < 0;
  return r;
}

namespace {

std::string signed_ms(std::int64_t ps) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << static_cast<double>(ps) / 1e9;
  return os.str();
}

}  // namespace

std::string stats_text(const RunResult& run, const SoCConfig& cfg) {
  std::ostringstream os;
  os << "model: " << run.model << "\n"
     << "backend: " << run.backend << "\n"
     << "accelerators: " << cfg.accelerators.count << "\n"
     << "threads: " << cfg.software.threadCount << "\n"
     << "interface: " << to_string(cfg.memory.interface) << "\n"
     << "total_us: " << format_us(run.endTime.ps) << "\n"
     << "compute_us: " << format_us(run.total.computePs) << "\n"
     << "transfer_us: " << format_us(run.total.transferPs) << "\n"
     << "cpu_us: " << format_us(run.total.cpuPs) << "\n"
     << "overlap_us: " << format_us(run.total.overlapPs) << "\n"
     << "cpu_copy_busy_us: " << format_us(run.cpu_copy_ps()) << "\n"
     << "transfer_busy_us: " << format_us(run.transfer_ps()) << "\n"
     << "flush_invalidate_events: " << run.flush_invalidate_events() << "\n"
     << "dram_bytes: " << run.traffic.dramBytes << "\n"
     << "transfer_bytes: " << run.traffic.transferBytes << "\n"
     << "broadcast_bytes: " << run.broadcast_bytes() << "\n"
     << "llc_accesses: " << run.traffic.llcAccesses << "\n"
     << "llc_hits: " << run.traffic.llcHits << "\n"
     << "spad_bytes: " << run.traffic.spadBytes << "\n"
     << "cpu_copy_bytes: " << run.traffic.cpuCopyBytes << "\n"
     << "flush_lines: " << run.traffic.flushLines << "\n"
     << "invalidate_lines: " << run.traffic.invalidateLines << "\n"
     << std::fixed << std::setprecision(6)
     << "dram_bandwidth_utilization: " << run.bandwidth_utilization() << "\n"
     << std::setprecision(3)
     << "energy_dram_pj: " << run.energy.dramPj << "\n"
     << "energy_llc_pj: " << run.energy.llcPj << "\n"
     << "energy_spad_pj: " << run.energy.spadPj << "\n"
     << "energy_cpu_copy_pj: " << run.energy.cpuCopyPj << "\n"
     << "energy_total_pj: " << run.energy.total() << "\n";
  if (cfg.pipeline) {
    const SimTime pre = ms_to_time(cfg.pipeline->preStageLatencyMs);
    const SimTime deadline = ms_to_time(cfg.pipeline->frameDeadlineMs);
    const DeadlineReport d = pipeline_stage(pre, deadline, run.endTime);
    os << "pipeline_pre_stage_ms: " << signed_ms(static_cast<std::int64_t>(pre.ps)) << "\n"
       << "pipeline_dnn_ms: " << signed_ms(static_cast<std::int64_t>(run.endTime.ps)) << "\n"
       << "pipeline_total_ms: " << signed_ms(static_cast<std::int64_t>(d.total.ps)) << "\n"
       << "pipeline_deadline_ms: " << signed_ms(static_cast<std::int64_t>(deadline.ps)) << "\n"
       << "pipeline_slack_ms: " << signed_ms(d.slackPs) << "\n"
       << "pipeline_violated: " << (d.violated ? "yes" : "no") << "\n";
  }
  os << "\nlayer                 kind          strategy  tiles  units  accels  wall_us\n";
  for (const auto& l : run.layers) {
    os << std::left << std::setw(22) << l.name << std::setw(14) << to_string(l.kind)
       << std::setw(10) << (l.strategy.empty() ? "-" : l.strategy) << std::right << std::setw(5)
       << l.inputTiles << std::setw(7) << l.units << std::setw(8) << l.busyAccelerators << "  "
       << format_us(l.wall()) << "\n";
  }
  return os.str();
}

std::string breakdown_csv(const RunResult& run) {
  std::ostringstream os;
  os << "layer,kind,strategy,start_us,end_us,wall_us,compute_us,transfer_us,cpu_us,overlap_us,"
        "input_tiles,output_tiles,units,busy_accelerators,copies,broadcast_bytes\n";
  for (const auto& l : run.layers) {
    os << l.name << ',' << to_string(l.kind) << ',' << l.strategy << ',' << format_us(l.start.ps)
       << ',' << format_us(l.end.ps) << ',' << format_us(l.wall()) << ','
       << format_us(l.breakdown.computePs) << ',' << format_us(l.breakdown.transferPs) << ','
       << format_us(l.breakdown.cpuPs) << ',' << format_us(l.breakdown.overlapPs) << ','
       << l.inputTiles << ',' << l.outputTiles << ',' << l.units << ',' << l.busyAccelerators
       << ',' << l.copies << ',' << l.broadcastBytes << '\n';
  }
  os << "total,,," << format_us(0) << ',' << format_us(run.endTime.ps) << ','
     << format_us(run.endTime.ps) << ',' << format_us(run.total.computePs) << ','
     << format_us(run.total.transferPs) << ',' << format_us(run.total.cpuPs) << ','
     << format_us(run.total.overlapPs) << ",,,,,," << run.broadcast_bytes() << '\n';
  return os.str();
}

std::string utilization_csv(const RunResult& run) {
  std::ostringstream os;
  os << "accelerator,state,start_us,end_us,layer,tile\n";
  const auto& names = run.trace.layer_names();
  for (const auto& b : utilization_timeline(run)) {
    os << run.trace.agent_name(run.acceleratorAgents[z(b.accelerator)]) << ','
       << (b.busy ? "busy" : "idle") << ',' << format_us(b.start.ps) << ',' << format_us(b.end.ps)
       << ',' << (b.layer >= 0 ? names[z(b.layer)] : "") << ',';
    if (b.tile >= 0) os << b.tile;
    os << '\n';
  }
  return os.str();
}

void apply_sweep_value(SoCConfig& cfg, const std::string& axis, const std::string& value) {
  const auto integer = [&](const std::string& v) {
    std::size_t used = 0;
    long long n = 0;
    try {
      n = std::stoll(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError("bad value '" + v + "' for axis " + axis);
    return static_cast<std::int64_t>(n);
  };
  if (axis == "interface") {
    cfg.memory.interface = parse_interface(value);
  } else if (axis == "acceleratorCount") {
    cfg.accelerators.count = integer(value);
  } else if (axis == "threadCount") {
    cfg.software.threadCount = integer(value);
  } else if (axis == "systolicDims") {
    const auto x = value.find('x');
    if (x == std::string::npos) throw ConfigError("systolic dims must look like 8x8");
    cfg.accelerators.backend = "systolic";
    cfg.accelerators.systolicRows = integer(value.substr(0, x));
    cfg.accelerators.systolicCols = integer(value.substr(x + 1));
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "'");
  }
  cfg.validate();
}

std::vector<SweepRow> run_sweep(const Graph& graph, const SoCConfig& base, const std::string& axis,
                                const std::vector<std::string>& values) {
  std::vector<SweepRow> rows;
  for (const auto& v : values) {
    SweepRow row;
    row.value = v;
    row.config = base;
    apply_sweep_value(row.config, axis, v);
    row.run = run_network(graph, row.config);
    if (row.config.pipeline) {
      row.deadline = pipeline_stage(ms_to_time(row.config.pipeline->preStageLatencyMs),
                                    ms_to_time(row.config.pipeline->frameDeadlineMs), row.run.endTime);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  const bool deadline = !rows.empty() && rows.front().deadline.has_value();
  std::ostringstream os;
  os << "value,total_us,compute_us,transfer_us,cpu_us,overlap_us,prepare_finalize_us,"
        "transfer_busy_us,flush_invalidate_events,dram_bytes,energy_pj";
  if (deadline) os << ",pre_stage_ms,total_ms,deadline_ms,slack_ms,verdict";
  os << "\n";
  for (const auto& row : rows) {
    const RunResult& r = row.run;
    os << row.value << ',' << format_us(r.endTime.ps) << ',' << format_us(r.total.computePs) << ','
       << format_us(r.total.transferPs) << ',' << format_us(r.total.cpuPs) << ','
       << format_us(r.total.overlapPs) << ',' << format_us(r.cpu_copy_ps()) << ','
       << format_us(r.transfer_ps()) << ',' << r.flush_invalidate_events() << ','
       << r.traffic.dramBytes << ',' << std::fixed << std::setprecision(3) << r.energy.total();
    if (row.deadline) {
      const auto& p = *row.config.pipeline;
      os << ',' << signed_ms(static_cast<std::int64_t>(ms_to_time(p.preStageLatencyMs).ps)) << ','
         << signed_ms(static_cast<std::int64_t>(row.deadline->total.ps)) << ','
         << signed_ms(static_cast<std::int64_t>(ms_to_time(p.frameDeadlineMs).ps)) << ','
         << signed_ms(row.deadline->slackPs) << ',' << (row.deadline->violated ? "VIOLATED" : "ok");
    }
    os << "\n";
  }
  return os.str();
}

void write_reports(const RunResult& run, const SoCConfig& cfg, const std::string& outDir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(outDir, ec);
  if (ec) throw IoError("cannot create output directory '" + outDir + "': " + ec.message());
  auto put = [&](const std::string& name, const std::string& body) {
    const std::string path = (fs::path(outDir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << body;
    if (!f) throw IoError("failed writing '" + path + "'");
  };
  put("stats.txt", stats_text(run, cfg));
  put("breakdown.csv", breakdown_csv(run));
  put("utilization.csv", utilization_csv(run));
  run.trace.write_file((fs::path(outDir) / "trace.json").string());
}

}  // namespace socsim
