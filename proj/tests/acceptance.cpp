// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "socsim/accel.hpp"
#include "socsim/config.hpp"
#include "socsim/error.hpp"
#include "socsim/graph.hpp"
#include "socsim/models.hpp"
#include "socsim/sampling.hpp"
#include "socsim/scheduler.hpp"
#include "socsim/tiling.hpp"

#ifndef SOCSIM_MODELS_DIR
#define SOCSIM_MODELS_DIR "models"
#endif

using namespace socsim;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

Graph bundled(const std::string& name) {
  return deserialize_model(std::string(SOCSIM_MODELS_DIR) + "/" + name).graph;
}

Dims4 d4(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) { return {n, h, w, c}; }

TilingPlan elementwise_plan(const Dims4& t, std::int64_t maxTile, TilingStrategy s) {
  OperatorShape op;
  op.input = t;
  TileLimits lim;
  lim.inputElems = lim.weightElems = lim.outputElems = maxTile;
  for (const auto& c : enumerate_strategies(t, maxTile, DataflowConstraints{})) {
    if (c.strategy == s) return compute_tile_shapes(op, c, lim);
  }
  throw Error("strategy not offered");
}

std::string str(std::uint64_t v) { return std::to_string(v); }

// 1 -------------------------------------------------------------------------
Outcome memcpy_arithmetic() {
  Outcome o;
  const Dims4 medium = d4(1, 16, 16, 128), large = d4(1, 64, 64, 512);
  auto totals = [](const TilingPlan& p) {
    const MemcpyPlan first = memcpy_plan(p.op.input, p.inputTiles.front());
    return std::make_pair(total_copies(p.op.input, p.inputTiles), first.runLengthElems);
  };
  const auto nc = totals(elementwise_plan(medium, 16384, TilingStrategy::DimNC));
  const auto nh = totals(elementwise_plan(medium, 16384, TilingStrategy::DimNH));
  const auto ch = totals(elementwise_plan(large, 16384, TilingStrategy::DimNCH));
  const auto hw = totals(elementwise_plan(large, 16384, TilingStrategy::DimNHW));
  o.require(nc == std::make_pair<std::int64_t, std::int64_t>(512, 64),
            "DimNC gave " + str(nc.first) + "x" + str(nc.second));
  o.require(nh == std::make_pair<std::int64_t, std::int64_t>(2, 16384),
            "DimNH gave " + str(nh.first) + "x" + str(nh.second));
  o.require(ch == std::make_pair<std::int64_t, std::int64_t>(262144, 8),
            "DimCH gave " + str(ch.first) + "x" + str(ch.second));
  o.require(hw == std::make_pair<std::int64_t, std::int64_t>(128, 16384),
            "DimHW gave " + str(hw.first) + "x" + str(hw.second));
  o.detail = o.pass ? "NC 512x64, NH 2x16384, CH 262144x8, HW 128x16384" : o.detail;
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome tiling_coverage() {
  Outcome o;
  std::uint64_t plans = 0, tiles = 0;
  auto box = [](const Dims4& a) { return oracle::Dims{a[0], a[1], a[2], a[3]}; };
  for (std::int64_t n = 1; n <= 16 && o.pass; ++n)
    for (std::int64_t h = 1; h <= 16 && o.pass; ++h)
      for (std::int64_t w = 1; w <= 16 && o.pass; ++w)
        for (std::int64_t c = 1; c <= 16 && o.pass; ++c) {
          const std::int64_t elems = n * h * w * c;
          if (elems > 4096) continue;
          const Dims4 t = d4(n, h, w, c);
          for (std::int64_t maxTile : {elems, std::max<std::int64_t>(16, elems / 3)}) {
            std::vector<Candidate> cands;
            try {
              cands = enumerate_strategies(t, maxTile, DataflowConstraints{});
            } catch (const InfeasibleTilingError&) {
              continue;
            }
            OperatorShape op;
            op.input = t;
            TileLimits lim;
            lim.inputElems = lim.weightElems = lim.outputElems = maxTile;
            for (const auto& cand : cands) {
              TilingPlan p;
              try {
                p = compute_tile_shapes(op, cand, lim);
              } catch (const InfeasibleTilingError&) {
                continue;
              }
              ++plans;
              std::vector<std::pair<oracle::Dims, oracle::Dims>> boxes;
              for (const auto& tile : p.inputTiles) {
                ++tiles;
                boxes.emplace_back(box(tile.origin), box(tile.shape));
                const oracle::Runs r = oracle::count_runs(box(t), box(tile.origin), box(tile.shape));
                const MemcpyPlan mp = memcpy_plan(t, tile);
                if (r.count != mp.copyCount || r.minLength != mp.runLengthElems ||
                    r.maxLength != mp.runLengthElems) {
                  o.require(false, "memcpy mismatch on " + format_dims(t) + " tile " +
                                       format_dims(tile.shape));
                }
              }
              if (!oracle::cover(box(t), boxes).exact()) {
                o.require(false, "coverage broken on " + format_dims(t) + " " +
                                     std::string(to_string(cand.strategy)));
              }
              std::vector<std::pair<oracle::Dims, oracle::Dims>> outs;
              for (const auto& tile : p.outputTiles) outs.emplace_back(box(tile.origin), box(tile.shape));
              if (!oracle::cover(box(p.op.output()), outs).exact()) {
                o.require(false, "output coverage broken on " + format_dims(t));
              }
            }
          }
        }
  // Windowed operators: cores partition the input and each tile spans the
  // dependence cone of its outputs.
  for (std::int64_t h = 3; h <= 16 && o.pass; ++h)
    for (std::int64_t w = 3; w <= 16 && o.pass; w += 3)
      for (std::int64_t c : {8, 16}) {
        const Dims4 t = d4(1, h, w, c);
        OperatorShape op;
        op.input = t;
        op.kernelRows = op.kernelCols = 3;
        op.padding = Padding::Same;
        const std::int64_t maxTile = std::max<std::int64_t>(3 * w * c, product(t) / 3);
        TileLimits lim;
        lim.inputElems = lim.weightElems = lim.outputElems = maxTile;
        DataflowConstraints dc;
        dc.minRows = dc.minCols = 3;
        std::vector<Candidate> cands;
        try {
          cands = enumerate_strategies(t, maxTile, dc);
        } catch (const InfeasibleTilingError&) {
          continue;
        }
        for (const auto& cand : cands) {
          TilingPlan p;
          try {
            p = compute_tile_shapes(op, cand, lim);
          } catch (const InfeasibleTilingError&) {
            continue;
          }
          ++plans;
          std::vector<std::pair<oracle::Dims, oracle::Dims>> cores;
          for (const auto& u : p.units) {
            const TileSpec& in = p.inputTiles[static_cast<std::size_t>(u.inputTile)];
            const TileSpec& out = p.outputTiles[static_cast<std::size_t>(u.outputTile)];
            const auto rows = oracle::dependence_cone(out.origin[kH], out.origin[kH] + out.shape[kH], 3, 1, 1, h);
            const auto cols = oracle::dependence_cone(out.origin[kW], out.origin[kW] + out.shape[kW], 3, 1, 1, w);
            if (in.origin[kH] != rows.first || in.origin[kH] + in.shape[kH] != rows.second ||
                in.origin[kW] != cols.first || in.origin[kW] + in.shape[kW] != cols.second) {
              o.require(false, "halo differs from dependence cone on " + format_dims(t));
            }
          }
          for (const auto& tile : p.inputTiles) {
            ++tiles;
            cores.emplace_back(box(tile.core_origin()), box(tile.core_shape()));
          }
          if (!oracle::cover(box(t), cores).exact()) {
            o.require(false, "windowed cores do not partition " + format_dims(t));
          }
        }
      }
  if (o.pass) o.detail = str(plans) + " plans, " + str(tiles) + " tiles checked";
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome conv_engine_oracle() {
  Outcome o;
  std::uint64_t cases = 0;
  for (std::int64_t k : {1, 2, 3})
    for (std::int64_t ch : {32, 64, 96})
      for (std::int64_t pes : {1, 8})
        for (std::int64_t kernels : {1, 8, 11})
          for (std::int64_t r = 1; r <= 8; ++r)
            for (std::int64_t c = 1; c <= 8; ++c) {
              ConvEngineConfig cfg;
              cfg.numPEs = pes;
              cfg.scratchpadBytes = 1 << 20;
              ConvKernelJob j;
              j.OUT_R = r;
              j.OUT_C = c;
              j.WGT_R = j.WGT_C = k;
              j.IN_R = r + k - 1;
              j.IN_C = c + k - 1;
              j.IN_H = ch;
              j.kernels = kernels;
              const ComputeResult got = conv_engine_cycles(j, cfg);
              oracle::ConvNest nest;
              nest.outR = r;
              nest.outC = c;
              nest.channels = ch;
              nest.kr = nest.kc = k;
              nest.kernels = kernels;
              nest.pes = pes;
              const auto ref = oracle::run_conv_nest(nest);
              ++cases;
              if (got.cycles != ref.cycles || got.util.active != ref.macs ||
                  got.util.capacity != ref.laneSlots) {
                o.require(false, "k" + str(k) + " ch" + str(ch) + " pe" + str(pes) + " out" + str(r) +
                                     "x" + str(c) + ": " + str(got.cycles) + " vs " + str(ref.cycles));
              }
            }
  if (o.pass) o.detail = str(cases) + " shapes match the loop-nest interpreter";
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome systolic_oracle() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uint64_t cases = 0;
  const std::pair<std::int64_t, std::int64_t> arrays[] = {{8, 8}, {4, 8}, {4, 4}};
  for (std::int64_t M = 1; M <= 16; ++M)
    for (std::int64_t N = 1; N <= 16; ++N)
      for (std::int64_t K = 1; K <= 16; ++K) {
        std::vector<std::int64_t> A(static_cast<std::size_t>(M * K)), B(static_cast<std::size_t>(K * N));
        for (auto& v : A) v = static_cast<std::int64_t>(rng() % 7) - 3;
        for (auto& v : B) v = static_cast<std::int64_t>(rng() % 7) - 3;
        std::vector<std::int64_t> expect(static_cast<std::size_t>(M * N), 0);
        for (std::int64_t i = 0; i < M; ++i)
          for (std::int64_t j = 0; j < N; ++j)
            for (std::int64_t k = 0; k < K; ++k)
              expect[static_cast<std::size_t>(i * N + j)] +=
                  A[static_cast<std::size_t>(i * K + k)] * B[static_cast<std::size_t>(k * N + j)];
        std::uint64_t prev = 0;
        for (const auto& [rows, cols] : arrays) {
          SystolicConfig cfg;
          cfg.rows = rows;
          cfg.cols = cols;
          const auto got = systolic_matmul_cycles(M, N, K, cfg);
          const auto ref = oracle::systolic_grid(M, N, K, rows, cols, 0, A, B);
          ++cases;
          if (got.cycles != ref.cycles || ref.C != expect) {
            o.require(false, str(M) + "x" + str(N) + "x" + str(K) + " on " + str(rows) + "x" +
                                 str(cols) + ": " + str(got.cycles) + " vs " + str(ref.cycles));
          }
          if (got.cycles < prev) o.require(false, "cycles decreased as the array shrank");
          prev = got.cycles;
        }
      }
  if (o.pass) o.detail = str(cases) + " (M,N,K,array) points match; monotone 8x8 -> 4x8 -> 4x4";
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome sampling() {
  Outcome o;
  // Uniform flat loop: 1024 iterations, 8 measured at 10 cycles.
  LoopTreeNode flat;
  flat.label = "loop";
  flat.measuredIterations = 8;
  flat.perIterationCycles.assign(8, 10);
  flat = set_sampling_factor(flat, "loop", Rational(128));
  o.require(unsample(flat) == 10240, "flat loop estimate " + str(unsample(flat)));

  LoopTreeNode pipe;
  pipe.label = "p";
  pipe.pipelined = true;
  pipe.measuredIterations = 2;
  pipe.perIterationCycles = {12, 3};
  pipe.factor = Rational(50);
  o.require(unsample(pipe) == 309, "pipelined estimate " + str(unsample(pipe)));

  // Small, medium and large conv shapes tiled for the conv engine; every tile sampled at the
  // maximum factor on every loop and compared with the full interpreter.
  struct Shape {
    const char* name;
    std::int64_t kernels, r, c;
  };
  const Shape shapes[] = {{"S", 16, 1, 8}, {"M", 64, 2, 16}, {"L", 256, 3, 64}};
  const ConvEngineModel model;
  SamplingFactors maxf;
  for (const char* l : {"round", "kr", "kc", "cb", "r", "c"}) maxf[l] = Rational(1'000'000);
  double worst = 0;
  for (const auto& s : shapes) {
    OperatorShape op;
    op.input = d4(1, 32, 32, s.c);
    op.kernelRows = op.kernelCols = s.r;
    op.kernels = s.kernels;
    op.padding = Padding::Valid;
    const PlanChoice choice = plan_tiling(op, model.limits(2), model.constraints(op), [&](const TilingPlan& p) {
      return plan_utilization(p, JobKind::Convolution, model, 2);
    });
    const TilingPlan& p = choice.plan();
    std::uint64_t full = 0, est = 0;
    for (const auto& u : p.units) {
      const AcceleratorJob job = job_for_unit(p, u, JobKind::Convolution);
      const ConvKernelJob kj = conv_kernel_job(job);
      oracle::ConvNest nest;
      nest.outR = kj.OUT_R;
      nest.outC = kj.OUT_C;
      nest.channels = kj.IN_H;
      nest.kr = kj.WGT_R;
      nest.kc = kj.WGT_C;
      nest.kernels = kj.kernels;
      nest.batch = kj.batch;
      full += oracle::run_conv_nest(nest).cycles;
      est += sample_conv_engine(kj, model.config(), maxf).estimatedCycles;
    }
    const double err = full ? std::abs(static_cast<double>(est) - static_cast<double>(full)) / full : 1.0;
    worst = std::max(worst, err);
    if (err > 0.06) o.require(false, std::string(s.name) + "-conv error " + std::to_string(err));
  }
  if (o.pass) {
    std::ostringstream os;
    os << "flat 10240, pipelined 309, worst S/M/L error " << worst * 100 << "%";
    o.detail = os.str();
  }
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome interface_direction() {
  Outcome o;
  std::ostringstream os;
  for (const auto& name : bundled_model_names()) {
    const Graph g = bundled(name);
    SoCConfig dma, acp;
    acp.memory.interface = InterfaceKind::ACP;
    const RunResult a = run_network(g, dma);
    const RunResult b = run_network(g, acp);
    o.require(b.flush_invalidate_events() == 0, name + ": ACP emitted flush/invalidate events");
    o.require(b.transfer_ps() < a.transfer_ps(), name + ": ACP transfer time not lower");
    o.require(b.traffic.dramBytes < a.traffic.dramBytes, name + ": ACP DRAM traffic not lower");
    o.require(b.energy.dramPj < a.energy.dramPj, name + ": ACP DRAM energy not lower");
    os << name << " transfer " << format_us(a.transfer_ps()) << "->" << format_us(b.transfer_ps())
       << " us; ";
  }
  if (o.pass) o.detail = os.str();
  return o;
}

Graph five_group_model() {
  GraphBuilder b("five_groups");
  auto x = b.input("input", {1, 4, 4, 192});
  b.conv("conv", x, 40, 3, 3);
  return b.graph();
}

// 7 -------------------------------------------------------------------------
Outcome accelerator_scaling() {
  Outcome o;
  const Graph g = bundled("cnn10");
  std::uint64_t prev = UINT64_MAX, base = 0;
  std::ostringstream os;
  for (std::int64_t k : {1, 2, 4, 8}) {
    SoCConfig cfg;
    cfg.accelerators.count = k;
    const RunResult r = run_network(g, cfg);
    o.require(r.endTime.ps <= prev, "latency increased at " + str(k) + " accelerators");
    prev = r.endTime.ps;
    if (k == 1) base = r.traffic.dramBytes;
    o.require(r.traffic.dramBytes - base == r.broadcast_bytes(),
              "DRAM increase " + str(r.traffic.dramBytes - base) + " != broadcast " +
                  str(r.broadcast_bytes()) + " at " + str(k));
    os << k << ":" << format_us(r.endTime.ps) << "us ";
  }
  const Graph five = five_group_model();
  SoCConfig one, eight;
  eight.accelerators.count = 8;
  const RunResult r1 = run_network(five, one);
  const RunResult r8 = run_network(five, eight);
  std::set<std::int64_t> busy;
  for (const auto& iv : utilization_timeline(r8)) {
    if (iv.busy && iv.layer == 0) busy.insert(iv.accelerator);
  }
  o.require(r8.layers.at(0).groups == 5, "synthetic layer has " + str(r8.layers.at(0).groups) + " groups");
  o.require(busy.size() == 5, "busy accelerators " + str(busy.size()));
  o.require(r8.traffic.dramBytes - r1.traffic.dramBytes == r8.broadcast_bytes(),
            "synthetic DRAM increase differs from broadcast bytes");
  if (o.pass) o.detail = os.str() + "; 5 groups -> 5 busy of 8; broadcast bytes exact";
  return o;
}

Graph relu_model(const std::string& name, const Dims4& shape) {
  GraphBuilder b(name);
  auto x = b.input("input", shape);
  b.activation("relu", x, ActivationKind::Relu);
  return b.graph();
}

// 8 -------------------------------------------------------------------------
Outcome thread_scaling() {
  Outcome o;
  SoCConfig cfg;
  cfg.memory.dramBandwidth = 1'000'000'000'000ULL;
  cfg.accelerators.count = 8;
  const Graph many = relu_model("many_tiles", d4(1, 32, 32, 1024));
  const Graph one = relu_model("one_tile", d4(1, 8, 8, 32));
  auto copy_time = [&](const Graph& g, std::int64_t threads, std::int64_t* tiles) {
    SoCConfig c = cfg;
    c.software.threadCount = threads;
    const RunResult r = run_network(g, c);
    if (tiles) *tiles = r.layers.at(0).inputTiles;
    return r.layers.at(0).cpuCopyPs;
  };
  std::int64_t tiles = 0;
  const auto t1 = copy_time(many, 1, &tiles);
  const auto t8 = copy_time(many, 8, nullptr);
  o.require(tiles >= 64, "layer has only " + str(tiles) + " tiles");
  o.require(2 * t8 <= t1, "8-thread copy time " + format_us(t8) + " vs " + format_us(t1));
  const auto s1 = copy_time(one, 1, nullptr);
  const auto s8 = copy_time(one, 8, nullptr);
  o.require(s1 == s8, "1-tile model changed with threads");

  std::vector<MemcpyPlan> plans(64, MemcpyPlan{16, 1024, 2});
  const SimTime c1 = cpu_copy_time(plans, 1, cfg.memory, cfg.cpu_copy());
  const SimTime c8 = cpu_copy_time(plans, 8, cfg.memory, cfg.cpu_copy());
  o.require(c8.ps * 8 <= c1.ps + c1.ps / 8 && c8.ps * 8 >= c1.ps - c1.ps / 8,
            "64 equal copies: 8 threads not ~1/8 of 1 thread");
  if (o.pass) {
    std::ostringstream os;
    os << tiles << "-tile layer " << format_us(t1) << " -> " << format_us(t8) << " us ("
       << static_cast<double>(t1) / t8 << "x); 1-tile unchanged";
    o.detail = os.str();
  }
  return o;
}

// 9 -------------------------------------------------------------------------
Outcome conservation() {
  Outcome o;
  for (const auto& name : bundled_model_names()) {
    const Graph g = bundled(name);
    for (auto iface : {InterfaceKind::DMA, InterfaceKind::ACP}) {
      for (std::int64_t k : {1, 4}) {
        SoCConfig cfg;
        cfg.memory.interface = iface;
        cfg.accelerators.count = k;
        cfg.software.threadCount = k;
        const RunResult r = run_network(g, cfg);
        std::uint64_t walls = 0;
        for (const auto& l : r.layers) {
          o.require(l.breakdown.sum() == l.wall(), name + "/" + l.name + ": breakdown != wall");
          walls += l.wall();
        }
        o.require(walls == r.endTime.ps, name + ": layer walls do not sum to total");
        o.require(r.total.sum() == r.endTime.ps, name + ": total breakdown != end time");
        std::uint64_t traced = 0;
        for (const auto& e : r.trace.events()) {
          if (e.category == Category::DramTraffic) traced += e.bytes;
        }
        o.require(traced == r.traffic.dramBytes, name + ": traced DRAM bytes differ");
        if (iface == InterfaceKind::DMA) {
          const std::uint64_t misses = r.traffic.llcAccesses - r.traffic.llcHits;
          o.require(r.traffic.dramBytes == r.traffic.transferBytes + misses * 32,
                    name + ": DMA DRAM bytes != transfers + copy misses");
        }
        for (const auto& s : r.dramSegments) {
          o.require(s.rate <= r.dramCapacity, name + ": DRAM served above capacity");
        }
        std::ostringstream t1, t2;
        r.trace.write(t1);
        run_network(g, cfg).trace.write(t2);
        o.require(t1.str() == t2.str(), name + ": traces differ between identical runs");
      }
    }
  }
  if (o.pass) o.detail = "partition, DRAM bytes and trace bytes exact on 12 runs";
  return o;
}

// 10 ------------------------------------------------------------------------
Outcome frame_deadline() {
  Outcome o;
  SoCConfig cfg;
  cfg.pipeline = PipelineConfig{13.2, 33.0};
  cfg.accelerators.clockHz = 100'000'000;
  const auto rows = run_sweep(bundled("cnn10"), cfg, "systolicDims", {"8x8", "4x8", "4x4"});
  std::uint64_t prev = 0;
  int flagged = 0;
  std::ostringstream os;
  const SimTime deadline = ms_to_time(33.0);
  for (const auto& row : rows) {
    const bool over = row.deadline->total > deadline;
    o.require(row.deadline->violated == over, row.value + ": verdict disagrees with total");
    o.require(row.run.endTime.ps > prev, row.value + ": DNN latency did not increase");
    prev = row.run.endTime.ps;
    flagged += over;
    os << row.value << " " << row.deadline->total.as_ms() << "ms" << (over ? "(late) " : " ");
  }
  o.require(flagged > 0 && flagged < 3, "sweep does not straddle the deadline");

  // Stub backend at 1 THz: one cycle is one picosecond. A one-job model's
  // latency is affine in the stub's cycle count, so calibrate to 7.3 ms.
  const Graph g = relu_model("stub_frame", d4(1, 8, 8, 32));
  SoCConfig stub;
  stub.accelerators.backend = "stub";
  stub.accelerators.clockHz = 1'000'000'000'000ULL;
  stub.accelerators.stubCycles = 1;
  const std::uint64_t base = run_network(g, stub).endTime.ps - 1;
  stub.accelerators.stubCycles = ms_to_time(7.3).ps - base;
  const RunResult r = run_network(g, stub);
  o.require(r.endTime == ms_to_time(7.3), "stub run took " + format_us(r.endTime.ps) + " us");
  const DeadlineReport d = pipeline_stage(ms_to_time(13.2), deadline, r.endTime);
  o.require(d.total == ms_to_time(20.5) && d.slackPs == 12'500'000'000 && !d.violated,
            "slack " + std::to_string(d.slackPs) + " ps");
  if (o.pass) o.detail = os.str() + "; stub 7.3 ms -> total 20.5 ms, slack 12.5 ms";
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"memcpy arithmetic", memcpy_arithmetic},
      {"tiling coverage oracle", tiling_coverage},
      {"conv-engine oracle", conv_engine_oracle},
      {"systolic oracle", systolic_oracle},
      {"sampling exactness and error bound", sampling},
      {"interface direction", interface_direction},
      {"multi-accelerator scaling", accelerator_scaling},
      {"thread scaling", thread_scaling},
      {"conservation and determinism", conservation},
      {"frame-deadline analysis", frame_deadline},
  };
  int failures = 0, id = 0;
  for (const auto& [name, fn] : criteria) {
    ++id;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
