#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "socsim/config.hpp"
#include "socsim/error.hpp"
#include "socsim/models.hpp"
#include "socsim/scheduler.hpp"

using namespace socsim;

namespace {

TilingPlan row_tiles(std::int64_t rows) {
  OperatorShape op;
  op.input = {1, rows, 8, 8};
  TileLimits lim;
  lim.inputElems = lim.weightElems = lim.outputElems = 64;
  return compute_tile_shapes(op, {TilingStrategy::DimNH, {1, 1, 8, 8}}, lim);
}

Graph relu_graph(const Dims4& shape) {
  GraphBuilder b("relu");
  auto x = b.input("input", shape);
  b.activation("relu", x, ActivationKind::Relu);
  return b.graph();
}

Graph five_groups() {
  GraphBuilder b("five");
  auto x = b.input("input", {1, 4, 4, 192});
  b.conv("conv", x, 40, 3, 3);
  return b.graph();
}

std::set<std::int64_t> busy_in_layer(const RunResult& r, std::int32_t layer) {
  std::set<std::int64_t> s;
  for (const auto& iv : utilization_timeline(r)) {
    if (iv.busy && iv.layer == layer) s.insert(iv.accelerator);
  }
  return s;
}

}  // namespace

TEST_CASE("layer task planning") {
  SUBCASE("16 independent tiles on 8 accelerators") {
    const TaskGraph tg = plan_layer(row_tiles(16), 8, 2);
    CHECK(tg.count(TaskKind::Prepare) == 16);
    CHECK(tg.count(TaskKind::Compute) == 16);
    CHECK(tg.count(TaskKind::Finalize) == 16);
    std::map<std::int64_t, int> perQueue;
    for (const auto& t : tg.tasks) {
      if (t.kind == TaskKind::Compute) ++perQueue[t.queue];
    }
    CHECK(perQueue.size() == 8);
    for (const auto& [q, n] : perQueue) CHECK(n == 2);
  }
  SUBCASE("one output tile keeps one accelerator busy") {
    CHECK(plan_layer(row_tiles(1), 8, 8).busy_accelerators() == 1);
  }
  SUBCASE("dependencies point backwards") {
    const TaskGraph tg = plan_layer(row_tiles(4), 2, 2);
    for (const auto& t : tg.tasks) {
      for (auto d : t.deps) CHECK(d < t.id);
      if (t.kind == TaskKind::Compute) CHECK_FALSE(t.deps.empty());
    }
  }
}

TEST_CASE("five reduction groups use five of eight accelerators") {
  SoCConfig cfg;
  cfg.accelerators.count = 8;
  const RunResult r = run_network(five_groups(), cfg);
  REQUIRE(r.layers.size() == 1);
  CHECK(r.layers[0].groups == 5);
  CHECK(r.layers[0].busyAccelerators == 5);
  CHECK(busy_in_layer(r, 0).size() == 5);
}

TEST_CASE("end-to-end runs") {
  const Graph g = cnn10_model();
  const SoCConfig base;
  const RunResult one = run_network(g, base);

  SUBCASE("breakdown partitions the run") {
    CHECK(one.total.computePs > 0);
    CHECK(one.total.transferPs > 0);
    CHECK(one.total.cpuPs > 0);
    CHECK(one.total.sum() == one.endTime.ps);
    std::uint64_t walls = 0;
    for (const auto& l : one.layers) {
      CHECK(l.breakdown.sum() == l.wall());
      walls += l.wall();
    }
    CHECK(walls == one.endTime.ps);
  }
  SUBCASE("eight accelerators") {
    SoCConfig c = base;
    c.accelerators.count = 8;
    const RunResult r = run_network(g, c);
    CHECK(r.endTime <= one.endTime);
    std::uint64_t busy1 = 0, busy8 = 0;
    for (const auto& e : one.trace.events()) {
      if (e.category == Category::AcceleratorCompute) busy1 += e.duration.ps;
    }
    for (const auto& e : r.trace.events()) {
      if (e.category == Category::AcceleratorCompute) busy8 += e.duration.ps;
    }
    CHECK(busy8 <= busy1);
    CHECK(r.acceleratorAgents.size() == 8);
    CHECK(r.traffic.dramBytes - one.traffic.dramBytes == r.broadcast_bytes());
  }
  SUBCASE("ACP removes cache maintenance") {
    SoCConfig c = base;
    c.memory.interface = InterfaceKind::ACP;
    const RunResult r = run_network(g, c);
    CHECK(r.flush_invalidate_events() == 0);
    CHECK(one.flush_invalidate_events() > 0);
    CHECK(r.transfer_ps() < one.transfer_ps());
  }
  SUBCASE("serial accelerator timeline covers all compute") {
    std::uint64_t busy = 0, compute = 0, idle = 0;
    for (const auto& iv : utilization_timeline(one)) {
      CHECK(iv.accelerator == 0);
      (iv.busy ? busy : idle) += iv.end.ps - iv.start.ps;
    }
    for (const auto& e : one.trace.events()) {
      if (e.category == Category::AcceleratorCompute) compute += e.duration.ps;
    }
    CHECK(busy == compute);
    CHECK(busy + idle == one.endTime.ps);
    CHECK(idle > 0);
  }
  SUBCASE("runs are deterministic") {
    const RunResult again = run_network(g, base);
    std::ostringstream a, b;
    one.trace.write(a);
    again.trace.write(b);
    CHECK(a.str() == b.str());
    CHECK(breakdown_csv(one) == breakdown_csv(again));
    CHECK(utilization_csv(one) == utilization_csv(again));
  }
}

TEST_CASE("constant-latency stub model") {
  SoCConfig cfg;
  cfg.accelerators.backend = "stub";
  const RunResult r = run_network(relu_graph({1, 4, 4, 8}), cfg);
  std::uint64_t cycles = 0;
  for (const auto& e : r.trace.events()) {
    if (e.category == Category::AcceleratorCompute) cycles += e.cycles;
  }
  CHECK(cycles == 100);
  CHECK(r.total.computePs + r.total.overlapPs >= 100'000);
}

TEST_CASE("copy makespan") {
  const SoCConfig cfg;
  MemConfig fast = cfg.memory;
  fast.dramBandwidth = 1'000'000'000'000ULL;
  const std::vector<MemcpyPlan> many(64, MemcpyPlan{16, 512, 2});
  const SimTime t1 = cpu_copy_time(many, 1, fast, cfg.cpu_copy());
  const SimTime t8 = cpu_copy_time(many, 8, fast, cfg.cpu_copy());
  const double ratio = static_cast<double>(t1.ps) / static_cast<double>(t8.ps);
  CHECK(ratio == doctest::Approx(8.0).epsilon(0.15));

  const std::vector<MemcpyPlan> single(1, MemcpyPlan{16, 512, 2});
  CHECK(cpu_copy_time(single, 1, fast, cfg.cpu_copy()) == cpu_copy_time(single, 8, fast, cfg.cpu_copy()));

  MemConfig slow = cfg.memory;
  slow.dramBandwidth = 1'000'000'000;
  const SimTime sat = cpu_copy_time(many, 8, slow, cfg.cpu_copy());
  std::uint64_t bytes = 0;
  for (const auto& p : many) bytes += static_cast<std::uint64_t>(p.bytes());
  CHECK(sat.ps >= bytes * 1000);
}

TEST_CASE("thread sweep on a many-tile layer") {
  SoCConfig cfg;
  cfg.memory.dramBandwidth = 1'000'000'000'000ULL;
  cfg.accelerators.count = 8;
  const auto rows = run_sweep(relu_graph({1, 32, 32, 256}), cfg, "threadCount", {"1", "2", "4", "8"});
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].run.cpu_copy_ps() <= rows[i - 1].run.cpu_copy_ps());
  }
  CHECK(rows.back().run.cpu_copy_ps() * 2 <= rows.front().run.cpu_copy_ps());
}

TEST_CASE("frame deadline") {
  const DeadlineReport d = pipeline_stage(ms_to_time(13.2), ms_to_time(33), ms_to_time(7.3));
  CHECK(d.total == ms_to_time(20.5));
  CHECK(d.slackPs == 12'500'000'000);
  CHECK_FALSE(d.violated);
  CHECK(pipeline_stage(ms_to_time(13.2), ms_to_time(33), ms_to_time(19.9)).violated);
  CHECK_FALSE(pipeline_stage(ms_to_time(13.2), ms_to_time(33), ms_to_time(19.8)).violated);
  const DeadlineReport z = pipeline_stage(SimTime{}, ms_to_time(33), ms_to_time(7.3));
  CHECK(z.total == ms_to_time(7.3));
  CHECK(ms_to_time(7.3).ps == 7'300'000'000);
}

TEST_CASE("sweeps") {
  SoCConfig cfg;
  SUBCASE("axis values") {
    apply_sweep_value(cfg, "systolicDims", "4x8");
    CHECK(cfg.accelerators.backend == "systolic");
    CHECK(cfg.accelerators.systolicRows == 4);
    CHECK(cfg.accelerators.systolicCols == 8);
    apply_sweep_value(cfg, "interface", "acp");
    CHECK(cfg.memory.interface == InterfaceKind::ACP);
    CHECK_THROWS_AS(apply_sweep_value(cfg, "systolicDims", "4x"), ConfigError);
    CHECK_THROWS_AS(apply_sweep_value(cfg, "acceleratorCount", "two"), ConfigError);
    CHECK_THROWS_AS(apply_sweep_value(cfg, "voltage", "1"), ConfigError);
  }
  SUBCASE("accelerator count column is non-increasing") {
    const auto rows = run_sweep(lenet5_model(), cfg, "acceleratorCount", {"1", "2", "4", "8"});
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].run.endTime <= rows[i - 1].run.endTime);
    const std::string csv = sweep_csv(rows);
    CHECK(csv.rfind("value,total_us,", 0) == 0);
    CHECK(csv.find("verdict") == std::string::npos);
  }
  SUBCASE("pipeline columns flag late frames") {
    cfg.pipeline = PipelineConfig{13.2, 13.3};
    const auto rows = run_sweep(lenet5_model(), cfg, "interface", {"dma", "acp"});
    for (const auto& r : rows) {
      REQUIRE(r.deadline);
      CHECK(r.deadline->violated == (r.deadline->total > ms_to_time(13.3)));
    }
    const std::string csv = sweep_csv(rows);
    CHECK(csv.find("verdict") != std::string::npos);
  }
}

TEST_CASE("report files") {
  const auto dir = std::filesystem::temp_directory_path() / "socsim-unit-reports";
  std::filesystem::remove_all(dir);
  const SoCConfig cfg;
  const RunResult r = run_network(minerva_model(), cfg);
  write_reports(r, cfg, dir.string());
  for (const char* f : {"stats.txt", "breakdown.csv", "utilization.csv", "trace.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(stats_text(r, cfg).find("total") != std::string::npos);
  const std::string csv = breakdown_csv(r);
  CHECK(csv.find("total") != std::string::npos);
}
