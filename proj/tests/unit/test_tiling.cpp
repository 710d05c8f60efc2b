#include "../oracles.hpp"
#include "doctest.h"
#include "socsim/accel.hpp"
#include "socsim/error.hpp"
#include "socsim/tiling.hpp"

using namespace socsim;

namespace {

std::optional<Candidate> find(const std::vector<Candidate>& cs, TilingStrategy s) {
  for (const auto& c : cs) {
    if (c.strategy == s) return c;
  }
  return std::nullopt;
}

TileLimits flat_limits(std::int64_t n) {
  TileLimits lim;
  lim.inputElems = lim.weightElems = lim.outputElems = n;
  return lim;
}

TilingPlan plan_for(const Dims4& t, std::int64_t maxTile, TilingStrategy s) {
  OperatorShape op;
  op.input = t;
  auto c = find(enumerate_strategies(t, maxTile, {}), s);
  REQUIRE(c);
  return compute_tile_shapes(op, *c, flat_limits(maxTile));
}

}  // namespace

TEST_CASE("strategy names") {
  CHECK(to_string(TilingStrategy::DimNCH) == "DimNCH");
  CHECK(parse_strategy("DimNHW") == TilingStrategy::DimNHW);
  CHECK_FALSE(parse_strategy("DimXY"));
  CHECK(splits(TilingStrategy::DimNC, kC));
  CHECK_FALSE(splits(TilingStrategy::DimNC, kH));
}

TEST_CASE("strategy enumeration") {
  SUBCASE("medium tensor") {
    const auto cs = enumerate_strategies({1, 16, 16, 128}, 16384, {});
    CHECK(find(cs, TilingStrategy::DimNC)->shape == Dims4{1, 16, 16, 64});
    CHECK(find(cs, TilingStrategy::DimNH)->shape == Dims4{1, 8, 16, 128});
  }
  SUBCASE("large tensor") {
    const auto cs = enumerate_strategies({1, 64, 64, 512}, 16384, {});
    CHECK(find(cs, TilingStrategy::DimNCH)->shape == Dims4{1, 32, 64, 8});
    CHECK(find(cs, TilingStrategy::DimNHW)->shape == Dims4{1, 1, 32, 512});
  }
  SUBCASE("a fitting tensor is one DimN tile") {
    const auto cs = enumerate_strategies({1, 4, 4, 8}, 16384, {});
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].strategy == TilingStrategy::DimN);
    CHECK(cs[0].shape == Dims4{1, 4, 4, 8});
  }
  SUBCASE("nothing fits") {
    DataflowConstraints dc;
    dc.minRows = dc.minCols = 3;
    dc.channelGranularity = 32;
    CHECK_THROWS_AS(enumerate_strategies({1, 8, 8, 64}, 100, dc), InfeasibleTilingError);
  }
}

TEST_CASE("memcpy arithmetic") {
  const TileSpec channel{{0, 0, 0, 0}, {1, 16, 16, 64}};
  const MemcpyPlan c = memcpy_plan({1, 16, 16, 128}, channel);
  CHECK(c.copyCount == 256);
  CHECK(c.runLengthElems == 64);
  CHECK(c.elements() == channel.elements());

  const TileSpec rows{{0, 8, 0, 0}, {1, 8, 16, 128}};
  const MemcpyPlan r = memcpy_plan({1, 16, 16, 128}, rows);
  CHECK(r.copyCount == 1);
  CHECK(r.runLengthElems == 16384);

  CHECK(total_copies({1, 16, 16, 128}, plan_for({1, 16, 16, 128}, 16384, TilingStrategy::DimNC).inputTiles) == 512);
  CHECK(total_copies({1, 16, 16, 128}, plan_for({1, 16, 16, 128}, 16384, TilingStrategy::DimNH).inputTiles) == 2);
  CHECK(total_copies({1, 64, 64, 512}, plan_for({1, 64, 64, 512}, 16384, TilingStrategy::DimNHW).inputTiles) == 128);
  CHECK(total_copies({1, 64, 64, 512}, plan_for({1, 64, 64, 512}, 16384, TilingStrategy::DimNCH).inputTiles) == 262144);

  CHECK_THROWS(memcpy_plan({1, 4, 4, 4}, TileSpec{{0, 2, 0, 0}, {1, 3, 4, 4}}));
}

TEST_CASE("memcpy plan agrees with a run-counting scan") {
  for (std::int64_t h = 1; h <= 6; ++h)
    for (std::int64_t w = 1; w <= 6; ++w)
      for (std::int64_t c = 1; c <= 6; ++c) {
        const Dims4 parent{2, h, w, c};
        for (std::int64_t oh = 0; oh < h; ++oh)
          for (std::int64_t sw = 1; sw <= w; ++sw)
            for (std::int64_t sc = 1; sc <= c; sc += 2) {
              const TileSpec t{{1, oh, w - sw, c - sc}, {1, h - oh, sw, sc}};
              const auto r = oracle::count_runs({2, h, w, c}, {1, oh, w - sw, c - sc}, {1, h - oh, sw, sc});
              const MemcpyPlan p = memcpy_plan(parent, t);
              REQUIRE(p.copyCount == r.count);
              REQUIRE(p.runLengthElems == r.maxLength);
              REQUIRE(r.minLength == r.maxLength);
            }
      }
}

TEST_CASE("tile shapes") {
  SUBCASE("row split of a 3x3 same convolution carries two halo rows per boundary") {
    OperatorShape op;
    op.input = {1, 8, 8, 32};
    op.kernelRows = op.kernelCols = 3;
    op.padding = Padding::Same;
    op.kernels = 8;
    TileLimits lim = flat_limits(1536);
    lim.weightElems = 16384;
    const TilingPlan p = compute_tile_shapes(op, {TilingStrategy::DimNH, {1, 6, 8, 32}}, lim);
    REQUIRE(p.inputTiles.size() == 2);
    CHECK(p.inputTiles[0].shape == Dims4{1, 5, 8, 32});
    CHECK(p.inputTiles[1].origin == Dims4{0, 3, 0, 0});
    CHECK(p.inputTiles[1].shape == Dims4{1, 5, 8, 32});
    CHECK(p.inputTiles[0].haloAfter[kH] + p.inputTiles[1].haloBefore[kH] == 2);
    REQUIRE(p.outputTiles.size() == 2);
    CHECK(p.outputTiles[0].shape == Dims4{1, 4, 8, 8});
    for (std::size_t i = 0; i < 2; ++i) {
      const auto cone = oracle::dependence_cone(4 * static_cast<std::int64_t>(i), 4 * static_cast<std::int64_t>(i) + 4, 3, 1, 1, 8);
      CHECK(p.inputTiles[i].origin[kH] == cone.first);
      CHECK(p.inputTiles[i].origin[kH] + p.inputTiles[i].shape[kH] == cone.second);
    }
  }
  SUBCASE("1x1 convolution has no halo") {
    OperatorShape op;
    op.input = {1, 16, 16, 32};
    op.kernels = 8;
    const TilingPlan p = compute_tile_shapes(op, {TilingStrategy::DimNH, {1, 4, 16, 32}}, flat_limits(2048));
    for (const auto& t : p.inputTiles) {
      CHECK(t.haloBefore == Dims4{});
      CHECK(t.haloAfter == Dims4{});
    }
  }
  SUBCASE("channel blocks reduce into one output tile") {
    OperatorShape op;
    op.input = {1, 16, 16, 128};
    op.kernels = 8;
    const TilingPlan p = compute_tile_shapes(op, {TilingStrategy::DimNC, {1, 16, 16, 64}}, flat_limits(16384));
    REQUIRE(p.reductionGroups.size() == p.outputTiles.size());
    for (const auto& g : p.reductionGroups) {
      REQUIRE(g.size() == 2);
      CHECK(p.units[static_cast<std::size_t>(g[0])].outputTile == p.units[static_cast<std::size_t>(g[1])].outputTile);
      CHECK(p.units[static_cast<std::size_t>(g[0])].inputTile != p.units[static_cast<std::size_t>(g[1])].inputTile);
    }
  }
  SUBCASE("strided valid pooling tiles cover the output") {
    OperatorShape op;
    op.input = {1, 15, 15, 16};
    op.kernelRows = op.kernelCols = 3;
    op.strideRows = op.strideCols = 2;
    op.padding = Padding::Valid;
    const TilingPlan p = compute_tile_shapes(op, {TilingStrategy::DimNH, {1, 5, 15, 16}}, flat_limits(1200));
    std::vector<std::pair<oracle::Dims, oracle::Dims>> outs;
    for (const auto& t : p.outputTiles) outs.emplace_back(t.origin, t.shape);
    CHECK(oracle::cover({1, 7, 7, 16}, outs).exact());
    for (const auto& u : p.units) {
      const auto& in = p.inputTiles[static_cast<std::size_t>(u.inputTile)];
      const auto& out = p.outputTiles[static_cast<std::size_t>(u.outputTile)];
      const auto cone = oracle::dependence_cone(out.origin[kH], out.origin[kH] + out.shape[kH], 3, 2, 0, 15);
      CHECK(in.origin[kH] == cone.first);
      CHECK(in.origin[kH] + in.shape[kH] == cone.second);
    }
  }
  SUBCASE("conv engine keeps interior channel counts a multiple of 32") {
    const ConvEngineModel m;
    OperatorShape op;
    op.input = {1, 16, 16, 96};
    op.kernelRows = op.kernelCols = 3;
    op.padding = Padding::Same;
    op.kernels = 32;
    const PlanChoice pc = plan_tiling(op, m.limits(2), m.constraints(op), [&](const TilingPlan& p) {
      return plan_utilization(p, JobKind::Convolution, m, 2);
    });
    for (const auto& p : pc.plans) {
      for (const auto& t : p.inputTiles) {
        if (t.origin[kC] + t.shape[kC] < 96) CHECK(t.shape[kC] % 32 == 0);
      }
      for (const auto& t : p.inputTiles) CHECK(t.elements() * 2 <= m.scratchpad_bytes());
    }
  }
}

TEST_CASE("strategy selection") {
  auto equal = [](const TilingPlan&) { return Utilization{1, 1}; };
  SUBCASE("medium tensor prefers rows") {
    OperatorShape op;
    op.input = {1, 16, 16, 128};
    const PlanChoice pc = plan_tiling(op, flat_limits(16384), {}, equal);
    CHECK(pc.plan().strategy == TilingStrategy::DimNH);
  }
  SUBCASE("large tensor prefers DimNHW over DimNCH") {
    OperatorShape op;
    op.input = {1, 64, 64, 512};
    std::vector<TilingPlan> plans{plan_for(op.input, 16384, TilingStrategy::DimNCH),
                                  plan_for(op.input, 16384, TilingStrategy::DimNHW)};
    CHECK(plans[select_strategy(plans, equal)].strategy == TilingStrategy::DimNHW);
  }
  SUBCASE("single candidate") {
    std::vector<TilingPlan> one{plan_for({1, 4, 4, 4}, 16384, TilingStrategy::DimN)};
    CHECK(select_strategy(one, equal) == 0);
  }
  SUBCASE("utilization outranks copy count") {
    std::vector<TilingPlan> plans{plan_for({1, 16, 16, 128}, 16384, TilingStrategy::DimNH),
                                  plan_for({1, 16, 16, 128}, 16384, TilingStrategy::DimNC)};
    auto favour_nc = [](const TilingPlan& p) {
      return p.strategy == TilingStrategy::DimNC ? Utilization{3, 4} : Utilization{1, 2};
    };
    CHECK(select_strategy(plans, favour_nc) == 1);
  }
}

TEST_CASE("untiling") {
  const Dims4 parent{1, 16, 16, 128};
  const auto rows = untile_plan(plan_for(parent, 16384, TilingStrategy::DimNH).inputTiles, parent);
  CHECK(rows.size() == 2);
  CHECK(rows[0].copyCount == 1);
  std::int64_t copies = 0, elems = 0;
  for (const auto& p : untile_plan(plan_for(parent, 16384, TilingStrategy::DimNC).inputTiles, parent)) {
    copies += p.copyCount;
    elems += p.elements();
    CHECK(p.runLengthElems == 64);
  }
  CHECK(copies == 512);
  CHECK(elems == product(parent));
  const auto whole = untile_plan({TileSpec{{0, 0, 0, 0}, parent}}, parent);
  CHECK(whole.size() == 1);
  CHECK(whole[0].copyCount == 1);
  const TileSpec a{{0, 0, 0, 0}, {1, 9, 16, 128}}, b{{0, 8, 0, 0}, {1, 8, 16, 128}};
  CHECK_THROWS_AS(untile_plan({a, b}, parent), ShapeError);
}
