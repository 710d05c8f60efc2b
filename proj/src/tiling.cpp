#include "socsim/tiling.hpp"

#include <algorithm>
#include <stdexcept>

#include "socsim/error.hpp"

namespace socsim {

std::string_view to_string(TilingStrategy s) {
  switch (s) {
    case TilingStrategy::DimN: return "DimN";
    case TilingStrategy::DimNC: return "DimNC";
    case TilingStrategy::DimNH: return "DimNH";
    case TilingStrategy::DimNW: return "DimNW";
    case TilingStrategy::DimNHW: return "DimNHW";
    case TilingStrategy::DimNCH: return "DimNCH";
    case TilingStrategy::DimNCW: return "DimNCW";
    case TilingStrategy::DimNCHW: return "DimNCHW";
  }
  return "?";
}

std::optional<TilingStrategy> parse_strategy(std::string_view s) {
  for (TilingStrategy t : kAllStrategies) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

bool splits(TilingStrategy s, int dim) {
  if (dim == kN) return true;
  const std::string_view name = to_string(s).substr(3);
  const char letter = dim == kH ? 'H' : dim == kW ? 'W' : 'C';
  return name.find(letter) != std::string_view::npos;
}

Dims4 TileSpec::core_origin() const {
  Dims4 o = origin;
  for (int d = 0; d < 4; ++d) o[d] += haloBefore[d];
  return o;
}

Dims4 TileSpec::core_shape() const {
  Dims4 s = shape;
  for (int d = 0; d < 4; ++d) s[d] -= haloBefore[d] + haloAfter[d];
  return s;
}

MemcpyPlan memcpy_plan(const Dims4& parent, const TileSpec& tile, std::int64_t elemSize) {
  for (int d = 0; d < 4; ++d) {
    if (tile.origin[d] < 0 || tile.shape[d] < 1 || tile.origin[d] + tile.shape[d] > parent[d]) {
      throw std::out_of_range("tile " + format_dims(tile.shape) + " at " +
                              format_dims(tile.origin) + " outside parent " + format_dims(parent));
    }
  }
  int split = -1;
  for (int d = 3; d >= 0; --d) {
    if (tile.shape[d] < parent[d]) {
      split = d;
      break;
    }
  }
  MemcpyPlan p;
  p.elemSize = elemSize;
  if (split < 0) {
    p.copyCount = 1;
    p.runLengthElems = product(parent);
    return p;
  }
  p.runLengthElems = tile.shape[split];
  for (int d = split + 1; d < 4; ++d) p.runLengthElems *= parent[d];
  p.copyCount = 1;
  for (int d = 0; d < split; ++d) p.copyCount *= tile.shape[d];
  return p;
}

std::int64_t total_copies(const Dims4& parent, const std::vector<TileSpec>& tiles) {
  std::int64_t n = 0;
  for (const auto& t : tiles) n += memcpy_plan(parent, t).copyCount;
  return n;
}

std::vector<MemcpyPlan> untile_plan(const std::vector<TileSpec>& outputTiles, const Dims4& parent,
                                    std::int64_t elemSize) {
  std::vector<bool> seen(static_cast<std::size_t>(product(parent)), false);
  std::vector<MemcpyPlan> out;
  out.reserve(outputTiles.size());
  for (const TileSpec& t : outputTiles) {
    out.push_back(memcpy_plan(parent, t, elemSize));
    for (std::int64_t n = 0; n < t.shape[kN]; ++n) {
      for (std::int64_t h = 0; h < t.shape[kH]; ++h) {
        for (std::int64_t w = 0; w < t.shape[kW]; ++w) {
          const std::int64_t row =
              (((t.origin[kN] + n) * parent[kH] + t.origin[kH] + h) * parent[kW] + t.origin[kW] +
               w) * parent[kC] + t.origin[kC];
          for (std::int64_t c = 0; c < t.shape[kC]; ++c) {
            auto ref = seen[static_cast<std::size_t>(row + c)];
            if (ref) {
              throw ShapeError("output tiles overlap inside " + format_dims(parent) + " at tile " +
                               format_dims(t.origin));
            }
            ref = true;
          }
        }
      }
    }
  }
  return out;
}

std::vector<Candidate> enumerate_strategies(const Dims4& t, std::int64_t maxTileElems,
                                            const DataflowConstraints& c) {
  if (maxTileElems < 1) throw InfeasibleTilingError("tile budget must be positive");
  const auto channelsOk = [&](std::int64_t ch) { return c.maxChannels == 0 || ch <= c.maxChannels; };
  if (product(t) <= maxTileElems && channelsOk(t[kC])) return {Candidate{TilingStrategy::DimN, t}};

  std::vector<Candidate> out;
  for (TilingStrategy s : kAllStrategies) {
    Dims4 shape = t;
    shape[kN] = 1;
    if (s != TilingStrategy::DimN) {
      for (int d : {int(kC), int(kH), int(kW)}) {
        if (!splits(s, d)) continue;
        const std::int64_t others = product(shape) / shape[d];
        const std::int64_t gran = d == kC ? std::max<std::int64_t>(c.channelGranularity, 1) : 1;
        const std::int64_t floorMin = d == kC ? gran : d == kH ? c.minRows : c.minCols;
        const std::int64_t minimum = std::clamp<std::int64_t>(floorMin, 1, t[d]);
        std::int64_t v = std::min(maxTileElems / others, t[d]);
        if (d == kC && c.maxChannels > 0) v = std::min(v, c.maxChannels);
        if (v < t[d]) v -= v % gran;
        if (v >= minimum) {
          shape[d] = v;
          if (product(shape) <= maxTileElems && channelsOk(shape[kC])) break;
        } else {
          shape[d] = minimum;
        }
      }
    }
    if (product(shape) > maxTileElems || !channelsOk(shape[kC])) continue;
    bool degenerate = false;
    for (int d : {int(kC), int(kH), int(kW)}) {
      if (splits(s, d) && shape[d] == t[d]) degenerate = true;
    }
    if (degenerate) continue;
    shape[kN] = std::min(t[kN], maxTileElems / product(shape));
    if (s == TilingStrategy::DimN && shape[kN] == t[kN]) continue;
    out.push_back(Candidate{s, shape});
  }
  if (out.empty()) {
    throw InfeasibleTilingError(
        "no tiling strategy fits tensor " + format_dims(t) + " into " +
        std::to_string(maxTileElems) + " elements (channel granularity " +
        std::to_string(c.channelGranularity) + ", minimum window " + std::to_string(c.minRows) +
        "x" + std::to_string(c.minCols) +
        (c.maxChannels ? ", weight-limited to " + std::to_string(c.maxChannels) + " channels" : "") +
        ")");
  }
  return out;
}

Dims4 OperatorShape::output() const {
  const std::int64_t ho = window_output_extent(input[kH], kernelRows, strideRows, padding);
  const std::int64_t wo = window_output_extent(input[kW], kernelCols, strideCols, padding);
  return {input[kN], ho, wo, kernels > 0 ? kernels : input[kC]};
}

std::int64_t TilingPlan::max_input_tile_elems() const {
  std::int64_t m = 0;
  for (const auto& t : inputTiles) m = std::max(m, t.elements());
  return m;
}

std::int64_t TilingPlan::input_copies() const {
  return total_copies(op.input, inputTiles) * op.operands;
}

namespace {

struct Span {
  std::int64_t lo, hi;
};

std::vector<Span> split_even(std::int64_t extent, std::int64_t step) {
  std::vector<Span> out;
  for (std::int64_t lo = 0; lo < extent; lo += step) out.push_back({lo, std::min(extent, lo + step)});
  return out;
}

struct WindowRange {
  Span tile;
  Span core;
};

// Input rows needed by output rows [o.lo, o.hi), widened so the cores of all
// chunks partition [0, in).
WindowRange input_range(Span o, std::int64_t in, std::int64_t window, std::int64_t stride,
                        std::int64_t pad, bool first, bool last) {
  const Span core{first ? 0 : o.lo * stride, last ? in : o.hi * stride};
  const std::int64_t coneLo = o.lo * stride - pad;
  const std::int64_t coneHi = (o.hi - 1) * stride - pad + window;
  return {{std::max<std::int64_t>(0, std::min(coneLo, core.lo)),
           std::min(in, std::max(coneHi, core.hi))},
          core};
}

struct Extents {
  std::int64_t n, rows, cols;
};

std::optional<TilingPlan> build_plan(const OperatorShape& op, const Candidate& cand,
                                     const TileLimits& lim, Extents e, std::int64_t kb) {
  const Dims4 in = op.input;
  const Dims4 out = op.output();
  const std::int64_t cb = cand.shape[kC];
  const std::int64_t padTop = window_pad_before(in[kH], op.kernelRows, op.strideRows, op.padding);
  const std::int64_t padLeft = window_pad_before(in[kW], op.kernelCols, op.strideCols, op.padding);

  const auto nChunks = split_even(in[kN], e.n);
  const auto rowChunks = split_even(out[kH], e.rows);
  const auto colChunks = split_even(out[kW], e.cols);
  const auto cBlocks = split_even(in[kC], cb);
  std::vector<WindowRange> rows, cols;
  for (std::size_t i = 0; i < rowChunks.size(); ++i) {
    rows.push_back(input_range(rowChunks[i], in[kH], op.kernelRows, op.strideRows, padTop, i == 0,
                               i + 1 == rowChunks.size()));
  }
  for (std::size_t i = 0; i < colChunks.size(); ++i) {
    cols.push_back(input_range(colChunks[i], in[kW], op.kernelCols, op.strideCols, padLeft, i == 0,
                               i + 1 == colChunks.size()));
  }

  TilingPlan p;
  p.strategy = cand.strategy;
  p.maxTileElems = lim.inputElems / op.operands;
  p.op = op;
  for (const Span& n : nChunks) {
    for (const WindowRange& r : rows) {
      for (const WindowRange& c : cols) {
        for (const Span& ch : cBlocks) {
          TileSpec t;
          t.origin = {n.lo, r.tile.lo, c.tile.lo, ch.lo};
          t.shape = {n.hi - n.lo, r.tile.hi - r.tile.lo, c.tile.hi - c.tile.lo, ch.hi - ch.lo};
          t.haloBefore = {0, r.core.lo - r.tile.lo, c.core.lo - c.tile.lo, 0};
          t.haloAfter = {0, r.tile.hi - r.core.hi, c.tile.hi - c.core.hi, 0};
          if (t.elements() > p.maxTileElems) return std::nullopt;
          p.inputTiles.push_back(t);
        }
      }
    }
  }
  const auto inputIndex = [&](std::size_t n, std::size_t r, std::size_t c, std::size_t b) {
    return static_cast<std::int64_t>(((n * rows.size() + r) * cols.size() + c) * cBlocks.size() + b);
  };

  if (op.kernels > 0) {
    const auto kBlocks = split_even(op.kernels, kb);
    p.weightDims = {op.kernels, op.kernelRows, op.kernelCols, in[kC]};
    for (const Span& k : kBlocks) {
      for (const Span& ch : cBlocks) {
        TileSpec w;
        w.origin = {k.lo, 0, 0, ch.lo};
        w.shape = {k.hi - k.lo, op.kernelRows, op.kernelCols, ch.hi - ch.lo};
        if (w.elements() > lim.weightElems) return std::nullopt;
        p.weightTiles.push_back(w);
      }
    }
    for (std::size_t k = 0; k < kBlocks.size(); ++k) {
      for (std::size_t n = 0; n < nChunks.size(); ++n) {
        for (std::size_t r = 0; r < rowChunks.size(); ++r) {
          for (std::size_t c = 0; c < colChunks.size(); ++c) {
            TileSpec o;
            o.origin = {nChunks[n].lo, rowChunks[r].lo, colChunks[c].lo, kBlocks[k].lo};
            o.shape = {nChunks[n].hi - nChunks[n].lo, rowChunks[r].hi - rowChunks[r].lo,
                       colChunks[c].hi - colChunks[c].lo, kBlocks[k].hi - kBlocks[k].lo};
            if (o.elements() > lim.outputElems) return std::nullopt;
            const auto outIdx = static_cast<std::int64_t>(p.outputTiles.size());
            p.outputTiles.push_back(o);
            std::vector<std::int64_t> group;
            for (std::size_t b = 0; b < cBlocks.size(); ++b) {
              group.push_back(static_cast<std::int64_t>(p.units.size()));
              p.units.push_back(WorkUnit{inputIndex(n, r, c, b),
                                         static_cast<std::int64_t>(k * cBlocks.size() + b), outIdx,
                                         outIdx});
            }
            p.reductionGroups.push_back(std::move(group));
          }
        }
      }
    }
    return p;
  }

  if (op.channelParams) {
    p.weightDims = {1, 1, op.paramRows, in[kC]};
    for (const Span& ch : cBlocks) {
      TileSpec w;
      w.origin = {0, 0, 0, ch.lo};
      w.shape = {1, 1, op.paramRows, ch.hi - ch.lo};
      p.weightTiles.push_back(w);
    }
  }
  for (std::size_t n = 0; n < nChunks.size(); ++n) {
    for (std::size_t r = 0; r < rowChunks.size(); ++r) {
      for (std::size_t c = 0; c < colChunks.size(); ++c) {
        for (std::size_t b = 0; b < cBlocks.size(); ++b) {
          TileSpec o;
          o.origin = {nChunks[n].lo, rowChunks[r].lo, colChunks[c].lo, cBlocks[b].lo};
          o.shape = {nChunks[n].hi - nChunks[n].lo, rowChunks[r].hi - rowChunks[r].lo,
                     colChunks[c].hi - colChunks[c].lo, cBlocks[b].hi - cBlocks[b].lo};
          if (o.elements() > lim.outputElems) return std::nullopt;
          const auto outIdx = static_cast<std::int64_t>(p.outputTiles.size());
          p.outputTiles.push_back(o);
          p.reductionGroups.push_back({static_cast<std::int64_t>(p.units.size())});
          p.units.push_back(WorkUnit{inputIndex(n, r, c, b),
                                     op.channelParams ? static_cast<std::int64_t>(b) : -1, outIdx,
                                     outIdx});
        }
      }
    }
  }
  return p;
}

// Output extent computable from `inputExtent` input rows of a window.
std::int64_t outputs_for(std::int64_t inputExtent, std::int64_t window, std::int64_t stride) {
  return (inputExtent - std::max<std::int64_t>(window - stride, 0)) / stride;
}

}  // namespace

TilingPlan compute_tile_shapes(const OperatorShape& op, const Candidate& cand,
                               const TileLimits& lim) {
  const Dims4 in = op.input;
  const Dims4 out = op.output();
  const std::string where = std::string(to_string(cand.strategy)) + " tile " +
                            format_dims(cand.shape) + " of " + format_dims(in);
  Extents e{cand.shape[kN], out[kH], out[kW]};
  if (cand.shape[kH] < in[kH]) {
    e.rows = std::min(out[kH], outputs_for(cand.shape[kH], op.kernelRows, op.strideRows));
  }
  if (cand.shape[kW] < in[kW]) {
    e.cols = std::min(out[kW], outputs_for(cand.shape[kW], op.kernelCols, op.strideCols));
  }
  if (e.rows < 1 || e.cols < 1) {
    throw InfeasibleTilingError(where + ": tile smaller than the " +
                                std::to_string(op.kernelRows) + "x" +
                                std::to_string(op.kernelCols) + " window");
  }
  const std::int64_t cb = cand.shape[kC];
  const std::int64_t gran = std::max<std::int64_t>(lim.kernelGranularity, 1);
  const std::int64_t perKernelWeights = op.kernelRows * op.kernelCols * cb;
  const std::int64_t kmin = op.kernels > 0 ? std::min(op.kernels, gran) : cb;
  if (op.kernels > 0 && perKernelWeights * kmin > lim.weightElems) {
    throw InfeasibleTilingError(where + ": weight block of " + std::to_string(kmin) +
                                " kernels exceeds the weight scratchpad");
  }

  // Shrink the output footprint until a minimal kernel block fits.
  while (e.n * e.rows * e.cols * kmin > lim.outputElems) {
    if (e.rows > 1) {
      e.rows = std::max<std::int64_t>(1, lim.outputElems / (e.n * e.cols * kmin));
    } else if (e.cols > 1) {
      e.cols = std::max<std::int64_t>(1, lim.outputElems / (e.n * kmin));
    } else if (e.n > 1) {
      e.n = std::max<std::int64_t>(1, lim.outputElems / kmin);
    } else {
      throw InfeasibleTilingError(where + ": one output element block exceeds the output scratchpad");
    }
  }

  for (;;) {
    std::int64_t kb = 0;
    if (op.kernels > 0) {
      kb = std::min({op.kernels, lim.weightElems / perKernelWeights,
                     lim.outputElems / (e.n * e.rows * e.cols)});
      if (kb >= gran) kb -= kb % gran;
    }
    if (auto plan = build_plan(op, cand, lim, e, kb)) return std::move(*plan);
    // The last spatial tile absorbs leftover rows/cols; retry with fewer
    // outputs per tile when that pushes it past the budget.
    if (e.rows > 1) {
      --e.rows;
    } else if (e.cols > 1) {
      --e.cols;
    } else if (e.n > 1) {
      --e.n;
    } else {
      throw InfeasibleTilingError(where + ": no consistent tile set fits the scratchpads");
    }
  }
}

namespace {

int compare_ratio(std::uint64_t an, std::uint64_t ad, std::uint64_t bn, std::uint64_t bd) {
  using u128 = unsigned __int128;
  const u128 l = static_cast<u128>(an) * bd;
  const u128 r = static_cast<u128>(bn) * ad;
  return l < r ? -1 : l > r ? 1 : 0;
}

}  // namespace

std::size_t select_strategy(const std::vector<TilingPlan>& plans, const UtilizationFn& util) {
  if (plans.empty()) throw InfeasibleTilingError("no candidate plans to select from");
  std::vector<Utilization> u;
  u.reserve(plans.size());
  for (const auto& p : plans) u.push_back(util ? util(p) : Utilization{1, 1});
  std::size_t best = 0;
  for (std::size_t i = 1; i < plans.size(); ++i) {
    const TilingPlan& a = plans[i];
    const TilingPlan& b = plans[best];
    int cmp = compare_ratio(u[i].active, std::max<std::uint64_t>(u[i].capacity, 1), u[best].active,
                            std::max<std::uint64_t>(u[best].capacity, 1));
    if (cmp == 0) {
      const std::int64_t fa = a.max_input_tile_elems(), fb = b.max_input_tile_elems();
      cmp = fa > fb ? 1 : fa < fb ? -1 : 0;
    }
    if (cmp == 0) {
      const std::int64_t ca = a.input_copies(), cb = b.input_copies();
      cmp = ca < cb ? 1 : ca > cb ? -1 : 0;
    }
    if (cmp == 0) cmp = a.strategy < b.strategy ? 1 : -1;
    if (cmp > 0) best = i;
  }
  return best;
}

PlanChoice plan_tiling(const OperatorShape& op, const TileLimits& limits,
                       const DataflowConstraints& c, const UtilizationFn& util) {
  const std::int64_t budget = limits.inputElems / std::max(op.operands, 1);
  PlanChoice choice;
  std::string lastError;
  for (const Candidate& cand : enumerate_strategies(op.input, budget, c)) {
    try {
      choice.plans.push_back(compute_tile_shapes(op, cand, limits));
    } catch (const InfeasibleTilingError& e) {
      lastError = e.what();
    }
  }
  if (choice.plans.empty()) throw InfeasibleTilingError(lastError);
  choice.chosen = select_strategy(choice.plans, util);
  for (const auto& p : choice.plans) choice.utilization.push_back(util ? util(p) : Utilization{1, 1});
  return choice;
}

}  // namespace socsim
