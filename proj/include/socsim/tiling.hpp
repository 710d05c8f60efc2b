#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "socsim/graph.hpp"

namespace socsim {

enum class TilingStrategy : std::uint8_t {
  DimN,
  DimNC,
  DimNH,
  DimNW,
  DimNHW,
  DimNCH,
  DimNCW,
  DimNCHW,
};

inline constexpr std::array<TilingStrategy, 8> kAllStrategies = {
    TilingStrategy::DimN,   TilingStrategy::DimNC,  TilingStrategy::DimNH,  TilingStrategy::DimNW,
    TilingStrategy::DimNHW, TilingStrategy::DimNCH, TilingStrategy::DimNCW, TilingStrategy::DimNCHW,
};

std::string_view to_string(TilingStrategy s);
std::optional<TilingStrategy> parse_strategy(std::string_view s);
/// Whether the strategy splits the given NHWC dim. N is always splittable.
bool splits(TilingStrategy s, int dim);

/// A box inside a parent tensor. `origin` and `shape` describe the full
/// region that is copied, halo included; the halo fields say how much of that
/// region on each side belongs to a neighbouring tile's core.
struct TileSpec {
  Dims4 origin{};
  Dims4 shape{};
  Dims4 haloBefore{};
  Dims4 haloAfter{};

  std::int64_t elements() const { return product(shape); }
  Dims4 core_origin() const;
  Dims4 core_shape() const;
  bool operator==(const TileSpec&) const = default;
};

struct MemcpyPlan {
  std::int64_t copyCount = 0;
  std::int64_t runLengthElems = 0;
  std::int64_t elemSize = 2;

  std::int64_t elements() const { return copyCount * runLengthElems; }
  std::int64_t run_bytes() const { return runLengthElems * elemSize; }
  std::int64_t bytes() const { return elements() * elemSize; }
};

/// Contiguous runs needed to gather `tile` out of an NHWC `parent`.
MemcpyPlan memcpy_plan(const Dims4& parent, const TileSpec& tile, std::int64_t elemSize = 2);

/// Sum of copy counts over `tiles`.
std::int64_t total_copies(const Dims4& parent, const std::vector<TileSpec>& tiles);

/// Scatter schedule writing output tiles back into their parent. Throws
/// ShapeError if two tiles overlap.
std::vector<MemcpyPlan> untile_plan(const std::vector<TileSpec>& outputTiles, const Dims4& parent,
                                    std::int64_t elemSize = 2);

/// Dataflow-specific minima used by the candidate search.
struct DataflowConstraints {
  std::int64_t channelGranularity = 8;
  std::int64_t minRows = 1;
  std::int64_t minCols = 1;
  std::int64_t maxChannels = 0;  // 0: unbounded
};

struct Candidate {
  TilingStrategy strategy = TilingStrategy::DimN;
  Dims4 shape{};
};

/// Candidate tile shape per feasible strategy, in strategy order. A tensor
/// that already fits yields a single DimN candidate. Throws
/// InfeasibleTilingError if nothing fits.
std::vector<Candidate> enumerate_strategies(const Dims4& tensor, std::int64_t maxTileElems,
                                            const DataflowConstraints& c);

/// Shape of a tileable operator, reduced to a windowed NHWC kernel.
struct OperatorShape {
  Dims4 input{};
  std::int64_t kernelRows = 1;
  std::int64_t kernelCols = 1;
  std::int64_t strideRows = 1;
  std::int64_t strideCols = 1;
  Padding padding = Padding::Valid;
  std::int64_t kernels = 0;       // > 0: channels reduce into this many outputs
  bool channelParams = false;     // per-channel parameter block (batchnorm)
  std::int64_t paramRows = 4;     // rows of the per-channel parameter block
  int operands = 1;

  Dims4 output() const;
};

struct TileLimits {
  std::int64_t inputElems = 16384;
  std::int64_t weightElems = 16384;
  std::int64_t outputElems = 16384;
  std::int64_t kernelGranularity = 8;  // output kernels per block rounded to this
};

struct WorkUnit {
  std::int64_t inputTile = -1;
  std::int64_t weightTile = -1;
  std::int64_t outputTile = -1;
  std::int64_t group = -1;
};

struct TilingPlan {
  TilingStrategy strategy = TilingStrategy::DimN;
  std::int64_t maxTileElems = 0;
  OperatorShape op;
  Dims4 weightDims{};  // [K, R, S, C] for kernels, [1, 1, paramRows, C] for channel params
  std::vector<TileSpec> inputTiles;
  std::vector<TileSpec> weightTiles;
  std::vector<TileSpec> outputTiles;
  std::vector<WorkUnit> units;
  /// Unit indices per output tile; partial sums inside a group reduce in place.
  std::vector<std::vector<std::int64_t>> reductionGroups;

  std::int64_t max_input_tile_elems() const;
  /// Gather copies for all input operands.
  std::int64_t input_copies() const;
};

/// Expands a candidate tile shape into consistent input, weight and output
/// tiles. Throws InfeasibleTilingError if no consistent plan fits.
TilingPlan compute_tile_shapes(const OperatorShape& op, const Candidate& cand,
                               const TileLimits& limits);

/// Utilization of a plan as an exact ratio (active over capacity).
struct Utilization {
  std::uint64_t active = 0;
  std::uint64_t capacity = 0;

  double value() const { return capacity ? static_cast<double>(active) / capacity : 0.0; }
};

using UtilizationFn = std::function<Utilization(const TilingPlan&)>;

/// Index of the preferred plan: highest utilization, then highest scratchpad
/// fill, then fewest copies, then strategy order.
std::size_t select_strategy(const std::vector<TilingPlan>& plans, const UtilizationFn& util);

struct PlanChoice {
  std::vector<TilingPlan> plans;  // one per feasible candidate
  std::vector<Utilization> utilization;
  std::size_t chosen = 0;

  const TilingPlan& plan() const { return plans.at(chosen); }
};

/// Enumerate, expand and select in one step.
PlanChoice plan_tiling(const OperatorShape& op, const TileLimits& limits,
                       const DataflowConstraints& c, const UtilizationFn& util);

}  // namespace socsim
