#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "socsim/accel.hpp"

namespace socsim {

using Rational = boost::rational<std::int64_t>;

/// One loop of a kernel. `perIterationCycles` holds the cycles spent in the
/// loop body itself (children excluded) for each measured iteration. For a
/// pipelined loop the first entry is the first-iteration latency and the
/// second fixes the initiation interval.
struct LoopTreeNode {
  std::string label;
  Rational factor{1};
  std::int64_t measuredIterations = 0;
  std::vector<std::uint64_t> perIterationCycles;
  bool pipelined = false;
  std::optional<std::uint64_t> initiationInterval;
  bool transferTagged = false;
  std::vector<LoopTreeNode> children;

  LoopTreeNode* find(const std::string& label);
  const LoopTreeNode* find(const std::string& label) const;
};

/// Marks `label` with a sampling factor. Throws Error on an unknown label or a
/// factor below 1.
LoopTreeNode set_sampling_factor(LoopTreeNode tree, const std::string& label, Rational factor);

/// Rejects factors on transfer loops and pipelined loops sampled from fewer
/// than two iterations.
void validate_sampling(const LoopTreeNode& tree);

/// Exact estimate of one execution of `node` (per enclosing iteration).
Rational estimate(const LoopTreeNode& node);

/// Root estimate rounded to whole cycles.
std::uint64_t unsample(const LoopTreeNode& tree);

/// Per-loop sampling factors keyed by loop label.
using SamplingFactors = std::map<std::string, Rational>;

struct SampledRun {
  LoopTreeNode tree;
  std::uint64_t estimatedCycles = 0;
  std::uint64_t simulatedIterations = 0;  // innermost iterations actually executed
};

/// Executes the convolution engine's loop nest, simulating only the sampled
/// subset of each loop, and unsamples the result. Loop labels: "round",
/// "kr", "kc", "cb", "r", "c".
SampledRun sample_conv_engine(const ConvKernelJob& job, const ConvEngineConfig& cfg,
                              const SamplingFactors& factors);

}  // namespace socsim
