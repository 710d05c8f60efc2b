#include "socsim/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "socsim/error.hpp"

namespace socsim {

LoopTreeNode* LoopTreeNode::find(const std::string& l) {
  if (label == l) return this;
  for (auto& c : children) {
    if (LoopTreeNode* n = c.find(l)) return n;
  }
  return nullptr;
}

const LoopTreeNode* LoopTreeNode::find(const std::string& l) const {
  return const_cast<LoopTreeNode*>(this)->find(l);
}

LoopTreeNode set_sampling_factor(LoopTreeNode tree, const std::string& label, Rational factor) {
  if (factor < Rational(1)) {
    throw Error("sampling factor for '" + label + "' must be >= 1");
  }
  LoopTreeNode* n = tree.find(label);
  if (!n) throw Error("no loop labelled '" + label + "'");
  n->factor = factor;
  return tree;
}

void validate_sampling(const LoopTreeNode& node) {
  if (node.factor < Rational(1)) throw Error("loop '" + node.label + "' has a factor below 1");
  if (node.transferTagged && node.factor != Rational(1)) {
    throw Error("loop '" + node.label + "' moves data and cannot be sampled");
  }
  if (node.pipelined && node.factor != Rational(1) && node.measuredIterations < 2) {
    throw Error("pipelined loop '" + node.label + "' needs at least two measured iterations");
  }
  if (static_cast<std::int64_t>(node.perIterationCycles.size()) < node.measuredIterations &&
      !node.pipelined) {
    throw Error("loop '" + node.label + "' lacks per-iteration measurements");
  }
  for (const auto& c : node.children) validate_sampling(c);
}

Rational estimate(const LoopTreeNode& node) {
  const Rational total = node.factor * Rational(node.measuredIterations);
  if (node.measuredIterations == 0) return Rational(0);
  if (node.pipelined) {
    if (node.perIterationCycles.empty()) throw Error("pipelined loop '" + node.label + "' unmeasured");
    const auto first = static_cast<std::int64_t>(node.perIterationCycles[0]);
    std::int64_t ii = 0;
    if (node.perIterationCycles.size() >= 2) {
      ii = static_cast<std::int64_t>(node.perIterationCycles[1]);
    } else if (node.initiationInterval) {
      ii = static_cast<std::int64_t>(*node.initiationInterval);
    }
    return Rational(first) + Rational(ii) * (total - Rational(1));
  }
  Rational body(0);
  if (!node.perIterationCycles.empty()) {
    const std::uint64_t sum =
        std::accumulate(node.perIterationCycles.begin(), node.perIterationCycles.end(), std::uint64_t{0});
    body = Rational(static_cast<std::int64_t>(sum),
                    static_cast<std::int64_t>(node.perIterationCycles.size()));
  }
  for (const auto& c : node.children) body += estimate(c);
  return total * body;
}

std::uint64_t unsample(const LoopTreeNode& tree) {
  validate_sampling(tree);
  const Rational e = estimate(tree);
  // Round half up at the root only.
  const std::int64_t q = e.numerator() / e.denominator();
  const std::int64_t rem = e.numerator() % e.denominator();
  return static_cast<std::uint64_t>(q + (2 * rem >= e.denominator() ? 1 : 0));
}

namespace {

struct Loop {
  const char* label;
  std::int64_t trip;
  bool pipelined;
};

// Iterations to simulate for a loop of `trip` iterations under `factor`.
std::int64_t measured_for(std::int64_t trip, const Rational& factor, bool pipelined) {
  if (factor <= Rational(1) || trip <= 1) return trip;
  const Rational want = Rational(trip) / factor;
  std::int64_t m = boost::rational_cast<std::int64_t>(want);
  if (Rational(m) < want) ++m;
  m = std::max<std::int64_t>(m, pipelined ? 2 : 1);
  return std::min(m, trip);
}

}  // namespace

SampledRun sample_conv_engine(const ConvKernelJob& job, const ConvEngineConfig& cfg,
                              const SamplingFactors& factors) {
  if (job.OUT_R < 1 || job.OUT_C < 1 || job.kernels < 1 || job.IN_H < 1) {
    throw CapacityError("empty convolution job");
  }
  const std::int64_t rounds = (job.kernels + cfg.numPEs - 1) / cfg.numPEs;
  const std::int64_t blocks = (job.IN_H + cfg.maccWidth - 1) / cfg.maccWidth;
  const Loop loops[] = {
      {"round", rounds * job.batch, false}, {"kr", job.WGT_R, false}, {"kc", job.WGT_C, false},
      {"cb", blocks, false},                {"r", job.OUT_R, false},  {"c", job.OUT_C, true},
  };
  for (const auto& [label, f] : factors) {
    const bool known = std::any_of(std::begin(loops), std::end(loops),
                                   [&](const Loop& l) { return label == l.label; });
    if (!known) throw Error("no loop labelled '" + label + "' in the convolution engine nest");
    if (f < Rational(1)) throw Error("sampling factor for '" + label + "' must be >= 1");
  }

  SampledRun run;
  std::vector<LoopTreeNode> nodes;
  std::vector<std::int64_t> measured;
  for (const Loop& l : loops) {
    LoopTreeNode n;
    n.label = l.label;
    n.pipelined = l.pipelined;
    auto it = factors.find(l.label);
    const Rational f = it == factors.end() ? Rational(1) : it->second;
    n.measuredIterations = measured_for(l.trip, f, l.pipelined);
    n.factor = Rational(l.trip, n.measuredIterations);
    measured.push_back(n.measuredIterations);
    nodes.push_back(std::move(n));
  }

  // Iterations of one level all cost the same, so the measured iterations of
  // each loop record identical body cycles.
  std::int64_t executedInner = 1;
  for (std::int64_t m : measured) executedInner *= m;
  run.simulatedIterations = static_cast<std::uint64_t>(executedInner);
  for (std::size_t d = 0; d < nodes.size(); ++d) {
    auto& n = nodes[d];
    if (n.pipelined) {
      // A fully pipelined MACC column: first result after one cycle, then
      // one per cycle.
      n.perIterationCycles.push_back(1);
      if (n.measuredIterations >= 2) n.perIterationCycles.push_back(1);
      n.initiationInterval = 1;
    } else {
      const std::uint64_t own = n.label == std::string("cb") ? static_cast<std::uint64_t>(cfg.weightLoadCycles) : 0;
      n.perIterationCycles.assign(static_cast<std::size_t>(n.measuredIterations), own);
    }
  }
  for (std::size_t d = nodes.size() - 1; d > 0; --d) {
    nodes[d - 1].children.push_back(std::move(nodes[d]));
  }
  LoopTreeNode root;
  root.label = "tile";
  root.measuredIterations = 1;
  root.perIterationCycles = {0};
  root.children.push_back(std::move(nodes[0]));
  run.estimatedCycles = unsample(root);
  run.tree = std::move(root);
  return run;
}

}  // namespace socsim
