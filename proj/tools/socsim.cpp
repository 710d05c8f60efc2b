#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "socsim/config.hpp"
#include "socsim/error.hpp"
#include "socsim/models.hpp"
#include "socsim/scheduler.hpp"

using namespace socsim;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kInputError = 2;
constexpr int kInfeasible = 3;
constexpr int kInternal = 4;
constexpr int kIo = 5;

std::string out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SOCSIM_OUT_DIR"); env && *env) return env;
  return "socsim-out";
}

SoCConfig config_from(const std::string& path) { return path.empty() ? SoCConfig{} : load_config(path); }

int cmd_run(const std::string& modelPath, const std::string& configPath, const std::string& outFlag) {
  const SoCConfig cfg = config_from(configPath);
  const Model m = deserialize_model(modelPath);
  const RunResult r = run_network(m.graph, cfg);
  const std::string dir = out_dir(outFlag);
  write_reports(r, cfg, dir);
  std::cout << stats_text(r, cfg) << "reports written to " << dir << "\n";
  return kOk;
}

int cmd_sweep(const std::string& modelPath, const std::string& configPath, const std::string& outFlag,
              const std::string& axis, const std::vector<std::string>& values) {
  const SoCConfig cfg = config_from(configPath);
  const Model m = deserialize_model(modelPath);
  const std::string table = sweep_csv(run_sweep(m.graph, cfg, axis, values));
  const std::string dir = out_dir(outFlag);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "'");
  const std::string path = (std::filesystem::path(dir) / "sweep.csv").string();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << table;
  std::cout << table;
  return kOk;
}

int cmd_explain(const std::string& modelPath, const std::string& configPath, const std::string& layer) {
  const SoCConfig cfg = config_from(configPath);
  const Model m = deserialize_model(modelPath);
  const Graph g = fuse_operators(infer_shapes(m.graph));
  const OperatorNode* node = g.find_node(layer);
  if (!node) throw GraphError("no layer named '" + layer + "'");
  const OperatorMapping map = map_operator(g, *node);
  if (!map.accelerated) throw GraphError("layer '" + layer + "' runs on the CPU and is not tiled");
  const auto model = cfg.registry().get(cfg.accelerators.backend);
  const auto elemBytes = static_cast<std::int64_t>(element_size(g.tensor(node->inputs[0]).dtype));
  const PlanChoice choice = plan_operator(map, *model, elemBytes);

  std::cout << "layer " << layer << " (" << to_string(node->kind) << ") input "
            << format_dims(map.shape.input) << " on " << model->name() << "\n";
  std::cout << std::left << std::setw(10) << "strategy" << std::setw(20) << "tile" << std::right
            << std::setw(7) << "tiles" << std::setw(10) << "copies" << std::setw(10) << "run"
            << std::setw(8) << "units" << std::setw(13) << "utilization" << "\n";
  for (std::size_t i = 0; i < choice.plans.size(); ++i) {
    const TilingPlan& p = choice.plans[i];
    const MemcpyPlan first = memcpy_plan(p.op.input, p.inputTiles.front(), elemBytes);
    std::cout << std::left << std::setw(10) << to_string(p.strategy) << std::setw(20)
              << format_dims(p.inputTiles.front().shape) << std::right << std::setw(7)
              << p.inputTiles.size() << std::setw(10) << total_copies(p.op.input, p.inputTiles)
              << std::setw(10) << first.runLengthElems << std::setw(8) << p.units.size()
              << std::setw(13) << std::fixed << std::setprecision(6) << choice.utilization[i].value()
              << (i == choice.chosen ? "  <- selected" : "") << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-driven simulator for DNN inference on accelerator SoCs"};
  app.require_subcommand(1);

  std::string model, config, out, axis, layer, dir = "models";
  std::vector<std::string> values;

  auto* run = app.add_subcommand("run", "Simulate one inference and write reports");
  run->add_option("--model", model, "Model base path (<base>.topo and <base>.params)")->required();
  run->add_option("--config", config, "SoC configuration file (defaults built in)");
  run->add_option("--out", out, "Output directory (else $SOCSIM_OUT_DIR, else socsim-out)");

  auto* sweep = app.add_subcommand("sweep", "Run once per value of one configuration axis");
  sweep->add_option("--model", model, "Model base path")->required();
  sweep->add_option("--config", config, "SoC configuration file");
  sweep->add_option("--out", out, "Output directory for sweep.csv");
  sweep->add_option("--axis", axis, "interface | acceleratorCount | threadCount | systolicDims")
      ->required()
      ->check(CLI::IsMember({"interface", "acceleratorCount", "threadCount", "systolicDims"}));
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');

  auto* explain = app.add_subcommand("explain-tiling", "List tiling candidates for one layer");
  explain->add_option("--model", model, "Model base path")->required();
  explain->add_option("--config", config, "SoC configuration file");
  explain->add_option("--layer", layer, "Layer name")->required();

  auto* make = app.add_subcommand("make-models", "Write the bundled sample models");
  make->add_option("--out", dir, "Destination directory");

  auto* defaults = app.add_subcommand("default-config", "Print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(model, config, out);
    if (*sweep) return cmd_sweep(model, config, out, axis, values);
    if (*explain) return cmd_explain(model, config, layer);
    if (*make) {
      for (const auto& base : write_bundled_models(dir)) std::cout << base << "\n";
      return kOk;
    }
    if (*defaults) {
      std::cout << write_config(SoCConfig{});
      return kOk;
    }
  } catch (const InfeasibleTilingError& e) {
    std::cerr << "error: infeasible tiling: " << e.what() << "\n";
    return kInfeasible;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "error: model parse: " << e.what() << "\n";
    return kInputError;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kInputError;
  } catch (const GraphError& e) {
    std::cerr << "error: model: " << e.what() << "\n";
    return kInputError;
  } catch (const ShapeError& e) {
    std::cerr << "error: shape: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
