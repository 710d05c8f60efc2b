#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result socsim(const std::string& args) {
  const std::string cmd = std::string(SOCSIM_CLI) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string model(const std::string& name) { return std::string(SOCSIM_MODELS_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("socsim-cli-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("cli run writes every report") {
  const fs::path out = scratch("run");
  const Result r = socsim("run --model " + model("cnn10") + " --out " + out.string());
  CHECK(r.code == 0);
  for (const char* f : {"stats.txt", "breakdown.csv", "utilization.csv", "trace.json"}) {
    CHECK(fs::exists(out / f));
  }
  const fs::path again = scratch("run-again");
  CHECK(socsim("run --model " + model("cnn10") + " --out " + again.string()).code == 0);
  CHECK(slurp(out / "trace.json") == slurp(again / "trace.json"));
}

TEST_CASE("cli acp run reports no cache maintenance") {
  const fs::path dir = scratch("acp");
  std::ofstream(dir / "acp.ini") << "[memory]\ninterface = acp\n[accelerators]\ncount = 8\n";
  const Result r = socsim("run --model " + model("lenet5") + " --config " + (dir / "acp.ini").string() +
                          " --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("flush_invalidate_events: 0") != std::string::npos);
  std::set<std::string> accels;
  std::istringstream util(slurp(dir / "utilization.csv"));
  std::string line;
  std::getline(util, line);
  while (std::getline(util, line)) accels.insert(line.substr(0, line.find(',')));
  CHECK(accels.size() == 8);
}

TEST_CASE("cli output directory from the environment") {
  const fs::path out = scratch("env");
  setenv("SOCSIM_OUT_DIR", out.string().c_str(), 1);
  CHECK(socsim("run --model " + model("minerva")).code == 0);
  unsetenv("SOCSIM_OUT_DIR");
  CHECK(fs::exists(out / "stats.txt"));
}

TEST_CASE("cli sweep") {
  const fs::path out = scratch("sweep");
  const Result r = socsim("sweep --model " + model("cnn10") + " --axis acceleratorCount --values 1,2,4,8 --out " +
                          out.string());
  CHECK(r.code == 0);
  const std::string csv = slurp(out / "sweep.csv");
  CHECK(csv == r.out);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(socsim("sweep --model " + model("cnn10") + " --axis voltage --values 1").code == 1);
}

TEST_CASE("cli explain-tiling") {
  const Result r = socsim("explain-tiling --model " + model("cnn10") + " --layer conv2");
  CHECK(r.code == 0);
  CHECK(r.out.find("<- selected") != std::string::npos);
  CHECK(r.out.find("DimN ") != std::string::npos);
  CHECK(socsim("explain-tiling --model " + model("cnn10") + " --layer nope").code == 2);
}

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch("codes");
  CHECK(socsim("").code == 1);
  CHECK(socsim("run").code == 1);
  CHECK(socsim("run --model " + (dir / "missing").string()).code == 5);
  std::ofstream(dir / "bad.ini") << "[cpu]\nturbo = 1\n";
  CHECK(socsim("run --model " + model("minerva") + " --config " + (dir / "bad.ini").string()).code == 2);
  std::ofstream(dir / "tiny.ini") << "[accelerators]\nscratchpadBytes = 64\n";
  CHECK(socsim("run --model " + model("cnn10") + " --config " + (dir / "tiny.ini").string() + " --out " +
               dir.string())
            .code == 3);
  std::ofstream(dir / "broken.topo") << "{ not json";
  std::ofstream(dir / "broken.params") << "x";
  CHECK(socsim("run --model " + (dir / "broken").string()).code == 2);
}

TEST_CASE("cli bundled models are reproducible") {
  const fs::path out = scratch("models");
  CHECK(socsim("make-models --out " + out.string()).code == 0);
  for (const char* name : {"minerva", "lenet5", "cnn10"}) {
    for (const char* ext : {".topo", ".params"}) {
      CHECK(slurp(out / (std::string(name) + ext)) == slurp(model(name) + ext));
    }
  }
}
