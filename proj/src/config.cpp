#include "socsim/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "socsim/error.hpp"

namespace socsim {

namespace pt = boost::property_tree;

namespace {

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  try {
    const long long n = std::stoll(v, &pos);
    if (pos == v.size()) return n;
    const double d = std::stod(v, &pos);
    if (pos == v.size() && std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 9.2e18) {
      return static_cast<std::int64_t>(d);
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const std::int64_t n = to_int(key, v);
  if (n < 0) throw ConfigError("key '" + key + "' must be non-negative");
  return static_cast<std::uint64_t>(n);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
}

Rational to_rational(const std::string& key, const std::string& v) {
  const auto slash = v.find('/');
  if (slash != std::string::npos) {
    const std::int64_t num = to_int(key, v.substr(0, slash));
    const std::int64_t den = to_int(key, v.substr(slash + 1));
    if (den <= 0) throw ConfigError("key '" + key + "' has a non-positive denominator");
    return Rational(num, den);
  }
  const auto dot = v.find('.');
  if (dot == std::string::npos) return Rational(to_int(key, v));
  const std::string frac = v.substr(dot + 1);
  if (frac.size() > 9) throw ConfigError("key '" + key + "' has too many decimals");
  std::int64_t den = 1;
  for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
  return Rational(to_int(key, v.substr(0, dot) + frac), den);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "' expects true or false, got '" + v + "'");
}

// Shortest decimal form that parses back to the same double.
std::string fmt_double(double d) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

std::string fmt_rational(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace

void SoCConfig::validate() const {
  if (cpu.cores < 1) throw ConfigError("cpu.cores must be >= 1");
  if (cpu.clockHz == 0) throw ConfigError("cpu.clockHz must be positive");
  if (accelerators.count < 1) throw ConfigError("accelerators.count must be >= 1");
  if (accelerators.clockHz == 0) throw ConfigError("accelerators.clockHz must be positive");
  if (accelerators.scratchpadBytes < 2) throw ConfigError("accelerators.scratchpadBytes too small");
  if (accelerators.numPEs < 1 || accelerators.maccWidth < 1 || accelerators.systolicRows < 1 ||
      accelerators.systolicCols < 1 || accelerators.vectorLanes < 1) {
    throw ConfigError("accelerator array dimensions must be >= 1");
  }
  if (accelerators.weightLoadCycles < 0 || accelerators.commitCycles < 0) {
    throw ConfigError("accelerator latencies must be >= 0");
  }
  memory.validate();
  energy.validate();
  if (software.threadCount < 1) throw ConfigError("software.threadCount must be >= 1");
  if (software.threadCount > cpu.cores) {
    throw ConfigError("software.threadCount exceeds cpu.cores");
  }
  if (software.perCopyOverheadCycles < 0 || software.copyBytesPerCycle < 1 ||
      software.layerOverheadCycles < 0 || software.perTaskOverheadCycles < 0 ||
      software.cpuCyclesPerElement < 0) {
    throw ConfigError("software cost parameters out of range");
  }
  for (const auto& [key, f] : sampling) {
    if (key.find('.') == std::string::npos) {
      throw ConfigError("sampling key '" + key + "' must be <backend>.<loop>");
    }
    if (f < Rational(1)) throw ConfigError("sampling factor '" + key + "' must be >= 1");
  }
  if (pipeline) {
    if (pipeline->preStageLatencyMs < 0) throw ConfigError("pipeline.preStageLatencyMs must be >= 0");
    if (pipeline->frameDeadlineMs <= 0) throw ConfigError("pipeline.frameDeadlineMs must be positive");
  }
}

ConvEngineConfig SoCConfig::conv_engine() const {
  ConvEngineConfig c;
  c.numPEs = accelerators.numPEs;
  c.maccWidth = accelerators.maccWidth;
  c.scratchpadBytes = accelerators.scratchpadBytes;
  c.clockHz = accelerators.clockHz;
  c.weightLoadCycles = accelerators.weightLoadCycles;
  c.vectorLanes = accelerators.vectorLanes;
  return c;
}

SystolicConfig SoCConfig::systolic() const {
  SystolicConfig s;
  s.rows = accelerators.systolicRows;
  s.cols = accelerators.systolicCols;
  s.scratchpadBytes = accelerators.scratchpadBytes;
  s.clockHz = accelerators.clockHz;
  s.commitCycles = accelerators.commitCycles;
  s.vectorLanes = accelerators.vectorLanes;
  return s;
}

CpuCopyConfig SoCConfig::cpu_copy() const {
  CpuCopyConfig c;
  c.cpuClockHz = cpu.clockHz;
  c.perCopyOverheadCycles = software.perCopyOverheadCycles;
  c.copyBytesPerCycle = software.copyBytesPerCycle;
  return c;
}

ModelRegistry SoCConfig::registry() const {
  ModelRegistry r = ModelRegistry::with_builtins(conv_engine(), systolic());
  r.register_model("stub",
                   std::make_shared<ConstantLatencyModel>("stub", accelerators.stubCycles,
                                                          accelerators.clockHz,
                                                          accelerators.scratchpadBytes));
  return r;
}

SamplingFactors SoCConfig::sampling_for(const std::string& backend) const {
  SamplingFactors out;
  const std::string prefix = backend + ".";
  for (const auto& [key, f] : sampling) {
    if (key.rfind(prefix, 0) == 0) out.emplace(key.substr(prefix.size()), f);
  }
  return out;
}

SoCConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  SoCConfig c;
  bool pipelineSeen = false;
  PipelineConfig pipe;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("config key '" + section + "' outside a section");
    }
    for (const auto& [k, node] : body) {
      const std::string v = node.get_value<std::string>();
      const std::string key = section + "." + k;
      if (section == "cpu") {
        if (k == "cores") c.cpu.cores = to_int(key, v);
        else if (k == "clockHz") c.cpu.clockHz = to_uint(key, v);
        else throw ConfigError("unknown config key '" + key + "'");
      } else if (section == "accelerators") {
        auto& a = c.accelerators;
        if (k == "backend") a.backend = v;
        else if (k == "count") a.count = to_int(key, v);
        else if (k == "clockHz") a.clockHz = to_uint(key, v);
        else if (k == "scratchpadBytes") a.scratchpadBytes = to_int(key, v);
        else if (k == "numPEs") a.numPEs = to_int(key, v);
        else if (k == "maccWidth") a.maccWidth = to_int(key, v);
        else if (k == "weightLoadCycles") a.weightLoadCycles = to_int(key, v);
        else if (k == "systolicRows") a.systolicRows = to_int(key, v);
        else if (k == "systolicCols") a.systolicCols = to_int(key, v);
        else if (k == "commitCycles") a.commitCycles = to_int(key, v);
        else if (k == "vectorLanes") a.vectorLanes = to_int(key, v);
        else if (k == "stubCycles") a.stubCycles = to_uint(key, v);
        else throw ConfigError("unknown config key '" + key + "'");
      } else if (section == "memory") {
        auto& m = c.memory;
        auto& e = c.energy;
        if (k == "cachelineBytes") m.cachelineBytes = to_int(key, v);
        else if (k == "llcBytes") m.llcBytes = to_int(key, v);
        else if (k == "llcWays") m.llcWays = to_int(key, v);
        else if (k == "llcHitCycles") m.llcHitCycles = to_int(key, v);
        else if (k == "dramBandwidthBytesPerSec") m.dramBandwidth = to_uint(key, v);
        else if (k == "dramChannels") m.dramChannels = to_int(key, v);
        else if (k == "interface") m.interface = parse_interface(v);
        else if (k == "flushCyclesPerLine") m.flushCyclesPerLine = to_int(key, v);
        else if (k == "invalidateCyclesPerLine") m.invalidateCyclesPerLine = to_int(key, v);
        else if (k == "dmaSetupCycles") m.dmaSetupCycles = to_int(key, v);
        else if (k == "acpWindow") m.acpWindow = to_int(key, v);
        else if (k == "dramPjPerByte") e.dramPjPerByte = to_double(key, v);
        else if (k == "llcPjPerAccess") e.llcPjPerAccess = to_double(key, v);
        else if (k == "spadPjPerByte") e.spadPjPerByte = to_double(key, v);
        else if (k == "cpuCopyPjPerByte") e.cpuCopyPjPerByte = to_double(key, v);
        else throw ConfigError("unknown config key '" + key + "'");
      } else if (section == "software") {
        auto& s = c.software;
        if (k == "threadCount") s.threadCount = to_int(key, v);
        else if (k == "perCopyOverheadCycles") s.perCopyOverheadCycles = to_int(key, v);
        else if (k == "copyBytesPerCycle") s.copyBytesPerCycle = to_int(key, v);
        else if (k == "layerOverheadCycles") s.layerOverheadCycles = to_int(key, v);
        else if (k == "perTaskOverheadCycles") s.perTaskOverheadCycles = to_int(key, v);
        else if (k == "cpuCyclesPerElement") s.cpuCyclesPerElement = to_int(key, v);
        else throw ConfigError("unknown config key '" + key + "'");
      } else if (section == "sampling") {
        c.sampling[k] = to_rational(key, v);
      } else if (section == "pipeline") {
        pipelineSeen = true;
        if (k == "preStageLatencyMs") pipe.preStageLatencyMs = to_double(key, v);
        else if (k == "frameDeadlineMs") pipe.frameDeadlineMs = to_double(key, v);
        else if (k == "enabled") pipelineSeen = to_bool(key, v);
        else throw ConfigError("unknown config key '" + key + "'");
      } else {
        throw ConfigError("unknown config section [" + section + "]");
      }
    }
  }
  if (pipelineSeen) c.pipeline = pipe;
  c.validate();
  return c;
}

SoCConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string write_config(const SoCConfig& c) {
  std::ostringstream os;
  os << "[cpu]\n"
     << "cores = " << c.cpu.cores << "\n"
     << "clockHz = " << c.cpu.clockHz << "\n\n";
  const auto& a = c.accelerators;
  os << "[accelerators]\n"
     << "backend = " << a.backend << "\n"
     << "count = " << a.count << "\n"
     << "clockHz = " << a.clockHz << "\n"
     << "scratchpadBytes = " << a.scratchpadBytes << "\n"
     << "numPEs = " << a.numPEs << "\n"
     << "maccWidth = " << a.maccWidth << "\n"
     << "weightLoadCycles = " << a.weightLoadCycles << "\n"
     << "systolicRows = " << a.systolicRows << "\n"
     << "systolicCols = " << a.systolicCols << "\n"
     << "commitCycles = " << a.commitCycles << "\n"
     << "vectorLanes = " << a.vectorLanes << "\n"
     << "stubCycles = " << a.stubCycles << "\n\n";
  const auto& m = c.memory;
  const auto& e = c.energy;
  os << "[memory]\n"
     << "cachelineBytes = " << m.cachelineBytes << "\n"
     << "llcBytes = " << m.llcBytes << "\n"
     << "llcWays = " << m.llcWays << "\n"
     << "llcHitCycles = " << m.llcHitCycles << "\n"
     << "dramBandwidthBytesPerSec = " << m.dramBandwidth << "\n"
     << "dramChannels = " << m.dramChannels << "\n"
     << "interface = " << to_string(m.interface) << "\n"
     << "flushCyclesPerLine = " << m.flushCyclesPerLine << "\n"
     << "invalidateCyclesPerLine = " << m.invalidateCyclesPerLine << "\n"
     << "dmaSetupCycles = " << m.dmaSetupCycles << "\n"
     << "acpWindow = " << m.acpWindow << "\n"
     << "dramPjPerByte = " << fmt_double(e.dramPjPerByte) << "\n"
     << "llcPjPerAccess = " << fmt_double(e.llcPjPerAccess) << "\n"
     << "spadPjPerByte = " << fmt_double(e.spadPjPerByte) << "\n"
     << "cpuCopyPjPerByte = " << fmt_double(e.cpuCopyPjPerByte) << "\n\n";
  const auto& s = c.software;
  os << "[software]\n"
     << "threadCount = " << s.threadCount << "\n"
     << "perCopyOverheadCycles = " << s.perCopyOverheadCycles << "\n"
     << "copyBytesPerCycle = " << s.copyBytesPerCycle << "\n"
     << "layerOverheadCycles = " << s.layerOverheadCycles << "\n"
     << "perTaskOverheadCycles = " << s.perTaskOverheadCycles << "\n"
     << "cpuCyclesPerElement = " << s.cpuCyclesPerElement << "\n";
  if (!c.sampling.empty()) {
    os << "\n[sampling]\n";
    for (const auto& [k, f] : c.sampling) os << k << " = " << fmt_rational(f) << "\n";
  }
  if (c.pipeline) {
    os << "\n[pipeline]\n"
       << "preStageLatencyMs = " << fmt_double(c.pipeline->preStageLatencyMs) << "\n"
       << "frameDeadlineMs = " << fmt_double(c.pipeline->frameDeadlineMs) << "\n";
  }
  return os.str();
}

}  // namespace socsim
