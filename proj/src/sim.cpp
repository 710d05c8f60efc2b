#include "socsim/sim.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "socsim/error.hpp"

namespace socsim {

SimTime operator+(SimTime a, SimTime b) {
  if (a.ps >= kMaxSimPs || b.ps >= kMaxSimPs - a.ps) {
    throw TimeOverflowError("simulated time overflow (>= 2^63 ps)");
  }
  return SimTime{a.ps + b.ps};
}

SimTime operator-(SimTime a, SimTime b) {
  if (b.ps > a.ps) throw std::logic_error("negative simulated duration");
  return SimTime{a.ps - b.ps};
}

SimTime cycles_to_time(std::uint64_t cycles, std::uint64_t clockHz) {
  if (clockHz == 0) throw std::invalid_argument("clock frequency must be positive");
  using u128 = unsigned __int128;
  const u128 num = static_cast<u128>(cycles) * 1'000'000'000'000ULL;
  const u128 ps = (num + clockHz - 1) / clockHz;
  if (ps >= kMaxSimPs) throw TimeOverflowError("cycle count overflows simulated time");
  return SimTime{static_cast<std::uint64_t>(ps)};
}

std::string format_us(std::uint64_t ps) {
  std::string frac = std::to_string(ps % 1'000'000);
  frac.insert(0, 6 - frac.size(), '0');
  return std::to_string(ps / 1'000'000) + "." + frac;
}

void EventQueue::schedule(SimTime when, AgentId agent, Action action) {
  if (when < now_) throw std::logic_error("event scheduled in the past");
  heap_.push(Entry{when, agent, nextSeq_++, std::move(action)});
}

bool EventQueue::advance() {
  if (heap_.empty()) return false;
  // priority_queue::top is const; the action is moved out via a copy of the
  // entry, which is cheap relative to simulation work.
  Entry e = heap_.top();
  heap_.pop();
  now_ = e.when;
  if (e.action) e.action();
  return true;
}

void EventQueue::run() {
  while (advance()) {
  }
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::AcceleratorCompute: return "acceleratorCompute";
    case Category::ScratchpadTransfer: return "scratchpadTransfer";
    case Category::DramTraffic: return "dramTraffic";
    case Category::CpuCopy: return "cpuCopy";
    case Category::CpuOther: return "cpuOther";
    case Category::FlushInvalidate: return "flushInvalidate";
  }
  return "unknown";
}

AgentId Trace::add_agent(std::string name) {
  agents_.push_back(std::move(name));
  return static_cast<AgentId>(agents_.size() - 1);
}

std::int32_t Trace::add_layer(std::string name) {
  layers_.push_back(std::move(name));
  return static_cast<std::int32_t>(layers_.size() - 1);
}

void Trace::record(SimEvent ev) {
  ev.seq = nextSeq_++;
  events_.push_back(ev);
}

std::vector<SimEvent> Trace::sorted_events() const {
  std::vector<SimEvent> out = events_;
  std::sort(out.begin(), out.end(), [](const SimEvent& a, const SimEvent& b) {
    if (a.start != b.start) return a.start < b.start;
    if (a.agent != b.agent) return a.agent < b.agent;
    return a.seq < b.seq;
  });
  return out;
}

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  return out;
}

}  // namespace

void Trace::write(std::ostream& os) const {
  os << "[\n";
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    os << R"({"name":"thread_name","ph":"M","pid":0,"tid":)" << i
       << R"(,"args":{"name":")" << json_escape(agents_[i]) << "\"}},\n";
  }
  for (const SimEvent& ev : sorted_events()) {
    const std::string ts = format_us(ev.start.ps);
    const std::string dur = format_us(ev.duration.ps);
    const std::string_view cat = to_string(ev.category);
    const std::string layer = ev.layer >= 0 ? json_escape(layers_.at(ev.layer)) : "";
    os << R"({"name":")" << cat << R"(","cat":")" << cat << R"(","ph":"X","ts":)" << ts
       << ",\"dur\":" << dur << ",\"pid\":0,\"tid\":" << ev.agent << R"(,"args":{"time_us":)"
       << ts << ",\"dur_us\":" << dur << R"(,"agent":")" << json_escape(agents_.at(ev.agent))
       << R"(","category":")" << cat << R"(","layer":")" << layer << R"(","tile":)" << ev.tile
       << ",\"bytes\":" << ev.bytes << "}},\n";
  }
}

void Trace::write_file(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open trace file for writing: " + path);
  write(os);
  if (!os) throw IoError("failed writing trace file: " + path);
}

}  // namespace socsim
