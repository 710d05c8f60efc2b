#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

#include "socsim/error.hpp"
#include "socsim/graph.hpp"

namespace socsim {

namespace {

using json = nlohmann::ordered_json;
using Kind = ParseError::Kind;

constexpr char kParamsMagic[8] = {'S', 'O', 'C', 'P', 'A', 'R', 'M', 'S'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  return v;
}

json attrs_json(const OpAttrs& a) {
  return json{{"kernel", a.kernel},
              {"stride", a.stride},
              {"padding", to_string(a.padding)},
              {"pool", to_string(a.pool)},
              {"activation", to_string(a.activation)},
              {"fused", to_string(a.fused)}};
}

OpAttrs attrs_from_json(const json& j) {
  OpAttrs a;
  if (j.contains("kernel")) a.kernel = j.at("kernel").get<std::array<std::int64_t, 2>>();
  if (j.contains("stride")) a.stride = j.at("stride").get<std::array<std::int64_t, 2>>();
  if (j.contains("padding")) a.padding = parse_padding(j.at("padding").get<std::string>());
  if (j.contains("pool")) a.pool = parse_pool_kind(j.at("pool").get<std::string>());
  if (j.contains("activation")) a.activation = parse_activation(j.at("activation").get<std::string>());
  if (j.contains("fused")) a.fused = parse_activation(j.at("fused").get<std::string>());
  return a;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace

std::string write_topology(const Graph& g) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& t : g.tensors) {
    json jt{{"name", t.name},
            {"dims", t.dims},
            {"dtype", to_string(t.dtype)},
            {"layout", to_string(t.layout)},
            {"parameter", g.is_parameter(t.name)}};
    if (g.is_parameter(t.name)) {
      const auto len = static_cast<std::uint64_t>(t.bytes());
      jt["offset"] = offset;
      jt["length"] = len;
      offset += len;
    }
    tensors.push_back(std::move(jt));
  }
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back(json{{"name", n.name},
                         {"kind", to_string(n.kind)},
                         {"inputs", n.inputs},
                         {"outputs", n.outputs},
                         {"attrs", attrs_json(n.attrs)}});
  }
  json root{{"format_version", kContainerVersion},
            {"name", g.name},
            {"backend", g.backend},
            {"tensors", std::move(tensors)},
            {"nodes", std::move(nodes)}};
  return root.dump(2) + "\n";
}

std::vector<std::uint8_t> write_parameters(const Graph& g, const Parameters& params) {
  std::vector<const TensorDesc*> order;
  std::uint64_t total = 0;
  for (const auto& t : g.tensors) {
    if (!g.is_parameter(t.name)) continue;
    auto it = params.find(t.name);
    if (it == params.end()) throw GraphError("no data for parameter '" + t.name + "'");
    if (static_cast<std::int64_t>(it->second.size()) != t.bytes()) {
      throw GraphError("parameter '" + t.name + "' has " + std::to_string(it->second.size()) +
                       " bytes, descriptor needs " + std::to_string(t.bytes()));
    }
    order.push_back(&t);
    total += it->second.size();
  }
  std::vector<std::uint8_t> out;
  out.reserve(kParamsHeaderBytes + total);
  out.insert(out.end(), std::begin(kParamsMagic), std::end(kParamsMagic));
  put_u32(out, kContainerVersion);
  put_u32(out, static_cast<std::uint32_t>(order.size()));
  put_u64(out, total);
  for (const TensorDesc* t : order) {
    const auto& bytes = params.at(t->name);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

Model read_model(std::string_view topology, const std::vector<std::uint8_t>& payload) {
  json root;
  try {
    root = json::parse(topology);
  } catch (const json::parse_error& e) {
    throw ParseError(Kind::MalformedHeader, std::string("topology is not valid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("format_version")) {
    throw ParseError(Kind::MalformedHeader, "topology header lacks format_version");
  }

  Model m;
  struct Span {
    std::uint64_t offset, length;
  };
  std::vector<std::pair<std::string, Span>> spans;
  try {
    if (!root.at("format_version").is_number_integer()) {
      throw ParseError(Kind::MalformedHeader, "format_version must be an integer");
    }
    const int version = root.at("format_version").get<int>();
    if (version != kContainerVersion) {
      throw ParseError(Kind::VersionMismatch, "topology format_version " + std::to_string(version) +
                                                  ", expected " + std::to_string(kContainerVersion));
    }
    Graph& g = m.graph;
    g.name = root.value("name", "");
    g.backend = root.value("backend", "");
    for (const auto& jt : root.at("tensors")) {
      TensorDesc t;
      t.name = jt.at("name").get<std::string>();
      t.dims = jt.at("dims").get<std::vector<std::int64_t>>();
      t.dtype = parse_data_type(jt.at("dtype").get<std::string>());
      t.layout = parse_layout(jt.at("layout").get<std::string>());
      if (jt.value("parameter", false)) {
        g.parameters.push_back(t.name);
        spans.emplace_back(t.name, Span{jt.at("offset").get<std::uint64_t>(),
                                        jt.at("length").get<std::uint64_t>()});
        if (static_cast<std::int64_t>(spans.back().second.length) != t.bytes()) {
          throw ParseError(Kind::MalformedHeader,
                           "parameter '" + t.name + "' length disagrees with its dims");
        }
      }
      g.tensors.push_back(std::move(t));
    }
    for (const auto& jn : root.at("nodes")) {
      OperatorNode n;
      n.name = jn.at("name").get<std::string>();
      const std::string kind = jn.at("kind").get<std::string>();
      auto k = parse_op_kind(kind);
      if (!k) {
        throw ParseError(Kind::UnknownOperator,
                         "node '" + n.name + "' has unknown operator kind '" + kind + "'");
      }
      n.kind = *k;
      n.inputs = jn.at("inputs").get<std::vector<std::string>>();
      n.outputs = jn.at("outputs").get<std::vector<std::string>>();
      if (jn.contains("attrs")) n.attrs = attrs_from_json(jn.at("attrs"));
      g.nodes.push_back(std::move(n));
    }
  } catch (const json::exception& e) {
    throw ParseError(Kind::MalformedHeader, std::string("malformed topology: ") + e.what());
  }

  if (payload.size() < kParamsHeaderBytes) {
    throw ParseError(Kind::TruncatedPayload, "parameter file shorter than its header");
  }
  if (std::memcmp(payload.data(), kParamsMagic, sizeof kParamsMagic) != 0) {
    throw ParseError(Kind::MalformedHeader, "parameter file has wrong magic");
  }
  const auto version = static_cast<std::uint32_t>(get_le(payload, 8, 4));
  if (version != kContainerVersion) {
    throw ParseError(Kind::VersionMismatch,
                     "parameter file version " + std::to_string(version) + ", expected " +
                         std::to_string(kContainerVersion));
  }
  const auto count = get_le(payload, 12, 4);
  const auto total = get_le(payload, 16, 8);
  if (count != spans.size()) {
    throw ParseError(Kind::MalformedHeader, "parameter file holds " + std::to_string(count) +
                                                " tensors, topology lists " +
                                                std::to_string(spans.size()));
  }
  if (payload.size() - kParamsHeaderBytes < total) {
    throw ParseError(Kind::TruncatedPayload,
                     "parameter payload has " + std::to_string(payload.size() - kParamsHeaderBytes) +
                         " of " + std::to_string(total) + " bytes");
  }
  for (const auto& [name, span] : spans) {
    if (span.offset > total || span.length > total - span.offset) {
      throw ParseError(Kind::TruncatedPayload, "parameter '" + name + "' extends past the payload");
    }
    const auto* base = payload.data() + kParamsHeaderBytes + span.offset;
    m.params.emplace(name, std::vector<std::uint8_t>(base, base + span.length));
  }
  try {
    validate(m.graph);
  } catch (const GraphError& e) {
    throw ParseError(Kind::MalformedHeader, e.what());
  }
  return m;
}

void serialize_model(const Graph& g, const Parameters& params, const std::string& basePath) {
  validate(g);
  const std::string topo = write_topology(g);
  const std::vector<std::uint8_t> payload = write_parameters(g, params);
  write_file(basePath + ".topo", topo.data(), topo.size());
  write_file(basePath + ".params", payload.data(), payload.size());
}

Model deserialize_model(const std::string& basePath) {
  std::string base = basePath;
  if (base.size() > 5 && base.ends_with(".topo")) base.resize(base.size() - 5);
  const std::vector<std::uint8_t> topo = read_file(base + ".topo");
  const std::vector<std::uint8_t> payload = read_file(base + ".params");
  return read_model(std::string_view(reinterpret_cast<const char*>(topo.data()), topo.size()),
                    payload);
}

}  // namespace socsim
