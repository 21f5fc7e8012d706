#pragma once

// JSON persistence for problem instances. Loading validates every instance
// invariant and reports the offending field.

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "bnet/oracles.hpp"

namespace bnet {

namespace detail {

using nlohmann::json;

inline const json& field(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key))
    throw InstanceError(path + (path.empty() ? "" : ".") + key + ": missing field");
  return obj.at(key);
}

inline std::int64_t as_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw InstanceError(path + ": expected an integer");
  return v.get<std::int64_t>();
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw InstanceError(path + ": expected a number");
  return v.get<double>();
}

inline const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw InstanceError(path + ": expected an array");
  return v;
}

inline std::vector<std::vector<std::int64_t>> integer_matrix(const json& v,
                                                             const std::string& path) {
  std::vector<std::vector<std::int64_t>> out;
  for (std::size_t i = 0; i < as_array(v, path).size(); ++i) {
    const std::string row = path + "[" + std::to_string(i) + "]";
    std::vector<std::int64_t> r;
    for (std::size_t j = 0; j < as_array(v[i], row).size(); ++j)
      r.push_back(as_integer(v[i][j], row + "[" + std::to_string(j) + "]"));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const McndInstance& inst) {
  nlohmann::json arcs = nlohmann::json::array();
  for (const auto& a : inst.arcs)
    arcs.push_back({{"tail", a.tail},
                    {"head", a.head},
                    {"capacity", a.capacity},
                    {"fixed", a.fixed_cost},
                    {"routing", a.routing}});
  nlohmann::json comms = nlohmann::json::array();
  for (const auto& c : inst.commodities)
    comms.push_back({{"origin", c.origin}, {"dest", c.dest}, {"volume", c.volume}});
  return {{"type", "mcnd"}, {"nodes", inst.nodes}, {"arcs", arcs}, {"commodities", comms}};
}

inline nlohmann::json to_json(const GapInstance& inst) {
  return {{"type", "gap"},
          {"profits", inst.profits},
          {"weights", inst.weights},
          {"capacities", inst.capacities}};
}

inline nlohmann::json to_json(const Problem& p) {
  return std::visit([](const auto& inst) { return to_json(inst); }, p);
}

inline McndInstance mcnd_from_json(const nlohmann::json& j) {
  using namespace detail;
  McndInstance inst;
  inst.nodes = static_cast<int>(as_integer(field(j, "nodes", ""), "nodes"));
  const json& arcs = as_array(field(j, "arcs", ""), "arcs");
  const json& comms = as_array(field(j, "commodities", ""), "commodities");
  for (std::size_t k = 0; k < comms.size(); ++k) {
    const std::string at = "commodities[" + std::to_string(k) + "]";
    McndCommodity c;
    c.origin = static_cast<int>(as_integer(field(comms[k], "origin", at), at + ".origin"));
    c.dest = static_cast<int>(as_integer(field(comms[k], "dest", at), at + ".dest"));
    c.volume = as_integer(field(comms[k], "volume", at), at + ".volume");
    inst.commodities.push_back(c);
  }
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    const std::string at = "arcs[" + std::to_string(a) + "]";
    McndArc arc;
    arc.tail = static_cast<int>(as_integer(field(arcs[a], "tail", at), at + ".tail"));
    arc.head = static_cast<int>(as_integer(field(arcs[a], "head", at), at + ".head"));
    arc.capacity = as_number(field(arcs[a], "capacity", at), at + ".capacity");
    arc.fixed_cost = as_number(field(arcs[a], "fixed", at), at + ".fixed");
    const json& r = as_array(field(arcs[a], "routing", at), at + ".routing");
    for (std::size_t k = 0; k < r.size(); ++k)
      arc.routing.push_back(as_number(r[k], at + ".routing[" + std::to_string(k) + "]"));
    inst.arcs.push_back(std::move(arc));
  }
  inst.validate();
  return inst;
}

inline GapInstance gap_from_json(const nlohmann::json& j) {
  using namespace detail;
  GapInstance inst;
  inst.profits = integer_matrix(field(j, "profits", ""), "profits");
  inst.weights = integer_matrix(field(j, "weights", ""), "weights");
  const json& caps = as_array(field(j, "capacities", ""), "capacities");
  for (std::size_t b = 0; b < caps.size(); ++b)
    inst.capacities.push_back(as_integer(caps[b], "capacities[" + std::to_string(b) + "]"));
  inst.items = inst.profits.size();
  inst.bins = inst.capacities.size();
  inst.validate();
  return inst;
}

inline Problem problem_from_json(const nlohmann::json& j) {
  const auto& type = detail::field(j, "type", "");
  if (!type.is_string()) throw InstanceError("type: expected a string");
  if (type == "mcnd") return mcnd_from_json(j);
  if (type == "gap") return gap_from_json(j);
  throw InstanceError("type: unknown problem type '" + type.get<std::string>() + "'");
}

/// Parses instance JSON text; syntax errors carry the byte position.
inline Problem parse_problem(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InstanceError(std::string("malformed JSON: ") + e.what());
  }
  return problem_from_json(j);
}

inline Problem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open instance file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_problem(buf.str());
  } catch (const InstanceError& e) {
    throw InstanceError(path + ": " + e.what());
  }
}

inline void save_problem(const Problem& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write instance file " + path);
  out << to_json(p).dump() << '\n';
}

}  // namespace bnet
