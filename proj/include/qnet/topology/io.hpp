#pragma once

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "qnet/core/error.hpp"
#include "qnet/topology/graph.hpp"

namespace qnet::topology {

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw SchemaError(std::string(where) + ": unknown field '" + key + "'");
  }
}

inline const json& require(const json& obj, std::string_view key, std::string_view where) {
  auto it = obj.find(std::string(key));
  if (it == obj.end())
    throw SchemaError(std::string(where) + ": missing field '" + std::string(key) + "'");
  return *it;
}

inline double require_number(const json& obj, std::string_view key, std::string_view where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) throw SchemaError(std::string(where) + ": '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

inline double number_or(const json& obj, std::string_view key, double fallback, std::string_view where) {
  if (!obj.contains(std::string(key))) return fallback;
  return require_number(obj, key, where);
}

inline int require_int(const json& obj, std::string_view key, std::string_view where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number_integer())
    throw SchemaError(std::string(where) + ": '" + std::string(key) + "' must be an integer");
  return v.get<int>();
}

inline std::string require_string(const json& obj, std::string_view key, std::string_view where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw SchemaError(std::string(where) + ": '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

inline const json& require_array(const json& obj, std::string_view key, std::string_view where) {
  const auto& v = require(obj, key, where);
  if (!v.is_array()) throw SchemaError(std::string(where) + ": '" + std::string(key) + "' must be a list");
  return v;
}

inline NetworkNode parse_node(const json& j) {
  if (!j.is_object()) throw SchemaError("nodes[]: entries must be objects");
  const std::string where = "node " + (j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "?");
  reject_unknown_keys(j, {"id", "kind", "ip", "insertion_loss_db", "pdl_db", "pmd_ps", "ports",
                          "wavelength_outputs", "qubit_types"},
                      where);
  NetworkNode n;
  n.id = require_string(j, "id", where);
  n.kind = node_kind_from_string(require_string(j, "kind", where));
  if (j.contains("ip")) n.ip = require_string(j, "ip", where);
  n.insertion_loss_db = number_or(j, "insertion_loss_db", 0.0, where);
  n.pdl_db = number_or(j, "pdl_db", 0.0, where);
  n.pmd_ps = number_or(j, "pmd_ps", 0.0, where);
  if (j.contains("ports")) {
    for (const auto& p : require_array(j, "ports", where)) {
      if (!p.is_object()) throw SchemaError(where + ": ports[] entries must be objects");
      reject_unknown_keys(p, {"index", "tag"}, where + " port");
      PortConfig pc;
      pc.index = require_int(p, "index", where + " port");
      if (p.contains("tag")) pc.tag = require_string(p, "tag", where + " port");
      n.ports.push_back(std::move(pc));
    }
  }
  if (j.contains("wavelength_outputs")) n.wavelength_outputs = require_int(j, "wavelength_outputs", where);
  if (j.contains("qubit_types"))
    for (const auto& q : require_array(j, "qubit_types", where)) {
      if (!q.is_string()) throw SchemaError(where + ": qubit_types entries must be strings");
      n.qubit_types.insert(qubit_type_from_string(q.get<std::string>()));
    }
  if (n.kind == NodeKind::QNode && n.ip.empty()) throw SchemaError(where + ": Q-Nodes must carry an ip");
  return n;
}

inline Endpoint parse_endpoint(const json& j, std::string_view where) {
  if (!j.is_object()) throw SchemaError(std::string(where) + ": endpoint must be an object");
  reject_unknown_keys(j, {"node", "port"}, where);
  return Endpoint{require_string(j, "node", where), require_int(j, "port", where)};
}

inline FiberLink parse_link(const json& j) {
  if (!j.is_object()) throw SchemaError("links[]: entries must be objects");
  const std::string where = "link " + (j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "?");
  reject_unknown_keys(j, {"id", "a", "b", "length_km", "attenuation", "total_wavelengths", "occupancy", "admin_up"},
                      where);
  FiberLink l;
  l.id = require_string(j, "id", where);
  l.a = parse_endpoint(require(j, "a", where), where + ".a");
  l.b = parse_endpoint(require(j, "b", where), where + ".b");
  l.length_km = require_number(j, "length_km", where);
  const auto& att = require(j, "attenuation", where);
  if (!att.is_object()) throw SchemaError(where + ": attenuation must be an object");
  for (const auto& [key, value] : att.items()) {
    if (!value.is_number()) throw SchemaError(where + ": attenuation." + key + " must be a number");
    l.attenuation_db_per_km[band_from_string(key)] = value.get<double>();
  }
  l.total_wavelengths = require_int(j, "total_wavelengths", where);
  if (j.contains("admin_up")) l.admin_up = require(j, "admin_up", where).get<bool>();
  if (j.contains("occupancy"))
    for (const auto& o : require_array(j, "occupancy", where)) {
      reject_unknown_keys(o, {"channel", "lightpath"}, where + " occupancy");
      l.occupancy[require_string(o, "channel", where)] = require_string(o, "lightpath", where);
    }
  return l;
}

inline WavelengthChannel parse_channel(const json& j) {
  if (!j.is_object()) throw SchemaError("grid[]: entries must be objects");
  reject_unknown_keys(j, {"label", "center_nm", "width_ghz", "band"}, "grid channel");
  WavelengthChannel c;
  c.label = require_string(j, "label", "grid channel");
  c.center_nm = require_number(j, "center_nm", "grid channel " + c.label);
  c.width_ghz = require_number(j, "width_ghz", "grid channel " + c.label);
  c.band = band_from_string(require_string(j, "band", "grid channel " + c.label));
  return c;
}

}  // namespace detail

/// Builds a validated graph from a parsed topology document.
inline NetworkGraph load_topology(const nlohmann::json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw SchemaError("topology document must be an object");
  reject_unknown_keys(doc, {"version", "nodes", "links", "grid"}, "topology");
  const auto& nodes = require_array(doc, "nodes", "topology");
  if (nodes.empty()) throw SchemaError("topology: node list is empty");
  NetworkGraph g;
  for (const auto& n : nodes) g.add_node(parse_node(n));
  if (doc.contains("grid"))
    for (const auto& c : require_array(doc, "grid", "topology")) g.add_channel(parse_channel(c));
  if (doc.contains("links"))
    for (const auto& l : require_array(doc, "links", "topology")) {
      auto link = parse_link(l);
      for (const auto& [label, _] : link.occupancy)
        if (!g.has_channel(label))
          throw SchemaError("link '" + link.id + "' occupancy references unknown channel '" + label + "'");
      g.add_link(std::move(link));
    }
  return g;
}

inline NetworkGraph load_topology_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("topology is not valid JSON: ") + e.what());
  }
  return load_topology(doc);
}

inline NetworkGraph load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open topology file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_topology_text(ss.str());
}

/// Canonical document: nodes and links sorted by id, grid in declaration order.
inline nlohmann::ordered_json serialize_topology(const NetworkGraph& g, bool include_occupancy = true) {
  using oj = nlohmann::ordered_json;
  oj doc;
  doc["version"] = 1;
  doc["nodes"] = oj::array();
  for (const auto& [id, n] : g.nodes()) {
    oj jn;
    jn["id"] = n.id;
    jn["kind"] = std::string(to_string(n.kind));
    if (!n.ip.empty()) jn["ip"] = n.ip;
    jn["insertion_loss_db"] = n.insertion_loss_db;
    jn["pdl_db"] = n.pdl_db;
    jn["pmd_ps"] = n.pmd_ps;
    jn["ports"] = oj::array();
    auto ports = n.ports;
    std::sort(ports.begin(), ports.end(), [](const auto& x, const auto& y) { return x.index < y.index; });
    for (const auto& p : ports) {
      oj jp;
      jp["index"] = p.index;
      if (!p.tag.empty()) jp["tag"] = p.tag;
      jn["ports"].push_back(std::move(jp));
    }
    if (n.wavelength_outputs) jn["wavelength_outputs"] = n.wavelength_outputs;
    if (!n.qubit_types.empty()) {
      jn["qubit_types"] = oj::array();
      for (auto q : n.qubit_types) jn["qubit_types"].push_back(std::string(to_string(q)));
    }
    doc["nodes"].push_back(std::move(jn));
  }
  doc["links"] = oj::array();
  for (const auto& [id, l] : g.links()) {
    oj jl;
    jl["id"] = l.id;
    jl["a"] = {{"node", l.a.node}, {"port", l.a.port}};
    jl["b"] = {{"node", l.b.node}, {"port", l.b.port}};
    jl["length_km"] = l.length_km;
    oj att = oj::object();
    for (const auto& [band, c] : l.attenuation_db_per_km) att[std::string(to_string(band))] = c;
    jl["attenuation"] = std::move(att);
    jl["total_wavelengths"] = l.total_wavelengths;
    if (!l.admin_up) jl["admin_up"] = false;
    if (include_occupancy && !l.occupancy.empty()) {
      jl["occupancy"] = oj::array();
      for (const auto& [ch, lp] : l.occupancy) jl["occupancy"].push_back({{"channel", ch}, {"lightpath", lp}});
    }
    doc["links"].push_back(std::move(jl));
  }
  doc["grid"] = oj::array();
  for (const auto& c : g.grid())
    doc["grid"].push_back(
        {{"label", c.label}, {"center_nm", c.center_nm}, {"width_ghz", c.width_ghz}, {"band", std::string(to_string(c.band))}});
  return doc;
}

}  // namespace qnet::topology
