#pragma once

// Tagged topologies for control-plane tests: every connected port carries the
// "<remote node>:<remote port>" tag the SDN agent discovers from.

#include <string>
#include <tuple>
#include <vector>

#include "qnet/topology/graph.hpp"
#include "support/graphs.hpp"

namespace qnet::testing {

struct Wire {
  std::string id, a;
  int pa;
  std::string b;
  int pb;
  double km;
};

/// Builds nodes with tags taken from `wires`, then the links themselves.
inline NetworkGraph tagged_graph(std::vector<NetworkNode> nodes, const std::vector<Wire>& wires,
                                 const std::vector<WavelengthChannel>& grid, double o_att = 0.33,
                                 double c_att = 0.2, int wavelengths = 8) {
  auto set_tag = [&](const std::string& node, int port, const std::string& tag) {
    for (auto& n : nodes)
      if (n.id == node)
        for (auto& p : n.ports)
          if (p.index == port) p.tag = tag;
  };
  for (const auto& w : wires) {
    set_tag(w.a, w.pa, w.b + ":" + std::to_string(w.pb));
    set_tag(w.b, w.pb, w.a + ":" + std::to_string(w.pa));
  }
  NetworkGraph g;
  for (auto& n : nodes) g.add_node(std::move(n));
  for (const auto& ch : grid) g.add_channel(ch);
  for (const auto& w : wires) {
    FiberLink l;
    l.id = w.id;
    l.a = {w.a, w.pa};
    l.b = {w.b, w.pb};
    l.length_km = w.km;
    l.attenuation_db_per_km = {{Band::OBand, o_att}, {Band::CBand, c_att}};
    l.total_wavelengths = wavelengths;
    g.add_link(std::move(l));
  }
  return g;
}

/// O1..O4 quantum channels plus C31..C33 (C32 is the sync channel).
inline std::vector<WavelengthChannel> canonical_grid() {
  return {o_channel(1), o_channel(2), o_channel(3), o_channel(4), c_channel(31), c_channel(32), c_channel(33)};
}

/// One EPS (N = 4), one 16x16 switch, two Q-Nodes:
///   E1:0 - SW1:0 (5 km), SW1:1 - QN1:0 (10 km), SW1:2 - QN2:0 (12 km)
/// With `with_bsm`, a BSM node hangs off SW1:3 (3 km).
inline NetworkGraph canonical_topology(bool with_bsm = false) {
  std::vector<NetworkNode> nodes{make_node("E1", NodeKind::EPS, 4), make_node("SW1", NodeKind::OpticalSwitch, 16),
                                 make_node("QN1", NodeKind::QNode, 2), make_node("QN2", NodeKind::QNode, 2)};
  std::vector<Wire> wires{{"L1", "E1", 0, "SW1", 0, 5.0}, {"L2", "SW1", 1, "QN1", 0, 10.0},
                          {"L3", "SW1", 2, "QN2", 0, 12.0}};
  if (with_bsm) {
    nodes.push_back(make_node("BSM1", NodeKind::BSM, 2));
    wires.push_back({"L4", "SW1", 3, "BSM1", 0, 3.0});
  }
  return tagged_graph(std::move(nodes), wires, canonical_grid());
}

}  // namespace qnet::testing
