#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qnet/core/error.hpp"
#include "qnet/topology/types.hpp"

namespace qnet::topology {

/// Undirected multigraph of network resources and fiber links.
///
/// Parallel links between the same node pair are allowed and keep independent
/// occupancy. Mutation of occupancy is expected to come from a single writer
/// (the control-plane event loop); concurrent readers need their own copy.
class NetworkGraph {
 public:
  void add_node(NetworkNode node) {
    if (node.id.empty()) throw SchemaError("node with empty id");
    if (nodes_.count(node.id)) throw DuplicateId("duplicate node id '" + node.id + "'");
    if (node.kind == NodeKind::EPS &&
        (node.wavelength_outputs < 2 || node.wavelength_outputs % 2 != 0))
      throw SchemaError("EPS '" + node.id + "' must declare an even number (>= 2) of wavelength outputs");
    if (node.insertion_loss_db < 0 || node.pdl_db < 0 || node.pmd_ps < 0)
      throw SchemaError("node '" + node.id + "': losses and PMD must be >= 0");
    std::set<int> seen;
    for (const auto& p : node.ports) {
      if (p.index < 0) throw SchemaError("node '" + node.id + "': negative port index");
      if (!seen.insert(p.index).second)
        throw DuplicateId("node '" + node.id + "': duplicate port index " + std::to_string(p.index));
    }
    adjacency_[node.id];
    auto id = node.id;
    nodes_.emplace(std::move(id), std::move(node));
  }

  void add_link(FiberLink link) {
    if (link.id.empty()) throw SchemaError("link with empty id");
    if (links_.count(link.id)) throw DuplicateId("duplicate link id '" + link.id + "'");
    for (const Endpoint* ep : {&link.a, &link.b}) {
      auto it = nodes_.find(ep->node);
      if (it == nodes_.end())
        throw DanglingEndpoint("link '" + link.id + "' references unknown node '" + ep->node + "'");
      if (!it->second.has_port(ep->port))
        throw DanglingEndpoint("link '" + link.id + "' references unknown port " +
                               std::to_string(ep->port) + " on node '" + ep->node + "'");
      if (port_owner_.count(*ep))
        throw SchemaError("port " + ep->node + ":" + std::to_string(ep->port) +
                          " already carries link '" + port_owner_.at(*ep) + "'");
    }
    if (link.a.node == link.b.node) throw SchemaError("link '" + link.id + "' is a self-loop");
    if (!(link.length_km > 0.0)) throw SchemaError("link '" + link.id + "': length_km must be > 0");
    if (link.total_wavelengths < 1)
      throw SchemaError("link '" + link.id + "': total_wavelengths must be >= 1");
    if (link.attenuation_db_per_km.empty())
      throw SchemaError("link '" + link.id + "' declares no attenuation coefficients");
    for (const auto& [band, coeff] : link.attenuation_db_per_km)
      if (!(coeff > 0.0))
        throw SchemaError("link '" + link.id + "': attenuation for " + std::string(to_string(band)) +
                          " must be > 0");
    port_owner_[link.a] = link.id;
    port_owner_[link.b] = link.id;
    insert_sorted(adjacency_[link.a.node], link.id);
    insert_sorted(adjacency_[link.b.node], link.id);
    auto id = link.id;
    links_.emplace(std::move(id), std::move(link));
  }

  void add_channel(WavelengthChannel ch) {
    validate_channel(ch);
    for (const auto& existing : grid_)
      if (existing.label == ch.label) throw DuplicateId("duplicate channel label '" + ch.label + "'");
    grid_.push_back(std::move(ch));
  }

  const std::map<std::string, NetworkNode>& nodes() const { return nodes_; }
  const std::map<std::string, FiberLink>& links() const { return links_; }
  /// Channels in declaration order; first-fit assignment follows this order.
  const std::vector<WavelengthChannel>& grid() const { return grid_; }

  bool has_node(std::string_view id) const { return nodes_.find(std::string(id)) != nodes_.end(); }
  bool has_link(std::string_view id) const { return links_.find(std::string(id)) != links_.end(); }

  const NetworkNode& node(std::string_view id) const {
    auto it = nodes_.find(std::string(id));
    if (it == nodes_.end()) throw UnknownNode("unknown node '" + std::string(id) + "'");
    return it->second;
  }

  const FiberLink& link(std::string_view id) const {
    auto it = links_.find(std::string(id));
    if (it == links_.end()) throw SchemaError("unknown link '" + std::string(id) + "'");
    return it->second;
  }

  const WavelengthChannel& channel(std::string_view label) const {
    for (const auto& ch : grid_)
      if (ch.label == label) return ch;
    throw SchemaError("unknown channel '" + std::string(label) + "'");
  }

  bool has_channel(std::string_view label) const {
    return std::any_of(grid_.begin(), grid_.end(), [&](const auto& c) { return c.label == label; });
  }

  /// Link ids incident to `node`, sorted.
  const std::vector<std::string>& incident_links(std::string_view node) const {
    auto it = adjacency_.find(std::string(node));
    if (it == adjacency_.end()) throw UnknownNode("unknown node '" + std::string(node) + "'");
    return it->second;
  }

  /// Link id attached to a given port, if any.
  std::optional<std::string> link_at_port(const Endpoint& ep) const {
    auto it = port_owner_.find(ep);
    if (it == port_owner_.end()) return std::nullopt;
    return it->second;
  }

  void occupy(std::string_view link_id, const std::string& label, const std::string& owner) {
    auto& l = mutable_link(link_id);
    if (l.occupancy.count(label))
      throw DoubleBooking("channel " + label + " already reserved on link " + l.id + " by " +
                          l.occupancy.at(label));
    if (l.is_full()) throw DoubleBooking("link " + l.id + " has no free wavelengths");
    l.occupancy.emplace(label, owner);
  }

  void vacate(std::string_view link_id, const std::string& label, const std::string& owner) {
    auto& l = mutable_link(link_id);
    auto it = l.occupancy.find(label);
    if (it == l.occupancy.end() || it->second != owner)
      throw NotReserved("channel " + label + " on link " + l.id + " is not held by " + owner);
    l.occupancy.erase(it);
  }

  void set_link_admin_state(std::string_view link_id, bool up) { mutable_link(link_id).admin_up = up; }

  std::string next_lightpath_id() { return "lp-" + std::to_string(++lightpath_counter_); }

  std::size_t occupied_channel_count() const {
    std::size_t n = 0;
    for (const auto& [_, l] : links_) n += l.occupancy.size();
    return n;
  }

  /// Structural equality (nodes, links with occupancy, grid); ignores the id counter.
  friend bool operator==(const NetworkGraph& x, const NetworkGraph& y) {
    return x.nodes_ == y.nodes_ && x.links_ == y.links_ && x.grid_ == y.grid_;
  }

 private:
  static void insert_sorted(std::vector<std::string>& v, const std::string& s) {
    v.insert(std::upper_bound(v.begin(), v.end(), s), s);
  }

  FiberLink& mutable_link(std::string_view id) {
    auto it = links_.find(std::string(id));
    if (it == links_.end()) throw SchemaError("unknown link '" + std::string(id) + "'");
    return it->second;
  }

  std::map<std::string, NetworkNode> nodes_;
  std::map<std::string, FiberLink> links_;
  std::vector<WavelengthChannel> grid_;
  std::map<std::string, std::vector<std::string>> adjacency_;
  std::map<Endpoint, std::string> port_owner_;
  std::uint64_t lightpath_counter_ = 0;
};

}  // namespace qnet::topology
