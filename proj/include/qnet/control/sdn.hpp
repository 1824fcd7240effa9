#pragma once

// SDN agent: knows the physical topology only through port tags, verifies
// the connectivity that resources claim at registration, and keeps the
// per-switch crossconnect tables.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "qnet/control/protocol.hpp"
#include "qnet/rwa/rwa.hpp"
#include "qnet/topology/graph.hpp"

namespace qnet::control {

using topology::Endpoint;
using topology::NetworkGraph;
using topology::NodeKind;

/// Port tag format "<remote node>:<remote port>".
inline std::optional<Endpoint> parse_tag(const std::string& tag) {
  auto colon = tag.rfind(':');
  if (tag.empty() || colon == std::string::npos || colon == 0 || colon + 1 == tag.size()) return std::nullopt;
  try {
    std::size_t used = 0;
    int port = std::stoi(tag.substr(colon + 1), &used);
    if (used != tag.size() - colon - 1) return std::nullopt;
    return Endpoint{tag.substr(0, colon), port};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::string format_tag(const Endpoint& ep) { return ep.node + ":" + std::to_string(ep.port); }

struct ConnectivityClaim {
  int local_port = 0;
  Endpoint remote;

  friend bool operator==(const ConnectivityClaim&, const ConnectivityClaim&) = default;
};

struct ResourceFeatures {
  std::set<QubitType> qubit_types;
  int wavelength_outputs = 0;
  double detector_efficiency = 0.3;
  double dark_rate_hz = 100.0;

  friend bool operator==(const ResourceFeatures&, const ResourceFeatures&) = default;
};

struct ResourceRegistration {
  std::string resource_id;
  NodeKind kind = NodeKind::QNode;
  ResourceFeatures features;
  std::vector<ConnectivityClaim> claims;

  friend bool operator==(const ResourceRegistration&, const ResourceRegistration&) = default;
};

inline Json to_json(const ResourceRegistration& r) {
  Json j = make_payload(msg::kRegister);
  j["resource_id"] = r.resource_id;
  j["kind"] = std::string(topology::to_string(r.kind));
  Json f;
  f["qubit_types"] = Json::array();
  for (auto q : r.features.qubit_types) f["qubit_types"].push_back(std::string(topology::to_string(q)));
  f["wavelength_outputs"] = r.features.wavelength_outputs;
  f["detector_efficiency"] = r.features.detector_efficiency;
  f["dark_rate_hz"] = r.features.dark_rate_hz;
  j["features"] = std::move(f);
  j["claims"] = Json::array();
  for (const auto& c : r.claims) j["claims"].push_back({{"local_port", c.local_port}, {"remote", format_tag(c.remote)}});
  return j;
}

template <class J>
ResourceRegistration registration_from_json(const J& j) {
  ResourceRegistration r;
  try {
    r.resource_id = j.at("resource_id").template get<std::string>();
    r.kind = topology::node_kind_from_string(j.at("kind").template get<std::string>());
    const auto& f = j.at("features");
    for (const auto& q : f.at("qubit_types"))
      r.features.qubit_types.insert(topology::qubit_type_from_string(q.template get<std::string>()));
    r.features.wavelength_outputs = f.at("wavelength_outputs").template get<int>();
    r.features.detector_efficiency = f.at("detector_efficiency").template get<double>();
    r.features.dark_rate_hz = f.at("dark_rate_hz").template get<double>();
    for (const auto& c : j.at("claims")) {
      auto remote = parse_tag(c.at("remote").template get<std::string>());
      if (!remote) throw SchemaError("registration: malformed claim tag");
      r.claims.push_back({c.at("local_port").template get<int>(), *remote});
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("registration: ") + e.what());
  }
  return r;
}

/// The registration a resource derives from its own configuration: one claim
/// per tagged port.
inline ResourceRegistration registration_from_config(const topology::NetworkNode& n, double detector_efficiency = 0.3,
                                                     double dark_rate_hz = 100.0) {
  ResourceRegistration r;
  r.resource_id = n.id;
  r.kind = n.kind;
  r.features.qubit_types = n.qubit_types;
  r.features.wavelength_outputs = n.wavelength_outputs;
  r.features.detector_efficiency = detector_efficiency;
  r.features.dark_rate_hz = dark_rate_hz;
  for (const auto& p : n.ports)
    if (auto remote = parse_tag(p.tag)) r.claims.push_back({p.index, *remote});
  return r;
}

/// Port-to-port crossconnect for one channel inside a switch.
struct CrossConnect {
  int in_port = 0;
  int out_port = 0;
  std::string channel;

  friend auto operator<=>(const CrossConnect&, const CrossConnect&) = default;
};

class SdnAgent {
 public:
  explicit SdnAgent(const NetworkGraph& physical) : physical_(physical) {}

  /// Links whose two port tags name each other, as "<node>:<port>" pairs. This
  /// is all the agent can learn from passive switches.
  std::vector<std::pair<Endpoint, Endpoint>> discovered_links() const {
    std::vector<std::pair<Endpoint, Endpoint>> out;
    for (const auto& [id, n] : physical_.nodes()) {
      for (const auto& p : n.ports) {
        auto remote = parse_tag(p.tag);
        if (!remote || !physical_.has_node(remote->node)) continue;
        const auto* back = physical_.node(remote->node).port(remote->port);
        Endpoint here{id, p.index};
        if (back && parse_tag(back->tag) == here && here < *remote) out.emplace_back(here, *remote);
      }
    }
    return out;
  }

  /// Mismatch descriptions; empty when every claim agrees with the tags.
  std::vector<std::string> verify_claims(const ResourceRegistration& r) const {
    std::vector<std::string> problems;
    if (!physical_.has_node(r.resource_id)) return {"resource '" + r.resource_id + "' is not in the tag topology"};
    const auto& node = physical_.node(r.resource_id);
    if (node.kind != r.kind) problems.push_back("kind differs from the tag topology");
    for (const auto& c : r.claims) {
      const auto* port = node.port(c.local_port);
      auto tagged = port ? parse_tag(port->tag) : std::nullopt;
      if (!tagged) {
        problems.push_back("port " + std::to_string(c.local_port) + " has no tag");
        continue;
      }
      if (*tagged != c.remote) {
        problems.push_back("port " + std::to_string(c.local_port) + " claims " + format_tag(c.remote) + ", tag says " +
                           format_tag(*tagged));
        continue;
      }
      if (!physical_.link_at_port({r.resource_id, c.local_port}))
        problems.push_back("port " + std::to_string(c.local_port) + " carries no fiber");
    }
    return problems;
  }

  void set_switch_available(const std::string& sw, bool up) {
    if (up) down_.erase(sw);
    else down_.insert(sw);
  }
  bool switch_available(const std::string& sw) const { return !down_.count(sw); }

  /// Installs one crossconnect per switch on the lightpath. Re-sending the same
  /// lightpath is a no-op that still succeeds. Either every rule is installed
  /// or none is.
  std::size_t install_rules(const NetworkGraph& g, const rwa::Lightpath& lp) {
    auto wanted = rules_for(g, lp);
    for (const auto& [sw, cc] : wanted) {
      if (!switch_available(sw)) throw SwitchUnavailable("switch '" + sw + "' is unavailable");
      auto it = tables_[sw].find(cc);
      if (it != tables_[sw].end() && it->second != lp.id)
        throw DoubleBooking("switch '" + sw + "' already crossconnects this port pair on " + cc.channel + " for " +
                            it->second);
    }
    std::size_t added = 0;
    for (const auto& [sw, cc] : wanted) added += tables_[sw].emplace(cc, lp.id).second ? 1 : 0;
    return added;
  }

  std::size_t remove_rules(const NetworkGraph& g, const rwa::Lightpath& lp) {
    std::size_t removed = 0;
    for (const auto& [sw, cc] : rules_for(g, lp)) {
      auto t = tables_.find(sw);
      if (t == tables_.end()) continue;
      auto it = t->second.find(cc);
      if (it != t->second.end() && it->second == lp.id) {
        t->second.erase(it);
        ++removed;
      }
      if (t->second.empty()) tables_.erase(t);
    }
    return removed;
  }

  std::size_t rule_count(const std::string& sw) const {
    auto it = tables_.find(sw);
    return it == tables_.end() ? 0 : it->second.size();
  }
  std::size_t total_rules() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tables_) n += t.size();
    return n;
  }
  const std::map<std::string, std::map<CrossConnect, std::string>>& tables() const { return tables_; }

  const NetworkGraph& physical() const { return physical_; }

 private:
  static std::vector<std::pair<std::string, CrossConnect>> rules_for(const NetworkGraph& g, const rwa::Lightpath& lp) {
    std::vector<std::pair<std::string, CrossConnect>> out;
    for (std::size_t i = 1; i + 1 < lp.nodes.size(); ++i) {
      const auto& sw = lp.nodes[i];
      if (g.node(sw).kind != NodeKind::OpticalSwitch) continue;
      int in = g.link(lp.path.links[i - 1]).endpoint_at(sw).port;
      int outp = g.link(lp.path.links[i]).endpoint_at(sw).port;
      out.push_back({sw, CrossConnect{in, outp, lp.channel.label}});
    }
    return out;
  }

  const NetworkGraph& physical_;
  std::set<std::string> down_;
  std::map<std::string, std::map<CrossConnect, std::string>> tables_;
};

}  // namespace qnet::control
