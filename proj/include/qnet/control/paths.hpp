#pragma once

// EPS selection and atomic establishment of the lightpath set a request
// needs: EPS -> each node (quantum), node <-> node (sync), and for
// teleportation the two BSM legs.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "qnet/control/protocol.hpp"
#include "qnet/control/sdn.hpp"
#include "qnet/rwa/rwa.hpp"

namespace qnet::control {

using rwa::Lightpath;

inline constexpr const char* kSyncChannel = "C32";  // 1551.72 nm

struct RoutingPolicy {
  topology::Band quantum_band = topology::Band::OBand;
  std::string sync_channel = kSyncChannel;
  std::size_t k_paths = 4;
};

/// EPS bookkeeping: user pairs currently allocated per EPS.
using EpsAllocations = std::map<std::string, int>;

inline int eps_free_pairs(const NetworkGraph& g, const EpsAllocations& alloc, const std::string& eps) {
  auto it = alloc.find(eps);
  return g.node(eps).wavelength_outputs / 2 - (it == alloc.end() ? 0 : it->second);
}

struct EpsCandidate {
  std::string eps;
  std::size_t hops = 0;
  Loss loss;
};

struct Rejection {
  RejectReason reason;
  std::string detail;
};

inline rwa::RwaConstraints quantum_constraints(const RoutingPolicy& p, const std::set<std::string>& excluded) {
  rwa::RwaConstraints c;
  c.required_band = p.quantum_band;
  c.k_paths = p.k_paths;
  c.excluded_nodes = excluded;
  return c;
}

/// Sync lightpath: pinned to the sync channel when the grid has it, any C-band
/// channel otherwise.
inline rwa::RwaConstraints sync_constraints(const NetworkGraph& g, const RoutingPolicy& p,
                                            const std::set<std::string>& excluded) {
  rwa::RwaConstraints c;
  c.k_paths = p.k_paths;
  c.excluded_nodes = excluded;
  if (g.has_channel(p.sync_channel)) {
    c.required_band = g.channel(p.sync_channel).band;
    for (const auto& ch : g.grid())
      if (ch.label != p.sync_channel) c.excluded_channels.insert(ch.label);
  } else {
    c.required_band = topology::Band::CBand;
  }
  return c;
}

/// Candidate EPS ordering: fewest total hops, then lowest combined loss, then id.
/// `excluded` lists unschedulable resources; they are neither candidates nor
/// transit nodes.
inline std::variant<EpsCandidate, Rejection> select_eps(const EntanglementRequest& req, const NetworkGraph& g,
                                                        const std::set<std::string>& excluded,
                                                        const EpsAllocations& alloc, const RoutingPolicy& policy) {
  std::vector<std::string> capable;
  for (const auto& [id, n] : g.nodes())
    if (n.kind == NodeKind::EPS && !excluded.count(id) && n.qubit_types.count(req.qubit_type)) capable.push_back(id);
  if (capable.empty())
    return Rejection{RejectReason::NoCapableEps,
                     "no schedulable EPS supports " + std::string(topology::to_string(req.qubit_type))};
  std::vector<std::string> with_room;
  for (const auto& id : capable)
    if (eps_free_pairs(g, alloc, id) >= 1) with_room.push_back(id);
  if (with_room.empty()) return Rejection{RejectReason::NoCapacity, "every capable EPS is fully allocated"};

  std::vector<EpsCandidate> feasible;
  auto c = quantum_constraints(policy, excluded);
  for (const auto& id : with_room) {
    // Trial reservation on a scratch copy: both legs must fit together.
    NetworkGraph trial = g;
    auto a = rwa::sp_rwa(trial, id, req.node_a, c);
    auto* la = std::get_if<Lightpath>(&a);
    if (!la) continue;
    auto b = rwa::sp_rwa(trial, id, req.node_b, c);
    auto* lb = std::get_if<Lightpath>(&b);
    if (!lb) continue;
    feasible.push_back({id, la->path.links.size() + lb->path.links.size(), la->total_loss + lb->total_loss});
  }
  if (feasible.empty())
    return Rejection{RejectReason::NoFeasiblePaths, "no capable EPS reaches both " + req.node_a + " and " + req.node_b};
  std::sort(feasible.begin(), feasible.end(), [](const EpsCandidate& x, const EpsCandidate& y) {
    if (x.hops != y.hops) return x.hops < y.hops;
    if (x.loss != y.loss) return x.loss < y.loss;
    return x.eps < y.eps;
  });
  return feasible.front();
}

struct EstablishedPaths {
  Lightpath quantum_a;  // EPS -> node_a
  Lightpath quantum_b;  // EPS -> node_b
  Lightpath sync;       // node_a -> node_b
  std::optional<std::pair<Lightpath, Lightpath>> bsm_legs;

  std::vector<const Lightpath*> all() const {
    std::vector<const Lightpath*> v{&quantum_a, &quantum_b, &sync};
    if (bsm_legs) {
      v.push_back(&bsm_legs->first);
      v.push_back(&bsm_legs->second);
    }
    return v;
  }
};

inline Json to_json(const Lightpath& lp) {
  Json j;
  j["id"] = lp.id;
  j["nodes"] = lp.nodes;
  j["links"] = lp.path.links;
  j["channel"] = lp.channel.label;
  j["center_nm"] = lp.channel.center_nm;
  j["loss_db"] = lp.total_loss.db();
  return j;
}

/// Releases lightpaths and their switch rules; tolerant of partial state.
inline void teardown(NetworkGraph& g, SdnAgent& sdn, const std::vector<const Lightpath*>& lps) {
  for (const auto* lp : lps) {
    sdn.remove_rules(g, *lp);
    if (rwa::is_reserved(g, *lp)) rwa::release(g, *lp);
  }
}

/// Reserves every lightpath and installs switch rules, or leaves the graph and
/// rule tables unchanged and returns Blocked.
inline std::variant<EstablishedPaths, rwa::Blocked> establish_paths(NetworkGraph& g, SdnAgent& sdn,
                                                                    const EntanglementRequest& req,
                                                                    const std::string& eps,
                                                                    const std::set<std::string>& excluded,
                                                                    const RoutingPolicy& policy) {
  std::vector<Lightpath> held;
  auto rollback = [&](std::string why) -> std::variant<EstablishedPaths, rwa::Blocked> {
    std::vector<const Lightpath*> ptrs;
    for (const auto& lp : held) ptrs.push_back(&lp);
    teardown(g, sdn, ptrs);
    return rwa::Blocked{std::move(why)};
  };
  auto take = [&](rwa::RwaOutcome out) -> bool {
    if (auto* lp = std::get_if<Lightpath>(&out)) {
      held.push_back(std::move(*lp));
      return true;
    }
    return false;
  };
  auto qc = quantum_constraints(policy, excluded);
  if (!take(rwa::sp_rwa(g, eps, req.node_a, qc))) return rollback("no quantum lightpath " + eps + " -> " + req.node_a);
  if (!take(rwa::sp_rwa(g, eps, req.node_b, qc))) return rollback("no quantum lightpath " + eps + " -> " + req.node_b);
  if (!take(rwa::sp_rwa(g, req.node_a, req.node_b, sync_constraints(g, policy, excluded))))
    return rollback("no sync lightpath " + req.node_a + " -> " + req.node_b + " on " + policy.sync_channel);
  if (req.kind == RequestKind::Teleportation) {
    auto legs = rwa::route_to_bsm(g, req.node_a, req.node_b, req.bsm, qc);
    auto* pair = std::get_if<std::pair<Lightpath, Lightpath>>(&legs);
    if (!pair) return rollback("no BSM lightpaths to " + req.bsm);
    held.push_back(std::move(pair->first));
    held.push_back(std::move(pair->second));
  }
  try {
    for (const auto& lp : held) sdn.install_rules(g, lp);
  } catch (const SwitchUnavailable& e) {
    return rollback(e.what());
  }
  EstablishedPaths p{held[0], held[1], held[2], std::nullopt};
  if (held.size() == 5) p.bsm_legs = std::make_pair(held[3], held[4]);
  return p;
}

}  // namespace qnet::control
