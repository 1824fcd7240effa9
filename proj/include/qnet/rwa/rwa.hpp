#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qnet/core/error.hpp"
#include "qnet/core/loss.hpp"
#include "qnet/rwa/ksp.hpp"
#include "qnet/topology/graph.hpp"
#include "qnet/topology/metric.hpp"

namespace qnet::rwa {

using topology::Band;
using topology::NetworkGraph;
using topology::WavelengthChannel;

enum class WavelengthPolicy { FirstFit, LowestLossFit, ExplicitPreference };

struct RwaConstraints {
  std::optional<Band> required_band;  // nullopt = any band
  Loss max_loss = Loss::unbounded();
  std::size_t k_paths = 4;
  WavelengthPolicy policy = WavelengthPolicy::FirstFit;
  std::vector<std::string> preference;  // channel labels, ExplicitPreference only
  std::set<std::string> excluded_nodes;  // never traversed (e.g. quarantined resources)
  std::set<std::string> excluded_channels;
  topology::EdgeMetricFn metric = topology::default_edge_metric();

  void validate() const {
    if (k_paths < 1) throw PreconditionViolation("k_paths must be >= 1");
    if (!max_loss.is_unbounded() && max_loss <= Loss::zero())
      throw PreconditionViolation("max_loss_db must be > 0 when bounded");
  }
};

struct Lightpath {
  std::string id;
  topology::Path path;
  std::vector<std::string> nodes;
  WavelengthChannel channel;
  Loss total_loss;

  const std::string& src() const { return nodes.front(); }
  const std::string& dst() const { return nodes.back(); }

  friend bool operator==(const Lightpath&, const Lightpath&) = default;
};

struct Blocked {
  std::string reason;
};

using RwaOutcome = std::variant<Lightpath, Blocked>;
using DualOutcome = std::variant<std::pair<Lightpath, Lightpath>, Blocked>;

namespace detail {

/// Hop weight used for path ordering. With a required band the metric is the
/// loss on that band; otherwise the smallest loss over the grid's bands that
/// the link declares.
inline HopWeight ordering_weight(const NetworkGraph& g, const RwaConstraints& c) {
  std::set<Band> bands;
  if (c.required_band) {
    bands.insert(*c.required_band);
  } else {
    for (const auto& ch : g.grid()) bands.insert(ch.band);
  }
  return [bands, metric = c.metric](const topology::FiberLink& l,
                                    const topology::NetworkNode& far) -> std::optional<Loss> {
    if (!l.admin_up) return std::nullopt;
    std::optional<Loss> best;
    for (auto b : bands) {
      if (!l.attenuation(b)) continue;
      auto w = metric(l, far, b);
      if (!best || w < *best) best = w;
    }
    return best;
  };
}

inline void check_endpoints(const NetworkGraph& g, const std::string& src, const std::string& dst) {
  if (!g.has_node(src)) throw UnknownNode("unknown node '" + src + "'");
  if (!g.has_node(dst)) throw UnknownNode("unknown node '" + dst + "'");
  if (src == dst) throw PreconditionViolation("source and destination are both '" + src + "'");
}

}  // namespace detail

/// Up to k loop-free paths ascending by loss (ties: hops, then link ids).
/// Paths above `max_loss` are dropped. An unreachable destination yields an
/// empty list.
inline std::vector<RankedPath> find_and_sort_paths(const NetworkGraph& g, const std::string& src,
                                                   const std::string& dst, const RwaConstraints& c) {
  c.validate();
  detail::check_endpoints(g, src, dst);
  if (c.excluded_nodes.count(src) || c.excluded_nodes.count(dst)) return {};
  return k_shortest_paths(g, src, dst, c.k_paths, detail::ordering_weight(g, c), c.excluded_nodes, c.max_loss);
}

/// Channels free along the whole path, filtered by band and exclusions,
/// ordered by the policy.
inline std::vector<WavelengthChannel> sort_wavelengths(const NetworkGraph& g, const topology::Path& path,
                                                       const RwaConstraints& c, WavelengthPolicy policy) {
  (void)topology::node_sequence(g, path);  // oriented contiguity from path.src
  auto free = topology::available_channels(g, path.links);
  std::vector<WavelengthChannel> out;
  for (auto& ch : free) {
    if (c.required_band && ch.band != *c.required_band) continue;
    if (c.excluded_channels.count(ch.label)) continue;
    out.push_back(std::move(ch));
  }
  switch (policy) {
    case WavelengthPolicy::FirstFit:
      break;
    case WavelengthPolicy::LowestLossFit: {
      std::vector<std::pair<Loss, WavelengthChannel>> scored;
      for (auto& ch : out) scored.emplace_back(topology::path_loss(g, path, ch.band, c.metric), std::move(ch));
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto& x, const auto& y) { return x.first < y.first; });
      out.clear();
      for (auto& [_, ch] : scored) out.push_back(std::move(ch));
      break;
    }
    case WavelengthPolicy::ExplicitPreference: {
      std::vector<WavelengthChannel> ordered;
      for (const auto& label : c.preference)
        for (const auto& ch : out)
          if (ch.label == label) ordered.push_back(ch);
      out = std::move(ordered);
      break;
    }
  }
  return out;
}

inline std::vector<WavelengthChannel> sort_wavelengths(const NetworkGraph& g, const topology::Path& path,
                                                       const RwaConstraints& c) {
  return sort_wavelengths(g, path, c, c.policy);
}

/// Marks the lightpath's channel on every hop; all-or-nothing.
inline void reserve(NetworkGraph& g, const Lightpath& lp) {
  std::size_t done = 0;
  try {
    for (; done < lp.path.links.size(); ++done) g.occupy(lp.path.links[done], lp.channel.label, lp.id);
  } catch (...) {
    for (std::size_t i = 0; i < done; ++i) g.vacate(lp.path.links[i], lp.channel.label, lp.id);
    throw;
  }
}

inline bool is_reserved(const NetworkGraph& g, const Lightpath& lp) {
  for (const auto& id : lp.path.links) {
    const auto& occ = g.link(id).occupancy;
    auto it = occ.find(lp.channel.label);
    if (it == occ.end() || it->second != lp.id) return false;
  }
  return !lp.path.links.empty();
}

/// Frees the lightpath's channel on every hop. Releasing a lightpath that is
/// not (or no longer) reserved throws NotReserved and changes nothing.
inline void release(NetworkGraph& g, const Lightpath& lp) {
  if (!is_reserved(g, lp)) throw NotReserved("lightpath '" + lp.id + "' is not reserved");
  for (const auto& id : lp.path.links) g.vacate(id, lp.channel.label, lp.id);
}

/// Shortest-path RWA: first path (in sorted order) that has an available
/// wavelength gets the first wavelength in policy order; the pair is reserved.
inline RwaOutcome sp_rwa(NetworkGraph& g, const std::string& src, const std::string& dst,
                         const RwaConstraints& c) {
  auto paths = find_and_sort_paths(g, src, dst, c);
  if (paths.empty()) return Blocked{"no path from " + src + " to " + dst};
  for (const auto& p : paths) {
    auto wavelengths = sort_wavelengths(g, p.path, c);
    for (const auto& wl : wavelengths) {
      Lightpath lp;
      lp.id = g.next_lightpath_id();
      lp.path = p.path;
      lp.nodes = p.nodes;
      lp.channel = wl;
      lp.total_loss = topology::path_loss(g, p.path, wl.band, c.metric);
      reserve(g, lp);
      return lp;
    }
  }
  return Blocked{"no wavelength available on any candidate path from " + src + " to " + dst};
}

/// Two lightpaths a->bsm and b->bsm that can be held at the same time.
/// Leg-one options are tried in sp_rwa order; a failure leaves the graph's
/// occupancy exactly as it was before the call.
inline DualOutcome route_to_bsm(NetworkGraph& g, const std::string& node_a, const std::string& node_b,
                                const std::string& bsm, const RwaConstraints& c) {
  if (g.node(bsm).kind != topology::NodeKind::BSM)
    throw PreconditionViolation("node '" + bsm + "' is not a BSM node");
  detail::check_endpoints(g, node_a, bsm);
  detail::check_endpoints(g, node_b, bsm);
  auto paths_a = find_and_sort_paths(g, node_a, bsm, c);
  for (const auto& p : paths_a) {
    for (const auto& wl : sort_wavelengths(g, p.path, c)) {
      Lightpath leg_a;
      leg_a.id = g.next_lightpath_id();
      leg_a.path = p.path;
      leg_a.nodes = p.nodes;
      leg_a.channel = wl;
      leg_a.total_loss = topology::path_loss(g, p.path, wl.band, c.metric);
      reserve(g, leg_a);
      auto leg_b = sp_rwa(g, node_b, bsm, c);
      if (auto* lp = std::get_if<Lightpath>(&leg_b)) return std::make_pair(std::move(leg_a), std::move(*lp));
      release(g, leg_a);
    }
  }
  return Blocked{"no simultaneously feasible lightpaths " + node_a + "->" + bsm + " and " + node_b + "->" + bsm};
}

}  // namespace qnet::rwa
