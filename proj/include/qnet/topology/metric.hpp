#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qnet/core/error.hpp"
#include "qnet/core/loss.hpp"
#include "qnet/topology/graph.hpp"

namespace qnet::topology {

/// Loss of traversing `link` into `far_node` on the given band:
/// length x attenuation(band) + insertion loss of the node being entered.
/// PDL and PMD are carried on the node but do not enter this default metric.
inline Loss edge_metric(const FiberLink& link, const NetworkNode& far_node, Band band) {
  auto coeff = link.attenuation(band);
  if (!coeff)
    throw MissingBandCoefficient("link '" + link.id + "' declares no attenuation for " +
                                 std::string(to_string(band)));
  return Loss::from_db(link.length_km * *coeff) + Loss::from_db(far_node.insertion_loss_db);
}

inline Loss edge_metric(const FiberLink& link, const NetworkNode& far_node,
                        const WavelengthChannel& channel) {
  return edge_metric(link, far_node, channel.band);
}

/// Extension point for metrics that also weigh PDL/PMD or other node attributes.
using EdgeMetricFn = std::function<Loss(const FiberLink&, const NetworkNode&, Band)>;

inline EdgeMetricFn default_edge_metric() {
  return [](const FiberLink& l, const NetworkNode& n, Band b) { return edge_metric(l, n, b); };
}

/// A path as a start node plus the ordered link ids it traverses.
struct Path {
  std::string src;
  std::vector<std::string> links;

  friend bool operator==(const Path&, const Path&) = default;
};

/// Node sequence visited by `path` (src first). Throws NonContiguousPath when a
/// link does not touch the node reached so far.
inline std::vector<std::string> node_sequence(const NetworkGraph& g, const Path& path) {
  std::vector<std::string> nodes{path.src};
  if (!g.has_node(path.src)) throw UnknownNode("unknown node '" + path.src + "'");
  for (const auto& id : path.links) {
    const auto& l = g.link(id);
    if (!l.touches(nodes.back()))
      throw NonContiguousPath("link '" + id + "' does not continue from node '" + nodes.back() + "'");
    nodes.push_back(l.other_end(nodes.back()));
  }
  return nodes;
}

inline Loss path_loss(const NetworkGraph& g, const Path& path, Band band,
                      const EdgeMetricFn& metric = default_edge_metric()) {
  auto nodes = node_sequence(g, path);
  Loss total;
  for (std::size_t i = 0; i < path.links.size(); ++i)
    total += metric(g.link(path.links[i]), g.node(nodes[i + 1]), band);
  return total;
}

/// Checks that consecutive links share a node (orientation is inferred).
inline void require_contiguous(const NetworkGraph& g, std::span<const std::string> links) {
  for (const auto& id : links) (void)g.link(id);
  if (links.size() < 2) return;
  const auto& first = g.link(links[0]);
  auto walks_from = [&](const std::string& start) {
    std::string cur = start;
    for (const auto& id : links) {
      const auto& l = g.link(id);
      if (!l.touches(cur)) return false;
      cur = l.other_end(cur);
    }
    return true;
  };
  if (!walks_from(first.a.node) && !walks_from(first.b.node))
    throw NonContiguousPath("links do not form a contiguous path starting at '" + first.id + "'");
}

/// A channel is usable on a link when the link is up, has spare capacity, the
/// channel is not reserved there, and the link declares a coefficient for its band.
inline bool channel_free_on(const FiberLink& l, const WavelengthChannel& ch) {
  return l.admin_up && !l.is_full() && !l.occupancy.count(ch.label) && l.attenuation(ch.band).has_value();
}

/// Wavelength-continuity set: grid channels free on every link, in grid order.
/// An empty path yields the full grid.
inline std::vector<WavelengthChannel> available_channels(const NetworkGraph& g,
                                                         std::span<const std::string> links) {
  require_contiguous(g, links);
  std::vector<WavelengthChannel> out;
  for (const auto& ch : g.grid()) {
    bool ok = true;
    for (const auto& id : links)
      if (!channel_free_on(g.link(id), ch)) {
        ok = false;
        break;
      }
    if (ok) out.push_back(ch);
  }
  return out;
}

}  // namespace qnet::topology
