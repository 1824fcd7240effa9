#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "qnet/core/loss.hpp"
#include "qnet/topology/graph.hpp"
#include "qnet/topology/metric.hpp"

namespace qnet::rwa {

/// Total order on candidate paths: loss, then hop count, then the link-id
/// sequence compared lexicographically.
struct PathKey {
  Loss loss;
  std::vector<std::string> links;

  std::size_t hops() const { return links.size(); }

  friend bool operator<(const PathKey& x, const PathKey& y) {
    if (x.loss != y.loss) return x.loss < y.loss;
    if (x.hops() != y.hops()) return x.hops() < y.hops();
    return x.links < y.links;
  }
  friend bool operator==(const PathKey& x, const PathKey& y) {
    return x.loss == y.loss && x.links == y.links;
  }
};

/// Per-hop weight; nullopt marks the hop as unusable.
using HopWeight = std::function<std::optional<Loss>(const topology::FiberLink&, const topology::NetworkNode& far)>;

struct RankedPath {
  topology::Path path;
  std::vector<std::string> nodes;  // src .. dst
  Loss loss;

  PathKey key() const { return PathKey{loss, path.links}; }
};

namespace detail {

struct Label {
  PathKey key;
  std::vector<std::string> nodes;
};

struct LabelGreater {
  bool operator()(const Label& x, const Label& y) const { return y.key < x.key; }
};

}  // namespace detail

/// Dijkstra under the PathKey order. The order is preserved when two labels
/// of equal hop count are extended by the same hop, which makes label-setting
/// exact for the lexicographic tie-break as well.
inline std::optional<RankedPath> shortest_path(const topology::NetworkGraph& g, const std::string& src,
                                               const std::string& dst, const HopWeight& weight,
                                               const std::set<std::string>& banned_links = {},
                                               const std::set<std::string>& banned_nodes = {}) {
  std::map<std::string, PathKey> settled;
  std::priority_queue<detail::Label, std::vector<detail::Label>, detail::LabelGreater> open;
  open.push(detail::Label{PathKey{Loss::zero(), {}}, {src}});
  std::map<std::string, PathKey> best;
  best[src] = PathKey{Loss::zero(), {}};
  while (!open.empty()) {
    auto cur = open.top();
    open.pop();
    const auto& at = cur.nodes.back();
    if (settled.count(at)) continue;
    settled.emplace(at, cur.key);
    if (at == dst) {
      RankedPath rp;
      rp.path = topology::Path{src, cur.key.links};
      rp.nodes = cur.nodes;
      rp.loss = cur.key.loss;
      return rp;
    }
    for (const auto& lid : g.incident_links(at)) {
      if (banned_links.count(lid)) continue;
      const auto& link = g.link(lid);
      const auto& next = link.other_end(at);
      if (settled.count(next) || banned_nodes.count(next)) continue;
      auto w = weight(link, g.node(next));
      if (!w) continue;
      detail::Label nl{PathKey{cur.key.loss + *w, cur.key.links}, cur.nodes};
      nl.key.links.push_back(lid);
      nl.nodes.push_back(next);
      auto it = best.find(next);
      if (it != best.end() && !(nl.key < it->second)) continue;
      best[next] = nl.key;
      open.push(std::move(nl));
    }
  }
  return std::nullopt;
}

/// Yen's k shortest loop-free paths, ordered by PathKey. `stop_above`
/// truncates the enumeration once the next path would exceed that loss.
inline std::vector<RankedPath> k_shortest_paths(const topology::NetworkGraph& g, const std::string& src,
                                                const std::string& dst, std::size_t k, const HopWeight& weight,
                                                const std::set<std::string>& banned_nodes = {},
                                                Loss stop_above = Loss::unbounded()) {
  std::vector<RankedPath> accepted;
  if (k == 0 || src == dst) return accepted;
  auto first = shortest_path(g, src, dst, weight, {}, banned_nodes);
  if (!first || first->loss > stop_above) return accepted;
  accepted.push_back(std::move(*first));

  std::map<PathKey, RankedPath> candidates;
  std::set<std::vector<std::string>> seen{accepted.front().path.links};

  while (accepted.size() < k) {
    const RankedPath prev = accepted.back();
    for (std::size_t i = 0; i + 1 < prev.nodes.size(); ++i) {
      const std::string& spur = prev.nodes[i];
      std::vector<std::string> root_links(prev.path.links.begin(), prev.path.links.begin() + i);

      std::set<std::string> banned_links;
      for (const auto& p : accepted)
        if (p.path.links.size() > i && std::equal(root_links.begin(), root_links.end(), p.path.links.begin()))
          banned_links.insert(p.path.links[i]);
      std::set<std::string> banned = banned_nodes;
      for (std::size_t j = 0; j < i; ++j) banned.insert(prev.nodes[j]);

      auto spur_path = shortest_path(g, spur, dst, weight, banned_links, banned);
      if (!spur_path) continue;

      RankedPath total;
      total.path.src = src;
      total.path.links = root_links;
      total.path.links.insert(total.path.links.end(), spur_path->path.links.begin(), spur_path->path.links.end());
      if (seen.count(total.path.links)) continue;
      total.nodes.assign(prev.nodes.begin(), prev.nodes.begin() + i);
      total.nodes.insert(total.nodes.end(), spur_path->nodes.begin(), spur_path->nodes.end());
      Loss root_loss;
      for (std::size_t j = 0; j < i; ++j)
        root_loss += *weight(g.link(root_links[j]), g.node(prev.nodes[j + 1]));
      total.loss = root_loss + spur_path->loss;
      seen.insert(total.path.links);
      auto key = total.key();
      candidates.emplace(std::move(key), std::move(total));
    }
    if (candidates.empty()) break;
    auto best = candidates.begin();
    if (best->second.loss > stop_above) break;
    accepted.push_back(std::move(best->second));
    candidates.erase(best);
  }
  return accepted;
}

}  // namespace qnet::rwa
