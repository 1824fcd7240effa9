#pragma once

// In-process publish/subscribe bus on top of the event engine. Topic filters
// follow MQTT rules: '+' matches one level, a trailing '#' matches the rest.

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qnet/sim/engine.hpp"

namespace qnet::sim {

struct Message {
  SimTime t = 0;
  std::string topic;
  std::string sender;
  std::string correlation_id;
  std::uint64_t msg_id = 0;
  Json payload;
};

inline std::vector<std::string_view> split_topic(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto slash = s.find('/', start);
    out.push_back(s.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return out;
}

inline bool topic_matches(std::string_view filter, std::string_view topic) {
  auto f = split_topic(filter), t = split_topic(topic);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] == "#") return i + 1 == f.size();
    if (i >= t.size()) return false;
    if (f[i] != "+" && f[i] != t[i]) return false;
  }
  return f.size() == t.size();
}

class Bus {
 public:
  using Handler = std::function<void(const Message&)>;
  using SubscriptionId = std::uint64_t;

  explicit Bus(Engine& engine, SimTime latency = 0) : engine_(engine), latency_(latency) {}

  SubscriptionId subscribe(std::string filter, Handler h) {
    auto id = next_sub_++;
    subs_.emplace(id, Sub{std::move(filter), std::move(h)});
    return id;
  }

  void unsubscribe(SubscriptionId id) { subs_.erase(id); }

  /// At-least-once testing hook: every later publish on a matching topic is
  /// delivered `copies` extra times (same msg_id), each `gap` after the last.
  void inject_duplicates(std::string filter, int copies = 1, SimTime gap = 1) {
    dupes_.push_back({std::move(filter), copies, gap});
  }

  std::uint64_t publish(const std::string& topic, const std::string& sender, const std::string& correlation_id,
                        Json payload, SimTime extra_delay = 0) {
    std::uint64_t msg_id = next_msg_++;
    payload["msg_id"] = msg_id;
    SimTime at = latency_ + extra_delay;
    enqueue(topic, sender, correlation_id, payload, msg_id, at);
    for (const auto& d : dupes_) {
      if (!topic_matches(d.filter, topic)) continue;
      for (int c = 1; c <= d.copies; ++c) enqueue(topic, sender, correlation_id, payload, msg_id, at + c * d.gap);
    }
    return msg_id;
  }

  Engine& engine() { return engine_; }

 private:
  struct Sub {
    std::string filter;
    Handler handler;
  };
  struct Dupe {
    std::string filter;
    int copies;
    SimTime gap;
  };

  void enqueue(const std::string& topic, const std::string& sender, const std::string& correlation_id,
               const Json& payload, std::uint64_t msg_id, SimTime delay) {
    Event ev;
    ev.topic = topic;
    ev.sender = sender;
    ev.correlation_id = correlation_id;
    ev.payload = payload;
    ev.action = [this, msg_id](const Event& e) { deliver(e, msg_id); };
    engine_.schedule_in(delay, std::move(ev));
  }

  void deliver(const Event& e, std::uint64_t msg_id) {
    Message m{e.t, e.topic, e.sender, e.correlation_id, msg_id, e.payload};
    // Snapshot: handlers may (un)subscribe while we deliver.
    std::vector<Handler> targets;
    for (const auto& [id, s] : subs_)
      if (topic_matches(s.filter, m.topic)) targets.push_back(s.handler);
    for (auto& h : targets) h(m);
  }

  Engine& engine_;
  SimTime latency_;
  std::map<SubscriptionId, Sub> subs_;
  std::vector<Dupe> dupes_;
  SubscriptionId next_sub_ = 0;
  std::uint64_t next_msg_ = 1;
};

/// Remembers (correlation id, msg id) pairs so handlers can ignore redelivery.
class Deduplicator {
 public:
  bool first_delivery(const Message& m) { return seen_.emplace(m.correlation_id, m.msg_id).second; }

 private:
  std::set<std::pair<std::string, std::uint64_t>> seen_;
};

}  // namespace qnet::sim
