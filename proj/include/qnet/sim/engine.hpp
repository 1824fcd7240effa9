#pragma once

// Deterministic discrete-event engine. Virtual time is integer nanoseconds;
// events fire in (time, seq) order with seq assigned at enqueue.

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnet/core/error.hpp"
#include "qnet/core/rng.hpp"

namespace qnet::sim {

using SimTime = std::int64_t;  // ns
using Json = nlohmann::ordered_json;

inline constexpr SimTime kNsPerSecond = 1'000'000'000;

inline SimTime seconds(double s) { return static_cast<SimTime>(s * 1e9 + (s >= 0 ? 0.5 : -0.5)); }
inline double to_seconds(SimTime t) { return static_cast<double>(t) / 1e9; }

struct TraceRecord {
  SimTime t_ns = 0;
  std::uint64_t seq = 0;
  std::string topic;
  std::string sender;
  std::string correlation_id;
  Json payload;

  Json to_json() const {
    Json j;
    j["t_ns"] = t_ns;
    j["seq"] = seq;
    j["topic"] = topic;
    j["sender"] = sender;
    j["correlation_id"] = correlation_id;
    j["payload"] = payload;
    return j;
  }

  static TraceRecord from_json(const Json& j) {
    return TraceRecord{j.at("t_ns").get<SimTime>(), j.at("seq").get<std::uint64_t>(), j.at("topic").get<std::string>(),
                       j.at("sender").get<std::string>(), j.at("correlation_id").get<std::string>(), j.at("payload")};
  }

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

inline void write_ndjson(std::ostream& os, const std::vector<TraceRecord>& trace) {
  for (const auto& r : trace) os << r.to_json().dump() << '\n';
}

struct Event {
  SimTime t = 0;
  std::uint64_t seq = 0;
  std::string topic;
  std::string sender;
  std::string correlation_id;
  Json payload;
  std::function<void(const Event&)> action;
};

using EventId = std::uint64_t;

class Engine {
 public:
  explicit Engine(std::uint64_t root_seed = 0) : root_seed_(root_seed) {}
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  SimTime now() const { return now_; }
  std::uint64_t root_seed() const { return root_seed_; }
  bool finalized() const { return finalized_; }

  /// Enqueues an event at absolute time `t`. The event is recorded in the
  /// trace when it fires (or when it is cancelled).
  EventId schedule_at(SimTime t, Event ev) {
    if (finalized_) throw EngineFinalized("engine is finalized");
    if (t < now_) throw ScheduleInPast("event '" + ev.topic + "' at " + std::to_string(t) + " ns is before now (" +
                                       std::to_string(now_) + " ns)");
    ev.t = t;
    ev.seq = next_seq_++;
    EventId id = ev.seq;
    queue_.push(Key{t, ev.seq});
    pending_.emplace(id, std::move(ev));
    return id;
  }

  EventId schedule_in(SimTime delay, Event ev) { return schedule_at(now_ + delay, std::move(ev)); }

  /// Timer with topic "timer/<name>".
  EventId timer_in(SimTime delay, const std::string& name, const std::string& owner, const std::string& correlation_id,
                   std::function<void()> fn, Json payload = Json::object()) {
    Event ev;
    ev.topic = "timer/" + name;
    ev.sender = owner;
    ev.correlation_id = correlation_id;
    ev.payload = std::move(payload);
    ev.action = [fn = std::move(fn)](const Event&) { fn(); };
    return schedule_in(delay, std::move(ev));
  }

  /// Removes a pending event; it is traced under "cancelled/<topic>".
  bool cancel(EventId id, const std::string& reason) {
    auto it = pending_.find(id);
    if (it == pending_.end()) return false;
    Event ev = std::move(it->second);
    pending_.erase(it);
    Json p;
    p["reason"] = reason;
    p["scheduled_t_ns"] = ev.t;
    p["original"] = std::move(ev.payload);
    record(TraceRecord{now_, ev.seq, "cancelled/" + ev.topic, ev.sender, ev.correlation_id, std::move(p)});
    return true;
  }

  /// Records an occurrence at the current time without scheduling anything
  /// (state transitions, audit lines). Consumes a seq like an event would.
  std::uint64_t note(const std::string& topic, const std::string& sender, const std::string& correlation_id,
                     Json payload) {
    std::uint64_t seq = next_seq_++;
    record(TraceRecord{now_, seq, topic, sender, correlation_id, std::move(payload)});
    return seq;
  }

  bool is_pending(EventId id) const { return pending_.count(id) > 0; }
  std::size_t pending_count() const { return pending_.size(); }

  /// Processes every event with fire time <= t, then advances the clock to t.
  void run_until(SimTime t) {
    while (step_if([&](SimTime next) { return next <= t; })) {
    }
    if (t > now_) now_ = t;
  }

  /// Processes events until none remain (or `max_events` have fired).
  std::size_t run(std::size_t max_events = SIZE_MAX) {
    std::size_t n = 0;
    while (n < max_events && step_if([](SimTime) { return true; })) ++n;
    return n;
  }

  /// Cancels everything pending; later scheduling throws EngineFinalized.
  void finalize(const std::string& reason = "finalized") {
    std::vector<EventId> ids;
    for (const auto& [id, _] : pending_) ids.push_back(id);
    for (auto id : ids) cancel(id, reason);
    finalized_ = true;
  }

  Rng derive_rng(std::string_view key) const { return qnet::derive_rng(root_seed_, key); }

  const std::vector<TraceRecord>& trace() const { return trace_; }

  /// Called for every record appended to the trace, in order.
  void on_record(std::function<void(const TraceRecord&)> fn) { listeners_.push_back(std::move(fn)); }

  void record(TraceRecord r) {
    trace_.push_back(std::move(r));
    for (auto& l : listeners_) l(trace_.back());
  }

 private:
  struct Key {
    SimTime t;
    std::uint64_t seq;
    bool operator>(const Key& o) const { return t != o.t ? t > o.t : seq > o.seq; }
  };

  template <class Pred>
  bool step_if(Pred&& pred) {
    while (!queue_.empty() && !pending_.count(queue_.top().seq)) queue_.pop();  // cancelled
    if (queue_.empty() || !pred(queue_.top().t)) return false;
    Key k = queue_.top();
    queue_.pop();
    auto node = pending_.extract(k.seq);
    Event& ev = node.mapped();
    now_ = ev.t;
    record(TraceRecord{ev.t, ev.seq, ev.topic, ev.sender, ev.correlation_id, ev.payload});
    if (ev.action) ev.action(ev);
    return true;
  }

  std::uint64_t root_seed_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  bool finalized_ = false;
  std::priority_queue<Key, std::vector<Key>, std::greater<Key>> queue_;
  std::map<EventId, Event> pending_;  // ordered so finalize cancels in seq order
  std::vector<TraceRecord> trace_;
  std::vector<std::function<void(const TraceRecord&)>> listeners_;
};

}  // namespace qnet::sim
