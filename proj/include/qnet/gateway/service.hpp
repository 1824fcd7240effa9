#pragma once

// Live gateway service: one control plane behind a mutex. API calls validate
// their input, then enqueue onto the engine; only the clock (or an explicit
// advance) fires events. Event feeds read the append-only trace.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "qnet/control/control_plane.hpp"
#include "qnet/gateway/runner.hpp"
#include "qnet/gateway/scenario.hpp"

namespace qnet::gateway {

inline sim::Json record_to_json(const control::RequestRecord& r) {
  sim::Json j;
  j["v"] = control::kSchemaVersion;
  j["id"] = r.id;
  j["state"] = std::string(control::to_string(r.state));
  j["request"] = control::to_json(r.request);
  j["eps_id"] = r.eps_id;
  if (r.reject_reason) j["reject_reason"] = std::string(control::to_string(*r.reject_reason));
  if (!r.failure_reason.empty()) j["failure_reason"] = r.failure_reason;
  j["history"] = sim::Json::array();
  for (const auto& h : r.history) j["history"].push_back(control::to_json(h));
  j["lightpaths"] = sim::Json::array();
  if (r.paths)
    for (const auto* lp : r.paths->all()) j["lightpaths"].push_back(control::to_json(*lp));
  j["ebits"] = r.ebits;
  j["batches"] = r.batches.size();
  if (!r.batches.empty()) j["last_batch"] = control::to_json(r.batches.back());
  j["calibrations"] = sim::Json::array();
  for (const auto& c : r.calibrations) j["calibrations"].push_back(control::to_json(c));
  j["verification_rounds"] = r.verification_rounds;
  j["recalibrations"] = r.recalibrations;
  j["fidelity_estimate"] = r.fidelity_estimate ? sim::Json(*r.fidelity_estimate) : sim::Json(nullptr);
  j["submitted_t_ns"] = r.submitted_t_ns;
  return j;
}

struct AuditEntry {
  sim::SimTime t_ns = 0;
  std::string action;
  std::string subject;
  std::string outcome;
};

class Service {
 public:
  /// An empty token disables nothing: every call must then present an empty
  /// bearer, which `authorize` rejects. Callers must configure a token.
  Service(const Scenario& scenario, std::string token) : scenario_(scenario), token_(std::move(token)) {
    cp_ = make_control_plane(scenario_);
    wire_scenario(scenario_, *cp_);
    cp_->engine().on_record([this](const sim::TraceRecord&) { changed_.notify_all(); });
  }

  ~Service() { stop_clock(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Throws AuthError unless `authorization` is "Bearer <token>".
  void authorize(const std::string& authorization) const {
    static const std::string prefix = "Bearer ";
    if (token_.empty()) throw AuthError("server has no token configured");
    if (authorization.size() <= prefix.size() || authorization.compare(0, prefix.size(), prefix) != 0 ||
        authorization.substr(prefix.size()) != token_)
      throw AuthError("missing or invalid bearer token");
  }

  /// Schema-checks the payload and enqueues it at the current virtual time.
  sim::Json submit(const sim::Json& body) {
    std::lock_guard lock(mu_);
    control::EntanglementRequest req;
    try {
      req = control::request_from_json(body);
      control::validate_request(req, cp_->graph());
    } catch (const SchemaError& e) {
      audit_.push_back({cp_->engine().now(), "submit", "", std::string("rejected: ") + e.what()});
      throw;
    }
    double now_s = sim::to_seconds(cp_->engine().now());
    std::string id = cp_->submit(req, now_s);
    audit_.push_back({cp_->engine().now(), "submit", id, "enqueued"});
    sim::Json j;
    j["v"] = control::kSchemaVersion;
    j["id"] = id;
    j["state"] = std::string(control::to_string(control::RequestState::Received));
    return j;
  }

  sim::Json get_request(const std::string& id) const {
    std::lock_guard lock(mu_);
    if (const auto* rec = cp_->record(id)) return record_to_json(*rec);
    if (const auto* req = cp_->submitted(id)) {
      // Accepted but not yet processed by the server.
      sim::Json j;
      j["v"] = control::kSchemaVersion;
      j["id"] = id;
      j["state"] = std::string(control::to_string(control::RequestState::Received));
      j["request"] = control::to_json(*req);
      j["history"] = sim::Json::array();
      return j;
    }
    throw NotFound("unknown request '" + id + "'");
  }

  sim::Json get_result(const std::string& id) const {
    std::lock_guard lock(mu_);
    for (const auto& r : cp_->results())
      if (r.request_id == id) return control::to_json(r);
    if (cp_->record(id) || cp_->submitted(id)) throw NotFound("request '" + id + "' has no stored result yet");
    throw NotFound("unknown request '" + id + "'");
  }

  sim::Json topology() const {
    std::lock_guard lock(mu_);
    auto j = cp_->topology_snapshot();
    j["v"] = control::kSchemaVersion;
    return j;
  }

  sim::Json status() const {
    std::lock_guard lock(mu_);
    sim::Json j;
    j["v"] = control::kSchemaVersion;
    j["scenario"] = scenario_.name;
    j["t_ns"] = cp_->engine().now();
    j["topology_built"] = cp_->topology_built();
    j["pending_events"] = cp_->engine().pending_count();
    j["trace_records"] = cp_->engine().trace().size();
    std::map<std::string, int> states;
    for (const auto& [_, r] : cp_->records()) states[std::string(control::to_string(r.state))]++;
    j["requests"] = sim::Json::object();
    for (const auto& [k, v] : states) j["requests"][k] = v;
    j["schedulable"] = cp_->schedulable();
    j["quarantined"] = cp_->quarantined();
    return j;
  }

  /// Trace records for request `id` from trace index `cursor` on; advances
  /// the cursor. `done` turns true once the request is terminal, its result
  /// is stored, and everything up to that point has been returned.
  std::vector<sim::TraceRecord> events_since(const std::string& id, std::size_t& cursor, bool& done) const {
    std::lock_guard lock(mu_);
    return collect(id, cursor, done);
  }

  /// Like events_since, but waits up to `timeout` for something new.
  std::vector<sim::TraceRecord> wait_events(const std::string& id, std::size_t& cursor, bool& done,
                                            std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    changed_.wait_for(lock, timeout, [&] { return cp_->engine().trace().size() > cursor || stopping_; });
    return collect(id, cursor, done);
  }

  bool known(const std::string& id) const {
    std::lock_guard lock(mu_);
    return cp_->record(id) || cp_->submitted(id);
  }

  /// Fires every event up to virtual time `t_s`.
  void advance_to(double t_s) {
    std::lock_guard lock(mu_);
    if (sim::seconds(t_s) > cp_->engine().now()) cp_->run_until(t_s);
  }

  void drain() {
    std::lock_guard lock(mu_);
    cp_->run();
  }

  /// Virtual time follows the wall clock scaled by `speed`.
  void start_clock(double speed, std::chrono::milliseconds tick = std::chrono::milliseconds(10)) {
    stop_clock();
    stopping_ = false;
    clock_ = std::thread([this, speed, tick] {
      auto t0 = std::chrono::steady_clock::now();
      double v0 = 0;
      {
        std::lock_guard lock(mu_);
        v0 = sim::to_seconds(cp_->engine().now());
      }
      while (!stopping_) {
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        advance_to(v0 + wall * speed);
        std::this_thread::sleep_for(tick);
      }
    });
  }

  void stop_clock() {
    stopping_ = true;
    changed_.notify_all();
    if (clock_.joinable()) clock_.join();
  }

  std::vector<AuditEntry> audit() const {
    std::lock_guard lock(mu_);
    return audit_;
  }

  /// Runs `fn` with the control plane under the service lock.
  void with_control_plane(const std::function<void(const control::ControlPlane&)>& fn) const {
    std::lock_guard lock(mu_);
    fn(*cp_);
  }

 private:
  std::vector<sim::TraceRecord> collect(const std::string& id, std::size_t& cursor, bool& done) const {
    const auto& trace = cp_->engine().trace();
    std::vector<sim::TraceRecord> out;
    for (; cursor < trace.size(); ++cursor)
      if (trace[cursor].correlation_id == id) out.push_back(trace[cursor]);
    done = false;
    if (const auto* rec = cp_->record(id); rec && control::is_terminal(rec->state))
      for (const auto& r : cp_->results())
        if (r.request_id == id) done = true;
    return out;
  }

  Scenario scenario_;
  std::string token_;
  std::unique_ptr<control::ControlPlane> cp_;
  mutable std::mutex mu_;
  mutable std::condition_variable changed_;
  std::vector<AuditEntry> audit_;
  std::thread clock_;
  std::atomic<bool> stopping_{false};
};

}  // namespace qnet::gateway
