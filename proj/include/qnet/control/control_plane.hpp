#pragma once

// The running control plane: Q-NET server state machines, the SDN agent's
// bus endpoint, and simulated EPS / Q-Node / BSM entities, all exchanging
// messages over one in-process bus on one event engine.
//
// Ownership: the server owns request records, EPS allocations and the
// working graph's occupancy. Entities own their physical state (fiber
// unitaries, compensators, tallies) and only learn about a request through
// bus messages. Every handler runs on the engine's single thread.

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "qnet/calibration/delay.hpp"
#include "qnet/calibration/hom.hpp"
#include "qnet/calibration/polarization.hpp"
#include "qnet/calibration/timebin.hpp"
#include "qnet/control/paths.hpp"
#include "qnet/control/physics.hpp"
#include "qnet/control/protocol.hpp"
#include "qnet/control/records.hpp"
#include "qnet/control/sdn.hpp"
#include "qnet/sim/bus.hpp"
#include "qnet/sim/engine.hpp"
#include "qnet/topology/io.hpp"

namespace qnet::control {

struct ControlConfig {
  RoutingPolicy routing;
  double duty_cycle_s = 60.0;           // periodic re-calibration; 0 disables it
  int max_verification_rounds = 3;      // NACK-and-retry budget
  int max_establish_attempts = 3;       // Blocked retries
  double backoff_base_s = 1.0;          // doubles per Blocked attempt
  double verify_threshold = 1.0 / 6.0;  // noise/click gate
  double bus_latency_s = 1e-3;
  double batch_interval_s = 1.0;
  double discovery_window_s = 0.01;
  int max_midrun_failures = 3;
  double recal_visibility_floor = photonics::kNonClassicalVisibility;
  calibration::FidelityEstimator fidelity_estimator = calibration::default_fidelity_estimator();
};

struct Fault {
  enum class Kind { VerificationFailure, DriftBurst, Departure, SwitchDown };
  Kind kind = Kind::VerificationFailure;
  double at_s = 0;
  std::string target;
  int count = 1;          // VerificationFailure: rounds affected
  double magnitude = 0;   // DriftBurst: rotation angle (rad); VerificationFailure: quantum-only loss factor
};

inline std::string_view to_string(Fault::Kind k) {
  switch (k) {
    case Fault::Kind::VerificationFailure: return "verification_failure";
    case Fault::Kind::DriftBurst: return "drift_burst";
    case Fault::Kind::Departure: return "departure";
    case Fault::Kind::SwitchDown: return "switch_down";
  }
  return "?";
}

inline Fault::Kind fault_kind_from_string(std::string_view s) {
  for (auto k : {Fault::Kind::VerificationFailure, Fault::Kind::DriftBurst, Fault::Kind::Departure,
                 Fault::Kind::SwitchDown})
    if (to_string(k) == s) return k;
  throw SchemaError("unknown fault kind '" + std::string(s) + "'");
}

class ControlPlane {
 public:
  ControlPlane(NetworkGraph topology, PhysicalParams params, ControlConfig config, std::uint64_t seed)
      : physical_(std::move(topology)),
        graph_(physical_),
        params_(std::move(params)),
        config_(std::move(config)),
        engine_(seed),
        bus_(engine_, sim::seconds(config_.bus_latency_s)),
        sdn_(physical_) {
    bus_.subscribe(topics::kRegister, [this](const sim::Message& m) { server_on(m); });
    bus_.subscribe(topics::kTopology, [this](const sim::Message& m) {
      agent_on(m);
      server_on(m);
    });
    bus_.subscribe("qnet/request/+/ctl", [this](const sim::Message& m) {
      server_on(m);
      entities_on(m);
    });
    bus_.subscribe("qnet/request/+/meas", [this](const sim::Message& m) { server_on(m); });
    bus_.subscribe("qnet/cal/+", [this](const sim::Message& m) {
      server_on(m);
      entities_on(m);
    });
  }

  ControlPlane(const ControlPlane&) = delete;
  ControlPlane& operator=(const ControlPlane&) = delete;

  // ---- inputs (each one becomes an enqueued event) -------------------------

  /// Every resource registers from its own configuration at `at_s`.
  void register_all(double at_s = 0) {
    for (const auto& [id, n] : physical_.nodes()) register_resource(registration_from_config(n), at_s);
  }

  void register_resource(const ResourceRegistration& r, double at_s) {
    bus_.publish(topics::kRegister, r.resource_id, "discovery", to_json(r), delay_until(at_s));
  }

  /// Queues a request; the id is returned immediately. A repeated idempotency
  /// key returns the first id without queuing anything.
  std::string submit(const EntanglementRequest& req, double at_s) {
    if (!req.idempotency_key.empty()) {
      auto it = idempotency_.find(req.idempotency_key);
      if (it != idempotency_.end()) return it->second;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "req-%04d", ++request_counter_);
    std::string id = buf;
    if (!req.idempotency_key.empty()) idempotency_[req.idempotency_key] = id;
    submitted_[id] = req;
    Json p = make_payload(msg::kRequest);
    p["request"] = to_json(req);
    bus_.publish(topics::request_ctl(id), req.requester, id, std::move(p), delay_until(at_s));
    return id;
  }

  void schedule_fault(const Fault& f) {
    int n = ++fault_counter_;
    std::string corr = "fault-" + std::to_string(n);
    Json p;
    p["kind"] = std::string(to_string(f.kind));
    p["target"] = f.target;
    engine_.timer_in(delay_until(f.at_s), "fault", "fault-injector", corr, [this, f, corr] { apply_fault(f, corr); },
                     std::move(p));
  }

  // ---- running -------------------------------------------------------------

  void run() { engine_.run(); }
  void run_until(double t_s) { engine_.run_until(sim::seconds(t_s)); }
  void finalize() { engine_.finalize("end of run"); }

  // ---- read access -----------------------------------------------------------

  sim::Engine& engine() { return engine_; }
  const sim::Engine& engine() const { return engine_; }
  sim::Bus& bus() { return bus_; }
  const NetworkGraph& graph() const { return graph_; }
  const SdnAgent& sdn() const { return sdn_; }
  const PhysicalParams& params() const { return params_; }
  const ControlConfig& config() const { return config_; }
  const std::map<std::string, RequestRecord>& records() const { return records_; }
  const RequestRecord* record(const std::string& id) const {
    auto it = records_.find(id);
    return it == records_.end() ? nullptr : &it->second;
  }
  /// Requests submitted but not yet picked up by the server.
  const EntanglementRequest* submitted(const std::string& id) const {
    auto it = submitted_.find(id);
    return it == submitted_.end() ? nullptr : &it->second;
  }
  const std::vector<ResultRecord>& results() const { return results_; }
  const EpsAllocations& eps_allocations() const { return alloc_; }
  bool topology_built() const { return topology_built_; }
  const std::set<std::string>& schedulable() const { return schedulable_; }
  const std::set<std::string>& quarantined() const { return quarantined_; }

  /// Nodes the router must avoid: anything not verified, or departed.
  std::set<std::string> excluded() const {
    std::set<std::string> out;
    for (const auto& [id, _] : graph_.nodes())
      if (!schedulable_.count(id)) out.insert(id);
    return out;
  }

  bool quiescent() const {
    for (const auto& [_, r] : records_)
      if (!is_terminal(r.state)) return false;
    return true;
  }

  /// Topology document with live occupancy and schedulability.
  Json topology_snapshot() const {
    auto doc = topology::serialize_topology(graph_, true);
    Json out;
    out["t_ns"] = engine_.now();
    out["topology"] = doc;
    out["schedulable"] = Json::array();
    for (const auto& s : schedulable_) out["schedulable"].push_back(s);
    out["quarantined"] = Json::array();
    for (const auto& s : quarantined_) out["quarantined"].push_back(s);
    out["occupied_channels"] = graph_.occupied_channel_count();  // (link, channel) slots
    std::set<std::string> lightpaths;
    for (const auto& [_, l] : graph_.links())
      for (const auto& [__, lp] : l.occupancy) lightpaths.insert(lp);
    out["reserved_lightpaths"] = lightpaths.size();  // channel assignments, one per lightpath
    out["switch_rules"] = sdn_.total_rules();
    Json eps = Json::object();
    for (const auto& [id, n] : graph_.nodes())
      if (n.kind == NodeKind::EPS) eps[id] = eps_free_pairs(graph_, alloc_, id);
    out["eps_free_pairs"] = std::move(eps);
    return out;
  }

  /// Called whenever a result record is persisted.
  void on_result(std::function<void(const ResultRecord&)> fn) { result_listeners_.push_back(std::move(fn)); }

 private:
  // ---- server-side bookkeeping ----------------------------------------------

  struct Progress {
    int round = 0;  // verification round; stale replies carry an older round
    std::set<std::string> awaiting_ack;
    std::set<std::string> awaiting_verification;
    std::set<std::string> awaiting_calibration;
    std::set<std::string> awaiting_ready;
    bool paused = false;  // mid-run re-calibration in progress
    int midrun_failures = 0;
    std::optional<sim::EventId> retry_timer, recal_timer, deadline_timer, start_timer;
    double alignment_residual = 0;
    double hom_visibility = 0;
    double clock_jitter_ps = 0;
  };

  // ---- entity-side state -----------------------------------------------------

  struct NodePhysics {
    calibration::PolarizationChannelState pol;
    double interferometer_true_phase = 0;
    double interferometer_setting = 0;
    double timebin_residual = 0;
    Rng rng;
  };

  struct Session {
    std::string id;
    EntanglementRequest req;
    std::string eps;
    EstablishedPaths paths;
    photonics::ChannelModel arm_a, arm_b;
    double phase_eps = 0;
    std::map<std::string, NodePhysics> nodes;  // node_a, node_b
    bool distributing = false;
    bool paused = false;
    bool ended = false;
    long long tally = 0;
    std::optional<sim::EventId> batch_timer;
    Rng rng;
  };

  SimTime delay_until(double at_s) const {
    SimTime t = sim::seconds(at_s);
    return t > engine_.now() ? t - engine_.now() : 0;
  }

  void publish(const std::string& topic, const std::string& sender, const std::string& corr, Json payload,
               double extra_s = 0) {
    bus_.publish(topic, sender, corr, std::move(payload), sim::seconds(extra_s));
  }

  static Json recipients(std::initializer_list<std::string> ids) {
    Json a = Json::array();
    for (const auto& s : ids)
      if (!s.empty()) a.push_back(s);
    return a;
  }

  static bool addressed_to(const Json& p, const std::string& who) {
    if (!p.contains("to")) return false;
    for (const auto& x : p["to"])
      if (x.get<std::string>() == who) return true;
    return false;
  }

  static std::string type_of(const sim::Message& m) {
    return m.payload.contains("type") ? m.payload["type"].get<std::string>() : std::string();
  }

  // ===========================================================================
  // Q-NET server
  // ===========================================================================

  void server_on(const sim::Message& m) {
    if (m.sender == kServerId) return;
    if (!server_seen_.first_delivery(m)) return;
    auto type = type_of(m);
    if (type == msg::kRegister) return on_register(m);
    if (m.topic == topics::kTopology) {
      if (type == msg::kTopologyUpdate && m.sender == kSdnAgentId) return on_topology_update(m);
      if (type == msg::kClaimsVerified) return on_claims_verified(m);
      return;
    }
    auto it = records_.find(m.correlation_id);
    if (type == msg::kRequest) return on_request(m);
    if (it == records_.end()) return;
    RequestRecord& rec = it->second;
    if (type == msg::kMeasurementBatch) return on_batch(rec, m);
    if (is_terminal(rec.state)) return;
    if (type == msg::kAck) return on_ack(rec, m);
    if (type == msg::kVerificationResult) return on_verification(rec, m, true);
    if (type == msg::kNack) return on_verification(rec, m, false);
    if (type == msg::kCalibrationDone) return on_calibration_done(rec, m);
    if (type == msg::kReady) return on_ready(rec, m);
    if (type == msg::kEnd) return on_node_end(rec, m);
    if (type == msg::kStoreResults) return on_store(rec, m);
  }

  // ---- discovery ---------------------------------------------------------------

  void on_register(const sim::Message& m) {
    auto reg = registration_from_json(m.payload);
    registrations_[reg.resource_id] = reg;
    if (!topology_built_) {
      if (!discovery_timer_)
        discovery_timer_ = engine_.timer_in(sim::seconds(config_.discovery_window_s), "discovery", kServerId,
                                            "discovery", [this] { start_topology_query(); });
      return;
    }
    departed_.erase(reg.resource_id);
    awaiting_claims_.insert(reg.resource_id);
    send_verify_claims(reg);
  }

  void start_topology_query() {
    publish(topics::kTopology, kServerId, "discovery", make_payload(msg::kTopologyQuery));
  }

  void send_verify_claims(const ResourceRegistration& reg) {
    Json p = make_payload(msg::kVerifyClaims);
    p["resource_id"] = reg.resource_id;
    p["registration"] = to_json(reg);
    publish(topics::kTopology, kServerId, "discovery", std::move(p));
  }

  void on_topology_update(const sim::Message& m) {
    const auto& p = m.payload;
    std::string change = p.value("change", std::string("discovered"));
    if (change == "discovered") {
      if (topology_built_ || querying_done_) return;
      querying_done_ = true;
      for (const auto& [id, reg] : registrations_) {
        awaiting_claims_.insert(id);
        send_verify_claims(reg);
      }
      if (awaiting_claims_.empty()) build_topology();
      return;
    }
    if (change == "resource_departed" || change == "switch_down") {
      std::string who = p.at("resource").get<std::string>();
      schedulable_.erase(who);
      departed_.insert(who);
      for (auto& [id, rec] : records_) {
        if (is_terminal(rec.state) || !involves(rec, who)) continue;
        fail(rec, "entity departed: " + who);
      }
    }
  }

  void on_claims_verified(const sim::Message& m) {
    std::string id = m.payload.at("resource_id").get<std::string>();
    bool ok = m.payload.at("ok").get<bool>();
    awaiting_claims_.erase(id);
    if (ok && !departed_.count(id)) {
      schedulable_.insert(id);
      quarantined_.erase(id);
    } else {
      quarantined_.insert(id);
      schedulable_.erase(id);
    }
    if (!topology_built_) {
      if (awaiting_claims_.empty()) build_topology();
      return;
    }
    // Late registration: tell everyone asynchronously.
    Json p = make_payload(msg::kTopologyUpdate);
    p["change"] = ok ? "resource_added" : "resource_quarantined";
    p["resource"] = id;
    publish(topics::kTopology, kServerId, "discovery", std::move(p));
  }

  void build_topology() {
    topology_built_ = true;
    Json p = make_payload(msg::kTopologyBuilt);
    p["schedulable"] = Json::array();
    for (const auto& s : schedulable_) p["schedulable"].push_back(s);
    p["quarantined"] = Json::array();
    for (const auto& s : quarantined_) p["quarantined"].push_back(s);
    publish(topics::kTopology, kServerId, "discovery", std::move(p));
    auto queued = std::move(deferred_);
    deferred_.clear();
    for (const auto& id : queued) process_request(records_.at(id));
  }

  // ---- request lifecycle ---------------------------------------------------------

  void set_state(RequestRecord& rec, RequestState s, const std::string& detail = {}) {
    if (!transition_allowed(rec.state, s) && !(rec.history.empty() && s == RequestState::Received))
      throw ProtocolViolation("request " + rec.id + ": " + std::string(to_string(rec.state)) + " -> " +
                              std::string(to_string(s)));
    rec.state = s;
    rec.history.push_back({s, engine_.now(), detail});
    Json p;
    p["state"] = std::string(to_string(s));
    if (!detail.empty()) p["detail"] = detail;
    engine_.note(topics::request_state(rec.id), kServerId, rec.id, std::move(p));
  }

  void on_request(const sim::Message& m) {
    const std::string& id = m.correlation_id;
    if (records_.count(id)) return;
    RequestRecord rec;
    rec.id = id;
    rec.submitted_t_ns = m.t;
    auto& r = records_.emplace(id, std::move(rec)).first->second;
    submitted_.erase(id);
    try {
      r.request = request_from_json(m.payload.at("request"));
    } catch (const SchemaError& e) {
      set_state(r, RequestState::Received);
      return reject(r, RejectReason::InvalidRequest, e.what());
    }
    set_state(r, RequestState::Received);
    if (!topology_built_) {
      deferred_.push_back(id);
      return;
    }
    process_request(r);
  }

  void process_request(RequestRecord& rec) {
    try {
      validate_request(rec.request, graph_);
    } catch (const SchemaError& e) {
      return reject(rec, RejectReason::InvalidRequest, e.what());
    }
    auto ex = excluded();
    for (const auto* n : {&rec.request.node_a, &rec.request.node_b})
      if (ex.count(*n)) return reject(rec, RejectReason::InvalidRequest, "node '" + *n + "' is not schedulable");
    auto choice = select_eps(rec.request, graph_, ex, alloc_, config_.routing);
    if (auto* rj = std::get_if<Rejection>(&choice)) return reject(rec, rj->reason, rj->detail);
    const auto& c = std::get<EpsCandidate>(choice);
    rec.eps_id = c.eps;
    ++alloc_[c.eps];
    set_state(rec, RequestState::EpsSelected, c.eps);
    attempt_establish(rec);
  }

  void reject(RequestRecord& rec, RejectReason why, const std::string& detail) {
    rec.reject_reason = why;
    rec.failure_reason = detail;
    set_state(rec, RequestState::Rejected, std::string(to_string(why)));
    persist(rec);
  }

  void attempt_establish(RequestRecord& rec) {
    auto& pr = progress_[rec.id];
    pr.retry_timer.reset();
    ++rec.establish_attempts;
    auto out = establish_paths(graph_, sdn_, rec.request, rec.eps_id, excluded(), config_.routing);
    if (auto* b = std::get_if<rwa::Blocked>(&out)) {
      if (rec.establish_attempts >= config_.max_establish_attempts) {
        rec.failure_reason = b->reason;
        set_state(rec, RequestState::Blocked, b->reason);
        release_all(rec);
        persist(rec);
        return;
      }
      double backoff = config_.backoff_base_s * std::pow(2.0, rec.establish_attempts - 1);
      Json p;
      p["attempt"] = rec.establish_attempts;
      p["reason"] = b->reason;
      std::string id = rec.id;
      pr.retry_timer = engine_.timer_in(sim::seconds(backoff), "retry-establish", kServerId, rec.id,
                                        [this, id] { attempt_establish(records_.at(id)); }, std::move(p));
      return;
    }
    rec.paths = std::get<EstablishedPaths>(std::move(out));
    for (const auto* lp : rec.paths->all()) {
      Json p = make_payload(msg::kRuleUpdate);
      p["lightpath"] = lp->id;
      p["op"] = "install";
      engine_.note("qnet/sdn/rules", kSdnAgentId, rec.id, std::move(p));
    }
    set_state(rec, RequestState::PathsEstablished);
    Json p = make_payload(msg::kPathsEstablished);
    p["to"] = recipients({rec.request.node_a, rec.request.node_b, rec.eps_id,
                          rec.request.kind == RequestKind::Teleportation ? rec.request.bsm : ""});
    p["eps"] = rec.eps_id;
    p["request"] = to_json(rec.request);
    p["lightpaths"] = Json::array();
    for (const auto* lp : rec.paths->all()) p["lightpaths"].push_back(to_json(*lp));
    pr.awaiting_ack.clear();
    for (const auto& x : p["to"]) pr.awaiting_ack.insert(x.get<std::string>());
    publish(topics::request_ctl(rec.id), kServerId, rec.id, std::move(p));
  }

  void on_ack(RequestRecord& rec, const sim::Message& m) {
    if (m.payload.value("ack_of", std::string()) != msg::kPathsEstablished) return;
    if (rec.state != RequestState::PathsEstablished) return;
    auto& pr = progress_[rec.id];
    if (!pr.awaiting_ack.erase(m.sender) || !pr.awaiting_ack.empty()) return;
    start_verification(rec);
  }

  void start_verification(RequestRecord& rec) {
    auto& pr = progress_[rec.id];
    pr.round = ++rec.verification_rounds;
    pr.awaiting_verification.clear();
    const auto& P = *rec.paths;
    struct Probe {
      const Lightpath* lp;
      std::string node;
      bool quantum;
    };
    std::vector<Probe> probes{{&P.quantum_a, rec.request.node_a, true},
                              {&P.quantum_b, rec.request.node_b, true},
                              {&P.sync, rec.request.node_b, false}};
    if (P.bsm_legs) {
      probes.push_back({&P.bsm_legs->first, rec.request.bsm, false});
      probes.push_back({&P.bsm_legs->second, rec.request.bsm, false});
    }
    for (const auto& pb : probes) {
      Json p = make_payload(msg::kVerifyPath);
      p["to"] = recipients({pb.node});
      p["round"] = pr.round;
      p["lightpath"] = pb.lp->id;
      p["stages"] = pb.quantum ? "classical+quantum" : "classical";
      p["threshold"] = config_.verify_threshold;
      pr.awaiting_verification.insert(pb.lp->id);
      publish(topics::request_ctl(rec.id), kServerId, rec.id, std::move(p));
    }
  }

  void on_verification(RequestRecord& rec, const sim::Message& m, bool pass) {
    auto& pr = progress_[rec.id];
    if (rec.state != RequestState::PathsEstablished || m.payload.value("round", -1) != pr.round) return;
    if (!pass) {
      pr.awaiting_verification.clear();
      ++pr.round;  // replies still in flight for this round are now stale
      release_paths(rec);
      if (rec.verification_rounds >= config_.max_verification_rounds)
        return fail(rec, "path verification failed in " + std::to_string(rec.verification_rounds) + " rounds");
      return attempt_establish(rec);
    }
    pr.awaiting_verification.erase(m.payload.at("lightpath").get<std::string>());
    if (!pr.awaiting_verification.empty()) return;
    set_state(rec, RequestState::PathsVerified);
    start_calibration(rec, false);
  }

  std::string node_procedure(const RequestRecord& rec) const {
    if (rec.request.qubit_type == QubitType::Polarization) return "polarization";
    return "timebin";
  }

  void start_calibration(RequestRecord& rec, bool mid_run) {
    auto& pr = progress_[rec.id];
    if (!mid_run) set_state(rec, RequestState::Calibrating);
    pr.awaiting_calibration.clear();
    auto send = [&](const std::string& node, const std::string& procedure, Json extra = Json::object()) {
      Json p = make_payload(msg::kCalibrate);
      p["to"] = recipients({node});
      p["request_id"] = rec.id;
      p["procedure"] = procedure;
      p["basis"] = rec.request.calibration_basis;
      p["qubit_type"] = std::string(topology::to_string(rec.request.qubit_type));
      p["mid_run"] = mid_run;
      for (auto& [k, v] : extra.items()) p[k] = v;
      pr.awaiting_calibration.insert(node);
      publish(topics::cal(node), kServerId, rec.id, std::move(p));
    };
    send(rec.eps_id, "alignment_signals");
    send(rec.request.node_a, node_procedure(rec));
    Json delay;
    delay["delay_search"] = true;
    send(rec.request.node_b, node_procedure(rec), delay);
    if (rec.request.kind == RequestKind::Teleportation && !mid_run) send(rec.request.bsm, "hom_scan");
    if (!mid_run) {
      pr.awaiting_ready = pr.awaiting_calibration;
    }
  }

  void on_calibration_done(RequestRecord& rec, const sim::Message& m) {
    auto& pr = progress_[rec.id];
    const auto& p = m.payload;
    CalibrationReport rep{m.sender, p.at("procedure").get<std::string>(), m.t, p.value("mid_run", false),
                          p.at("ok").get<bool>(), p.value("details", Json::object())};
    rec.calibrations.push_back(rep);
    if (!pr.awaiting_calibration.count(m.sender)) return;
    if (rep.mid_run && rec.state != RequestState::Distributing) return;  // ended while re-calibrating
    if (!rep.ok) {
      if (rep.mid_run && ++pr.midrun_failures <= config_.max_midrun_failures) {
        // Retry that node only; distribution stays paused.
        Json again = make_payload(msg::kCalibrate);
        again["to"] = recipients({m.sender});
        again["request_id"] = rec.id;
        again["procedure"] = rep.procedure;
        again["basis"] = rec.request.calibration_basis;
        again["qubit_type"] = std::string(topology::to_string(rec.request.qubit_type));
        again["mid_run"] = true;
        if (m.sender == rec.request.node_b) again["delay_search"] = true;
        publish(topics::cal(m.sender), kServerId, rec.id, std::move(again));
        return;
      }
      return fail(rec, "calibration failed at " + m.sender + " (" + rep.procedure + ")");
    }
    if (rep.details.contains("residual_infidelity"))
      pr.alignment_residual = std::max(pr.alignment_residual, rep.details["residual_infidelity"].get<double>());
    if (rep.details.contains("clock_jitter_ps")) pr.clock_jitter_ps = rep.details["clock_jitter_ps"].get<double>();
    if (rep.procedure == "hom_scan") pr.hom_visibility = rep.details.at("visibility").get<double>();
    pr.awaiting_calibration.erase(m.sender);
    if (!pr.awaiting_calibration.empty()) return;
    if (rep.mid_run) {
      pr.paused = false;
      pr.midrun_failures = 0;
      Json s = make_payload(msg::kStart);
      s["to"] = recipients({rec.eps_id});
      s["resume"] = true;
      publish(topics::request_ctl(rec.id), kServerId, rec.id, std::move(s));
      arm_recalibration(rec);
      return;
    }
    if (rec.request.kind == RequestKind::Teleportation) {
      rec.fidelity_estimate = config_.fidelity_estimator(
          calibration::QualityInputs{pr.hom_visibility, pr.alignment_residual, pr.clock_jitter_ps});
    }
    maybe_ready(rec);
  }

  void on_ready(RequestRecord& rec, const sim::Message& m) {
    if (rec.state != RequestState::Calibrating) return;
    progress_[rec.id].awaiting_ready.erase(m.sender);
    maybe_ready(rec);
  }

  void maybe_ready(RequestRecord& rec) {
    auto& pr = progress_[rec.id];
    if (rec.state != RequestState::Calibrating || !pr.awaiting_calibration.empty() || !pr.awaiting_ready.empty())
      return;
    set_state(rec, RequestState::Ready);
    std::string id = rec.id;
    pr.start_timer = engine_.timer_in(delay_until(rec.request.start_time_s), "start", kServerId, rec.id,
                                      [this, id] { send_start(records_.at(id)); });
  }

  void send_start(RequestRecord& rec) {
    auto& pr = progress_[rec.id];
    pr.start_timer.reset();
    if (rec.state != RequestState::Ready) return;
    Json s = make_payload(msg::kStart);
    s["to"] = recipients({rec.eps_id});
    publish(topics::request_ctl(rec.id), kServerId, rec.id, std::move(s));
    set_state(rec, RequestState::Distributing);
    std::string id = rec.id;
    pr.deadline_timer = engine_.timer_in(delay_until(rec.request.end_time_s), "deadline", kServerId, rec.id,
                                         [this, id] {
                                           auto& r = records_.at(id);
                                           progress_[id].deadline_timer.reset();
                                           if (r.state == RequestState::Distributing) end_distribution(r, "end_time reached");
                                         });
    arm_recalibration(rec);
  }

  void arm_recalibration(RequestRecord& rec) {
    auto& pr = progress_[rec.id];
    if (pr.recal_timer) engine_.cancel(*pr.recal_timer, "rescheduled");
    pr.recal_timer.reset();
    if (!(config_.duty_cycle_s > 0)) return;
    std::string id = rec.id;
    pr.recal_timer = engine_.timer_in(sim::seconds(config_.duty_cycle_s), "recalibrate", kServerId, rec.id, [this, id] {
      progress_[id].recal_timer.reset();
      recalibrate(records_.at(id), "duty cycle");
    });
  }

  void recalibrate(RequestRecord& rec, const std::string& why) {
    auto& pr = progress_[rec.id];
    if (rec.state != RequestState::Distributing || pr.paused) return;
    pr.paused = true;
    ++rec.recalibrations;
    if (pr.recal_timer) engine_.cancel(*pr.recal_timer, "re-calibration started: " + why);
    pr.recal_timer.reset();
    engine_.note(topics::request_state(rec.id), kServerId, rec.id, Json{{"recalibration", why}});
    start_calibration(rec, true);
  }

  void on_batch(RequestRecord& rec, const sim::Message& m) {
    if (rec.state != RequestState::Distributing) {
      engine_.note(topics::request_meas(rec.id), kServerId, rec.id,
                   Json{{"batch_rejected", m.msg_id}, {"state", std::string(to_string(rec.state))}});
      return;
    }
    const auto& p = m.payload;
    BatchStats b{p.at("t_gen_ns").get<SimTime>(),       p.at("duration_s").get<double>(),
                 p.at("ebits").get<long long>(),        p.at("coincidences").get<long long>(),
                 p.at("coincidence_rate_hz").get<double>(), p.at("accidental_rate_hz").get<double>(),
                 number_from(p.at("car")),             p.at("visibility").get<double>()};
    rec.ebits += b.ebits;
    rec.batches.push_back(b);
    if (b.visibility < config_.recal_visibility_floor) recalibrate(rec, "visibility below threshold");
  }

  void on_node_end(RequestRecord& rec, const sim::Message&) {
    if (rec.state == RequestState::Distributing) end_distribution(rec, "target ebits reached");
  }

  void end_distribution(RequestRecord& rec, const std::string& why) {
    auto& pr = progress_[rec.id];
    for (auto* t : {&pr.recal_timer, &pr.deadline_timer})
      if (*t) {
        engine_.cancel(**t, "distribution ended");
        t->reset();
      }
    Json e = make_payload(msg::kEnd);
    e["to"] = recipients({rec.eps_id, rec.request.node_a, rec.request.node_b});
    e["reason"] = why;
    publish(topics::request_ctl(rec.id), kServerId, rec.id, std::move(e));
    set_state(rec, RequestState::Ended, why);
  }

  void on_store(RequestRecord& rec, const sim::Message&) {
    if (rec.state != RequestState::Ended) return;
    set_state(rec, RequestState::Stored);
    release_all(rec);
    persist(rec);
  }

  void fail(RequestRecord& rec, const std::string& why) {
    rec.failure_reason = why;
    set_state(rec, RequestState::Failed, why);
    Json e = make_payload(msg::kEnd);
    e["to"] = recipients({rec.eps_id, rec.request.node_a, rec.request.node_b});
    e["reason"] = "failed: " + why;
    publish(topics::request_ctl(rec.id), kServerId, rec.id, std::move(e));
    release_all(rec);
    persist(rec);
  }

  void release_paths(RequestRecord& rec) {
    if (!rec.paths) return;
    for (const auto* lp : rec.paths->all()) {
      Json p = make_payload(msg::kRuleUpdate);
      p["lightpath"] = lp->id;
      p["op"] = "remove";
      engine_.note("qnet/sdn/rules", kSdnAgentId, rec.id, std::move(p));
    }
    teardown(graph_, sdn_, rec.paths->all());
    rec.paths.reset();
  }

  void release_all(RequestRecord& rec) {
    release_paths(rec);
    auto& pr = progress_[rec.id];
    for (auto* t : {&pr.retry_timer, &pr.recal_timer, &pr.deadline_timer, &pr.start_timer})
      if (*t) {
        engine_.cancel(**t, "request closed");
        t->reset();
      }
    if (!rec.eps_id.empty()) {
      auto it = alloc_.find(rec.eps_id);
      if (it != alloc_.end() && --it->second <= 0) alloc_.erase(it);
    }
  }

  void persist(const RequestRecord& rec) {
    results_.push_back(make_result(rec, engine_.now()));
    for (auto& l : result_listeners_) l(results_.back());
  }

  bool involves(const RequestRecord& rec, const std::string& who) const {
    if (rec.request.node_a == who || rec.request.node_b == who || rec.eps_id == who || rec.request.bsm == who)
      return true;
    if (!rec.paths) return false;
    for (const auto* lp : rec.paths->all())
      for (const auto& n : lp->nodes)
        if (n == who) return true;
    return false;
  }

  // ===========================================================================
  // SDN agent endpoint
  // ===========================================================================

  void agent_on(const sim::Message& m) {
    if (m.sender != kServerId) return;
    if (!agent_seen_.first_delivery(m)) return;
    auto type = type_of(m);
    if (type == msg::kTopologyQuery) {
      Json p = make_payload(msg::kTopologyUpdate);
      p["change"] = "discovered";
      p["nodes"] = Json::array();
      for (const auto& [id, _] : physical_.nodes()) p["nodes"].push_back(id);
      p["links"] = Json::array();
      for (const auto& [a, b] : sdn_.discovered_links()) p["links"].push_back({format_tag(a), format_tag(b)});
      publish(topics::kTopology, kSdnAgentId, m.correlation_id, std::move(p));
    } else if (type == msg::kVerifyClaims) {
      auto reg = registration_from_json(m.payload.at("registration"));
      auto problems = sdn_.verify_claims(reg);
      Json p = make_payload(msg::kClaimsVerified);
      p["resource_id"] = reg.resource_id;
      p["ok"] = problems.empty();
      p["mismatches"] = problems;
      publish(topics::kTopology, kSdnAgentId, m.correlation_id, std::move(p));
    }
  }

  // ===========================================================================
  // Faults
  // ===========================================================================

  void apply_fault(const Fault& f, const std::string& corr) {
    switch (f.kind) {
      case Fault::Kind::VerificationFailure:
        verify_faults_[f.target] += f.count;
        verify_fault_factor_[f.target] = f.magnitude > 0 ? f.magnitude : 0.1;
        break;
      case Fault::Kind::DriftBurst:
        for (auto& [_, s] : sessions_) {
          auto it = s.nodes.find(f.target);
          if (it == s.nodes.end()) continue;
          it->second.pol.fiber_unitary = calibration::renormalize(
              calibration::su2_rotation(Eigen::Vector3d(0.3, 1.0, 0.2), f.magnitude) * it->second.pol.fiber_unitary);
        }
        break;
      case Fault::Kind::Departure:
      case Fault::Kind::SwitchDown: {
        departed_entities_.insert(f.target);
        if (f.kind == Fault::Kind::SwitchDown) sdn_.set_switch_available(f.target, false);
        Json p = make_payload(msg::kTopologyUpdate);
        p["change"] = f.kind == Fault::Kind::Departure ? "resource_departed" : "switch_down";
        p["resource"] = f.target;
        publish(topics::kTopology, kSdnAgentId, corr, std::move(p));
        break;
      }
    }
  }

  // ===========================================================================
  // Simulated entities (EPS, Q-Nodes, BSM)
  // ===========================================================================

  void entities_on(const sim::Message& m) {
    if (m.sender != kServerId) return;
    if (!entity_seen_.first_delivery(m)) return;
    auto type = type_of(m);
    const auto& p = m.payload;
    for (const auto& who : p.value("to", Json::array())) {
      std::string id = who.get<std::string>();
      if (departed_entities_.count(id)) continue;  // gone: no replies
      if (type == msg::kPathsEstablished) entity_paths(id, m);
      else if (type == msg::kVerifyPath) entity_verify(id, m);
      else if (type == msg::kCalibrate) entity_calibrate(id, m);
      else if (type == msg::kStart) entity_start(id, m);
      else if (type == msg::kEnd) entity_end(id, m);
    }
  }

  Json ack(const char* of) {
    Json p = make_payload(msg::kAck);
    p["ack_of"] = of;
    return p;
  }

  double detector_efficiency(const std::string& node) const {
    auto it = registrations_.find(node);
    return it == registrations_.end() ? 0.3 : it->second.features.detector_efficiency;
  }
  double dark_rate(const std::string& node) const {
    auto it = registrations_.find(node);
    return it == registrations_.end() ? 100.0 : it->second.features.dark_rate_hz;
  }

  void entity_paths(const std::string& who, const sim::Message& m) {
    const std::string& id = m.correlation_id;
    auto rec_it = records_.find(id);
    if (rec_it == records_.end() || !rec_it->second.paths) return;
    const auto& rec = rec_it->second;
    // The session mirrors what the entities learn from this message; the
    // physical models come from the real fibers the lightpaths occupy.
    if (!sessions_.count(id) || sessions_.at(id).paths.quantum_a.id != rec.paths->quantum_a.id) {
      Session s;
      s.id = id;
      s.req = rec.request;
      s.eps = rec.eps_id;
      s.paths = *rec.paths;
      s.arm_a = arm_channel(physical_, s.paths.quantum_a, s.paths.sync, params_, detector_efficiency(s.req.node_a),
                            dark_rate(s.req.node_a));
      s.arm_b = arm_channel(physical_, s.paths.quantum_b, s.paths.sync, params_, detector_efficiency(s.req.node_b),
                            dark_rate(s.req.node_b));
      s.rng = engine_.derive_rng("session/" + id);
      auto phase_rng = engine_.derive_rng("eps-phase/" + s.eps);
      s.phase_eps = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi)(phase_rng);
      auto old = sessions_.find(id);
      for (const auto& node : {s.req.node_a, s.req.node_b}) {
        if (old != sessions_.end() && old->second.nodes.count(node)) {
          s.nodes[node] = old->second.nodes.at(node);  // same fiber, same receiver
          continue;
        }
        NodePhysics np;
        np.rng = engine_.derive_rng("node/" + id + "/" + node);
        np.pol.fiber_unitary = calibration::random_su2(np.rng);
        np.pol.drift_rate = params_.drift_rate_rad_per_s;
        np.interferometer_true_phase = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi)(np.rng);
        s.nodes[node] = std::move(np);
      }
      sessions_[id] = std::move(s);
    }
    publish(topics::request_ctl(id), who, id, ack(msg::kPathsEstablished));
  }

  const Lightpath* find_lightpath(const Session& s, const std::string& lp_id) const {
    for (const auto* lp : s.paths.all())
      if (lp->id == lp_id) return lp;
    return nullptr;
  }

  void entity_verify(const std::string& who, const sim::Message& m) {
    auto sit = sessions_.find(m.correlation_id);
    if (sit == sessions_.end()) return;
    Session& s = sit->second;
    const auto* lp = find_lightpath(s, m.payload.at("lightpath").get<std::string>());
    if (!lp) return;
    bool quantum = m.payload.at("stages").get<std::string>() == "classical+quantum";
    double t_path = lp->total_loss.transmittance();
    Json p;
    double duration = params_.verify_integration_s;
    if (quantum) {
      double t_quantum = t_path;
      auto f = verify_faults_.find(who);
      if (f != verify_faults_.end() && f->second > 0) {
        --f->second;
        t_quantum *= verify_fault_factor_[who];
      }
      const auto& arm = who == s.req.node_a ? s.arm_a : s.arm_b;
      auto meas = simulate_verification(s.rng, params_, t_path, t_quantum, arm.detector_efficiency,
                                        photonics::noise_rate(arm));
      auto res = verify_path(meas, params_.eps.pair_rate_hz, arm.detector_efficiency, m.payload.value("threshold", 1.0 / 6));
      p = make_payload(res.pass ? msg::kVerificationResult : msg::kNack);
      p["result"] = to_json(res);
      duration = 2 * params_.verify_integration_s;
    } else {
      std::normal_distribution<double> meter(1.0, params_.probe_rel_noise);
      double received = params_.probe_power_mw * t_path * meter(s.rng);
      bool ok = received > 0;
      p = make_payload(ok ? msg::kVerificationResult : msg::kNack);
      Json r;
      r["loss_estimate_db"] = ok ? 10 * std::log10(params_.probe_power_mw / received) : 0.0;
      r["pass"] = ok;
      p["result"] = r;
    }
    p["round"] = m.payload.at("round");
    p["lightpath"] = lp->id;
    publish(topics::request_ctl(s.id), who, s.id, std::move(p), duration);
  }

  static double pol_residual(const calibration::PolarizationChannelState& st, double phase_eps) {
    calibration::AlignmentReport r;
    calibration::evaluate_residuals(st, phase_eps, r);
    return r.residual_infidelity;
  }

  /// Contrast factor of one receiver right now.
  double contrast(const Session& s, const NodePhysics& n) const {
    if (s.req.qubit_type == QubitType::Polarization) return alignment_contrast(pol_residual(n.pol, s.phase_eps));
    return alignment_contrast(n.timebin_residual);
  }

  void entity_calibrate(const std::string& who, const sim::Message& m) {
    auto sit = sessions_.find(m.correlation_id);
    if (sit == sessions_.end()) return;
    Session& s = sit->second;
    const auto& p = m.payload;
    std::string procedure = p.at("procedure").get<std::string>();
    bool mid_run = p.value("mid_run", false);
    Json details = Json::object();
    bool ok = true;
    double duration = 0;
    if (mid_run && s.nodes.count(who)) {
      s.paused = true;
      if (s.batch_timer) {
        engine_.cancel(*s.batch_timer, "paused for re-calibration");
        s.batch_timer.reset();
      }
    }
    try {
      if (procedure == "alignment_signals") {
        details["basis"] = p.value("basis", std::string());
        details["phase_eps_rad"] = s.phase_eps;
      } else if (procedure == "polarization") {
        auto& n = s.nodes.at(who);
        auto rep = calibration::align_polarization(n.pol, s.phase_eps);
        details["residual_v"] = rep.residual_v;
        details["residual_diag"] = rep.residual_diag;
        details["residual_infidelity"] = rep.residual_infidelity;
        details["iterations"] = rep.iterations;
        duration += params_.alignment_step_s * rep.iterations;
      } else if (procedure == "timebin") {
        auto& n = s.nodes.at(who);
        details["frame"] = timebin_frame(n);
        n.interferometer_setting = calibration::align_interferometer_phase(
            [&](double phi) { return 0.5 * (1 + std::cos(phi - n.interferometer_true_phase)); });
        double err = std::remainder(n.interferometer_setting - n.interferometer_true_phase, 2 * std::numbers::pi);
        n.timebin_residual = 0.5 * (1 - std::cos(err));
        details["interferometer_phase_rad"] = n.interferometer_setting;
        details["residual_infidelity"] = n.timebin_residual;
        duration += 2 * params_.interferometer_scan_s;
      } else if (procedure == "hom_scan") {
        std::vector<double> grid;
        double tau = params_.hom.coherence_time_ps;
        for (int i = -20; i <= 20; ++i) grid.push_back(i * tau * 0.25);
        auto hom_rng = engine_.derive_rng("hom/" + s.id);
        auto scan = calibration::scan_hom(params_.hom, grid, params_.hom_counts_per_point, hom_rng);
        details["visibility"] = scan.fitted_visibility;
        details["best_delay_ps"] = scan.best_delay_ps;
        duration += grid.size() * params_.hom_counts_per_point / params_.hom.baseline_rate_hz;
      }
      if (s.nodes.count(who)) {
        double jitter = calibration::clock_jitter_budget(params_.clock);
        details["clock_jitter_ps"] = jitter;
        if (!calibration::within_jitter_budget(jitter, params_.clock_budget_ps))
          throw CalibrationFailure("clock jitter " + std::to_string(jitter) + " ps over budget");
      }
      if (p.value("delay_search", false)) {
        auto r = delay_search(s);
        details["delay_clk"] = r.delay_clk;
        details["delay_coincidences"] = r.coincidences_at_delay;
        details["delay_settings_tried"] = r.settings_tried;
        duration += r.integration_s;
      }
    } catch (const Error& e) {
      ok = false;
      details["error"] = e.code();
      details["message"] = e.what();
    }
    Json done = make_payload(msg::kCalibrationDone);
    done["procedure"] = procedure;
    done["ok"] = ok;
    done["mid_run"] = mid_run;
    done["details"] = std::move(details);
    publish(topics::cal(who), who, s.id, std::move(done), duration);
    if (ok && !mid_run) publish(topics::request_ctl(s.id), who, s.id, make_payload(msg::kReady), duration);
  }

  Json timebin_frame(NodePhysics& n) {
    // Early burst then late burst, Gaussian-broadened by detector jitter, on a
    // flat dark-count background.
    std::uniform_real_distribution<double> u(200.0, 400.0);
    double early = u(n.rng);
    double late = early + params_.timebin_separation_ps;
    std::size_t bins = static_cast<std::size_t>(late + 400);
    std::vector<double> h(bins);
    for (std::size_t i = 0; i < bins; ++i) {
      double t = static_cast<double>(i);
      double j = params_.timebin_jitter_ps;
      double mean = 2.0 + 200.0 * (std::exp(-0.5 * std::pow((t - early) / j, 2)) + std::exp(-0.5 * std::pow((t - late) / j, 2)));
      h[i] = static_cast<double>(std::poisson_distribution<long long>(mean)(n.rng));
    }
    auto f = calibration::align_timebin(h);
    Json j;
    j["early_offset_ps"] = f.early_offset_ps;
    j["late_offset_ps"] = f.late_offset_ps;
    j["bin_width_ps"] = f.bin_width_ps;
    j["early_error_ps"] = f.early_offset_ps - early;
    j["late_error_ps"] = f.late_offset_ps - late;
    return j;
  }

  calibration::DelaySearchResult delay_search(Session& s) {
    auto stats = photonics::singles_and_coincidences(params_.eps, s.arm_a, s.arm_b);
    // Expected offset from the fiber length difference (5 us/km) in clock ticks.
    double len_a = 0, len_b = 0;
    for (const auto& l : s.paths.quantum_a.path.links) len_a += physical_.link(l).length_km;
    for (const auto& l : s.paths.quantum_b.path.links) len_b += physical_.link(l).length_km;
    double tick_s = 1.0 / params_.clock.clock_rate_hz;
    int expected = static_cast<int>(std::lround((len_b - len_a) * 5e-6 / tick_s));
    int hw = params_.delay_search_halfwidth_clk;
    int truth = expected + std::uniform_int_distribution<int>(-hw / 2, hw / 2)(s.rng);
    calibration::SimulatedCorrelation<Rng> src{truth, stats.coincidences_hz, stats.accidentals_hz, &s.rng};
    auto r = calibration::find_correlation_delay(expected - hw, expected + hw, std::cref(src), stats.accidentals_hz);
    if (r.delay_clk != truth) throw CalibrationFailure("delay search locked to a wrong setting");
    return r;
  }

  void entity_start(const std::string& who, const sim::Message& m) {
    auto sit = sessions_.find(m.correlation_id);
    if (sit == sessions_.end() || who != sit->second.eps) return;
    Session& s = sit->second;
    if (s.ended) return;
    s.distributing = true;
    s.paused = false;
    if (!s.batch_timer) schedule_batch(s);
  }

  void schedule_batch(Session& s) {
    std::string id = s.id;
    s.batch_timer = engine_.timer_in(sim::seconds(config_.batch_interval_s), "batch", s.req.node_a, s.id,
                                     [this, id] { emit_batch(sessions_.at(id)); });
  }

  void emit_batch(Session& s) {
    s.batch_timer.reset();
    if (!s.distributing || s.paused || s.ended) return;
    double dt = config_.batch_interval_s;
    for (auto& [_, n] : s.nodes) n.pol.drift(dt, n.rng);
    auto eps = params_.eps;
    eps.intrinsic_visibility *= contrast(s, s.nodes.at(s.req.node_a)) * contrast(s, s.nodes.at(s.req.node_b));
    auto st = photonics::singles_and_coincidences(eps, s.arm_a, s.arm_b);
    auto poisson = [&](double mean) { return std::poisson_distribution<long long>(std::max(mean, 1e-12))(s.rng); };
    long long ebits = poisson(st.coincidences_hz * dt);
    long long acc = poisson(st.accidentals_hz * dt);
    Json p = make_payload(msg::kMeasurementBatch);
    p["t_gen_ns"] = engine_.now();
    p["duration_s"] = dt;
    p["ebits"] = ebits;
    p["coincidences"] = ebits + acc;
    p["coincidence_rate_hz"] = st.coincidences_hz;
    p["accidental_rate_hz"] = st.accidentals_hz;
    p["car"] = number_or_null(st.car);
    p["visibility"] = st.visibility;
    publish(topics::request_meas(s.id), s.req.node_a, s.id, std::move(p));
    s.tally += ebits;
    if (s.tally >= s.req.target_ebits) {
      s.distributing = false;
      Json e = make_payload(msg::kEnd);
      e["ebits"] = s.tally;
      publish(topics::request_ctl(s.id), s.req.node_a, s.id, e);
      publish(topics::request_ctl(s.id), s.req.node_b, s.id, e);
      return;
    }
    schedule_batch(s);
  }

  void entity_end(const std::string& who, const sim::Message& m) {
    auto sit = sessions_.find(m.correlation_id);
    if (sit == sessions_.end()) return;
    Session& s = sit->second;
    s.distributing = false;
    if (s.batch_timer) {
      engine_.cancel(*s.batch_timer, "distribution ended");
      s.batch_timer.reset();
    }
    if (who == s.eps) {
      publish(topics::request_ctl(s.id), who, s.id, ack(msg::kEnd));
    } else if (who == s.req.node_a && !s.ended) {
      s.ended = true;
      Json p = make_payload(msg::kStoreResults);
      p["ebits"] = s.tally;
      publish(topics::request_ctl(s.id), who, s.id, std::move(p));
    }
  }

  // ---- members -----------------------------------------------------------------

  NetworkGraph physical_;  // tag topology and true fibers
  NetworkGraph graph_;     // server's working copy with occupancy
  PhysicalParams params_;
  ControlConfig config_;
  sim::Engine engine_;
  sim::Bus bus_;
  SdnAgent sdn_;

  sim::Deduplicator server_seen_, agent_seen_, entity_seen_;

  std::map<std::string, ResourceRegistration> registrations_;
  std::set<std::string> awaiting_claims_, schedulable_, quarantined_, departed_;
  std::optional<sim::EventId> discovery_timer_;
  bool querying_done_ = false;
  bool topology_built_ = false;
  std::vector<std::string> deferred_;

  int request_counter_ = 0;
  int fault_counter_ = 0;
  std::map<std::string, std::string> idempotency_;
  std::map<std::string, EntanglementRequest> submitted_;
  std::map<std::string, RequestRecord> records_;
  std::map<std::string, Progress> progress_;
  EpsAllocations alloc_;
  std::vector<ResultRecord> results_;
  std::vector<std::function<void(const ResultRecord&)>> result_listeners_;

  std::map<std::string, Session> sessions_;
  std::set<std::string> departed_entities_;
  std::map<std::string, int> verify_faults_;
  std::map<std::string, double> verify_fault_factor_;
};

}  // namespace qnet::control
