#pragma once

// Message and state vocabulary of the control plane. Payloads are JSON
// objects carrying "v" (schema version) and "type"; docs/protocol.md lists
// every type with its fields.

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnet/core/error.hpp"
#include "qnet/sim/engine.hpp"
#include "qnet/topology/graph.hpp"
#include "qnet/topology/types.hpp"

namespace qnet::control {

using sim::Json;
using sim::SimTime;
using topology::QubitType;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kServerId = "qnet-server";
inline constexpr const char* kSdnAgentId = "sdn-agent";

namespace topics {
inline constexpr const char* kRegister = "qnet/register";
inline constexpr const char* kTopology = "qnet/topology";
inline std::string request_ctl(const std::string& id) { return "qnet/request/" + id + "/ctl"; }
inline std::string request_meas(const std::string& id) { return "qnet/request/" + id + "/meas"; }
inline std::string request_state(const std::string& id) { return "qnet/request/" + id + "/state"; }
inline std::string cal(const std::string& node) { return "qnet/cal/" + node; }
}  // namespace topics

namespace msg {
// Message types carried in payload["type"].
inline constexpr const char* kRegister = "Register";
inline constexpr const char* kTopologyQuery = "TopologyQuery";
inline constexpr const char* kTopologyUpdate = "TopologyUpdate";
inline constexpr const char* kVerifyClaims = "VerifyClaims";
inline constexpr const char* kClaimsVerified = "ClaimsVerified";
inline constexpr const char* kTopologyBuilt = "TopologyBuilt";
inline constexpr const char* kRequest = "Request";
inline constexpr const char* kEstablishPaths = "EstablishPaths";
inline constexpr const char* kPathsEstablished = "PathsEstablished";
inline constexpr const char* kVerifyPath = "VerifyPath";
inline constexpr const char* kVerificationResult = "VerificationResult";
inline constexpr const char* kCalibrate = "Calibrate";
inline constexpr const char* kCalibrationDone = "CalibrationDone";
inline constexpr const char* kReady = "Ready";
inline constexpr const char* kStart = "Start";
inline constexpr const char* kMeasurementBatch = "MeasurementBatch";
inline constexpr const char* kEnd = "End";
inline constexpr const char* kStoreResults = "StoreResults";
inline constexpr const char* kAck = "Ack";
inline constexpr const char* kNack = "Nack";
inline constexpr const char* kRuleUpdate = "RuleUpdate";
inline constexpr const char* kFault = "Fault";
}  // namespace msg

inline Json make_payload(const char* type) {
  Json p;
  p["v"] = kSchemaVersion;
  p["type"] = type;
  return p;
}

enum class RequestState {
  Received,
  EpsSelected,
  PathsEstablished,
  PathsVerified,
  Calibrating,
  Ready,
  Distributing,
  Ended,
  Stored,
  Rejected,
  Blocked,
  Failed,
};

inline std::string_view to_string(RequestState s) {
  switch (s) {
    case RequestState::Received: return "Received";
    case RequestState::EpsSelected: return "EpsSelected";
    case RequestState::PathsEstablished: return "PathsEstablished";
    case RequestState::PathsVerified: return "PathsVerified";
    case RequestState::Calibrating: return "Calibrating";
    case RequestState::Ready: return "Ready";
    case RequestState::Distributing: return "Distributing";
    case RequestState::Ended: return "Ended";
    case RequestState::Stored: return "Stored";
    case RequestState::Rejected: return "Rejected";
    case RequestState::Blocked: return "Blocked";
    case RequestState::Failed: return "Failed";
  }
  return "?";
}

inline RequestState request_state_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(RequestState::Failed); ++i)
    if (to_string(static_cast<RequestState>(i)) == s) return static_cast<RequestState>(i);
  throw SchemaError("unknown request state '" + std::string(s) + "'");
}

inline bool is_terminal(RequestState s) {
  return s == RequestState::Stored || s == RequestState::Rejected || s == RequestState::Blocked ||
         s == RequestState::Failed;
}

/// Allowed transitions. The forward chain is strict; the only backward edge
/// is the verification NACK that returns to path establishment.
inline bool transition_allowed(RequestState from, RequestState to) {
  using S = RequestState;
  if (is_terminal(from)) return false;
  if (to == S::Failed) return true;
  switch (from) {
    case S::Received: return to == S::EpsSelected || to == S::Rejected;
    case S::EpsSelected: return to == S::PathsEstablished || to == S::Blocked;
    case S::PathsEstablished: return to == S::PathsVerified || to == S::PathsEstablished || to == S::Blocked;
    case S::PathsVerified: return to == S::Calibrating;
    case S::Calibrating: return to == S::Ready;
    case S::Ready: return to == S::Distributing;
    case S::Distributing: return to == S::Ended;
    case S::Ended: return to == S::Stored;
    default: return false;
  }
}

enum class RejectReason { NoCapableEps, NoCapacity, NoFeasiblePaths, InvalidRequest };

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::NoCapableEps: return "NoCapableEps";
    case RejectReason::NoCapacity: return "NoCapacity";
    case RejectReason::NoFeasiblePaths: return "NoFeasiblePaths";
    case RejectReason::InvalidRequest: return "InvalidRequest";
  }
  return "?";
}

enum class RequestKind { Entanglement, Teleportation };

struct EntanglementRequest {
  std::string requester;
  QubitType qubit_type = QubitType::Polarization;
  std::string node_a;
  std::string node_b;
  double start_time_s = 0;
  double end_time_s = 0;
  std::string calibration_basis = "HV/DA";
  long long target_ebits = 1;
  RequestKind kind = RequestKind::Entanglement;
  std::string bsm;  // teleportation only
  std::string idempotency_key;

  friend bool operator==(const EntanglementRequest&, const EntanglementRequest&) = default;
};

inline Json to_json(const EntanglementRequest& r) {
  Json j;
  j["requester"] = r.requester;
  j["qubit_type"] = std::string(to_string(r.qubit_type));
  j["node_pair"] = Json::array({r.node_a, r.node_b});
  j["start_time_s"] = r.start_time_s;
  j["end_time_s"] = r.end_time_s;
  j["calibration_basis"] = r.calibration_basis;
  j["target_ebits"] = r.target_ebits;
  j["kind"] = r.kind == RequestKind::Teleportation ? "teleportation" : "entanglement";
  if (!r.bsm.empty()) j["bsm"] = r.bsm;
  if (!r.idempotency_key.empty()) j["idempotency_key"] = r.idempotency_key;
  return j;
}

/// Schema check only; node existence is checked by validate_request.
template <class J>
EntanglementRequest request_from_json(const J& j) {
  if (!j.is_object()) throw SchemaError("request must be an object");
  static const std::vector<std::string> allowed{"requester",   "qubit_type",   "node_pair",         "start_time_s",
                                                "end_time_s",  "target_ebits", "calibration_basis", "kind",
                                                "bsm",         "idempotency_key"};
  for (const auto& [k, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw SchemaError("request: unknown field '" + k + "'");
  auto need = [&](const char* k) -> const J& {
    if (!j.contains(k)) throw SchemaError(std::string("request: missing field '") + k + "'");
    return j.at(k);
  };
  EntanglementRequest r;
  try {
    r.requester = need("requester").template get<std::string>();
    r.qubit_type = topology::qubit_type_from_string(need("qubit_type").template get<std::string>());
    const auto& pair = need("node_pair");
    if (!pair.is_array() || pair.size() != 2) throw SchemaError("request: node_pair must hold two node ids");
    r.node_a = pair[0].template get<std::string>();
    r.node_b = pair[1].template get<std::string>();
    r.start_time_s = need("start_time_s").template get<double>();
    r.end_time_s = need("end_time_s").template get<double>();
    r.target_ebits = need("target_ebits").template get<long long>();
    if (j.contains("calibration_basis")) r.calibration_basis = j.at("calibration_basis").template get<std::string>();
    if (j.contains("kind")) {
      auto k = j.at("kind").template get<std::string>();
      if (k == "teleportation") r.kind = RequestKind::Teleportation;
      else if (k != "entanglement") throw SchemaError("request: kind must be 'entanglement' or 'teleportation'");
    }
    if (j.contains("bsm")) r.bsm = j.at("bsm").template get<std::string>();
    if (j.contains("idempotency_key")) r.idempotency_key = j.at("idempotency_key").template get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("request: ") + e.what());
  }
  if (r.requester.empty()) throw SchemaError("request: requester must be non-empty");
  if (r.node_a == r.node_b) throw SchemaError("request: node_pair must name two distinct nodes");
  if (!(r.end_time_s > r.start_time_s)) throw SchemaError("request: end_time_s must be after start_time_s");
  if (r.target_ebits < 1) throw SchemaError("request: target_ebits must be >= 1");
  if (r.kind == RequestKind::Teleportation && r.bsm.empty())
    throw SchemaError("request: teleportation requests must name a bsm node");
  return r;
}

/// Both ends must be Q-Nodes of the graph (and the BSM a BSM node).
inline void validate_request(const EntanglementRequest& r, const topology::NetworkGraph& g) {
  for (const auto* id : {&r.node_a, &r.node_b}) {
    if (!g.has_node(*id)) throw SchemaError("request: unknown node '" + *id + "'");
    if (g.node(*id).kind != topology::NodeKind::QNode)
      throw SchemaError("request: '" + *id + "' is not a Q-Node");
  }
  if (r.kind == RequestKind::Teleportation) {
    if (!g.has_node(r.bsm) || g.node(r.bsm).kind != topology::NodeKind::BSM)
      throw SchemaError("request: '" + r.bsm + "' is not a BSM node");
  }
}

}  // namespace qnet::control
