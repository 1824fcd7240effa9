#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qnet/control/paths.hpp"
#include "qnet/control/protocol.hpp"

namespace qnet::control {

struct StateChange {
  RequestState state;
  SimTime t_ns;
  std::string detail;

  friend bool operator==(const StateChange&, const StateChange&) = default;
};

/// One accepted measurement batch.
struct BatchStats {
  SimTime t_ns = 0;
  double duration_s = 0;
  long long ebits = 0;
  long long coincidences = 0;
  double coincidence_rate_hz = 0;
  double accidental_rate_hz = 0;
  double car = 0;
  double visibility = 0;

  friend bool operator==(const BatchStats&, const BatchStats&) = default;
};

struct CalibrationReport {
  std::string node;
  std::string procedure;
  SimTime t_ns = 0;
  bool mid_run = false;
  bool ok = true;
  Json details;

  friend bool operator==(const CalibrationReport&, const CalibrationReport&) = default;
};

struct RequestRecord {
  std::string id;
  EntanglementRequest request;
  RequestState state = RequestState::Received;
  std::string failure_reason;
  std::optional<RejectReason> reject_reason;
  std::vector<StateChange> history;
  std::string eps_id;
  std::optional<EstablishedPaths> paths;
  long long ebits = 0;
  std::vector<BatchStats> batches;
  std::vector<CalibrationReport> calibrations;
  int establish_attempts = 0;
  int verification_rounds = 0;
  int recalibrations = 0;
  std::optional<double> fidelity_estimate;
  SimTime submitted_t_ns = 0;
};

/// Persisted outcome of a request. Immutable once written.
struct ResultRecord {
  std::string request_id;
  std::string requester;
  std::string final_state;
  std::string reason;  // failure or rejection reason; empty for Stored
  std::string eps_id;
  long long ebits_delivered = 0;
  std::vector<BatchStats> statistics;
  std::vector<CalibrationReport> calibration_reports;
  std::vector<StateChange> history;
  std::optional<double> fidelity_estimate;
  SimTime submitted_t_ns = 0;
  SimTime final_t_ns = 0;
  double virtual_duration_s = 0;

  friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

/// Non-finite CAR values serialize as null (+inf is the only one produced).
inline Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }
inline double number_from(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

inline Json to_json(const BatchStats& b) {
  Json j;
  j["t_ns"] = b.t_ns;
  j["duration_s"] = b.duration_s;
  j["ebits"] = b.ebits;
  j["coincidences"] = b.coincidences;
  j["coincidence_rate_hz"] = b.coincidence_rate_hz;
  j["accidental_rate_hz"] = b.accidental_rate_hz;
  j["car"] = number_or_null(b.car);
  j["visibility"] = b.visibility;
  return j;
}

inline BatchStats batch_from_json(const Json& j) {
  return BatchStats{j.at("t_ns").get<SimTime>(),      j.at("duration_s").get<double>(),
                    j.at("ebits").get<long long>(),   j.at("coincidences").get<long long>(),
                    j.at("coincidence_rate_hz").get<double>(), j.at("accidental_rate_hz").get<double>(),
                    number_from(j.at("car")),         j.at("visibility").get<double>()};
}

inline Json to_json(const CalibrationReport& c) {
  Json j;
  j["node"] = c.node;
  j["procedure"] = c.procedure;
  j["t_ns"] = c.t_ns;
  j["mid_run"] = c.mid_run;
  j["ok"] = c.ok;
  j["details"] = c.details;
  return j;
}

inline CalibrationReport calibration_from_json(const Json& j) {
  return CalibrationReport{j.at("node").get<std::string>(), j.at("procedure").get<std::string>(),
                           j.at("t_ns").get<SimTime>(),     j.at("mid_run").get<bool>(),
                           j.at("ok").get<bool>(),          j.at("details")};
}

inline Json to_json(const StateChange& s) {
  Json j;
  j["state"] = std::string(to_string(s.state));
  j["t_ns"] = s.t_ns;
  if (!s.detail.empty()) j["detail"] = s.detail;
  return j;
}

inline StateChange state_change_from_json(const Json& j) {
  return StateChange{request_state_from_string(j.at("state").get<std::string>()), j.at("t_ns").get<SimTime>(),
                     j.value("detail", std::string())};
}

inline Json to_json(const ResultRecord& r) {
  Json j;
  j["v"] = kSchemaVersion;
  j["request_id"] = r.request_id;
  j["requester"] = r.requester;
  j["final_state"] = r.final_state;
  j["reason"] = r.reason;
  j["eps_id"] = r.eps_id;
  j["ebits_delivered"] = r.ebits_delivered;
  j["statistics"] = Json::array();
  for (const auto& b : r.statistics) j["statistics"].push_back(to_json(b));
  j["calibration_reports"] = Json::array();
  for (const auto& c : r.calibration_reports) j["calibration_reports"].push_back(to_json(c));
  j["history"] = Json::array();
  for (const auto& s : r.history) j["history"].push_back(to_json(s));
  j["fidelity_estimate"] = r.fidelity_estimate ? Json(*r.fidelity_estimate) : Json(nullptr);
  j["submitted_t_ns"] = r.submitted_t_ns;
  j["final_t_ns"] = r.final_t_ns;
  j["virtual_duration_s"] = r.virtual_duration_s;
  return j;
}

inline ResultRecord result_from_json(const Json& j) {
  try {
    ResultRecord r;
    r.request_id = j.at("request_id").get<std::string>();
    r.requester = j.at("requester").get<std::string>();
    r.final_state = j.at("final_state").get<std::string>();
    r.reason = j.at("reason").get<std::string>();
    r.eps_id = j.at("eps_id").get<std::string>();
    r.ebits_delivered = j.at("ebits_delivered").get<long long>();
    for (const auto& b : j.at("statistics")) r.statistics.push_back(batch_from_json(b));
    for (const auto& c : j.at("calibration_reports")) r.calibration_reports.push_back(calibration_from_json(c));
    for (const auto& s : j.at("history")) r.history.push_back(state_change_from_json(s));
    if (!j.at("fidelity_estimate").is_null()) r.fidelity_estimate = j.at("fidelity_estimate").get<double>();
    r.submitted_t_ns = j.at("submitted_t_ns").get<SimTime>();
    r.final_t_ns = j.at("final_t_ns").get<SimTime>();
    r.virtual_duration_s = j.at("virtual_duration_s").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("result record: ") + e.what());
  }
}

inline ResultRecord make_result(const RequestRecord& rec, SimTime now) {
  ResultRecord r;
  r.request_id = rec.id;
  r.requester = rec.request.requester;
  r.final_state = std::string(to_string(rec.state));
  r.reason = rec.reject_reason ? std::string(to_string(*rec.reject_reason)) + ": " + rec.failure_reason
                               : rec.failure_reason;
  r.eps_id = rec.eps_id;
  r.ebits_delivered = rec.ebits;
  r.statistics = rec.batches;
  r.calibration_reports = rec.calibrations;
  r.history = rec.history;
  r.fidelity_estimate = rec.fidelity_estimate;
  r.submitted_t_ns = rec.submitted_t_ns;
  r.final_t_ns = now;
  r.virtual_duration_s = sim::to_seconds(now - rec.submitted_t_ns);
  return r;
}

}  // namespace qnet::control
