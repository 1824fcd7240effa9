#pragma once

// Headless scenario runs: wire a scenario into a control plane, run it to
// quiescence, and persist trace, results and summary metrics. Everything
// written except run_meta.json is a pure function of (scenario, seed).

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qnet/control/control_plane.hpp"
#include "qnet/gateway/coexistence.hpp"
#include "qnet/gateway/scenario.hpp"

namespace qnet::gateway {

inline constexpr const char* kToolVersion = "0.1.0";

/// Registers resources, schedules faults and submits the scripted requests.
/// Returns the request ids in submission order.
inline std::vector<std::string> wire_scenario(const Scenario& s, control::ControlPlane& cp) {
  for (const auto& [id, node] : s.graph.nodes()) {
    if (s.registration.absent.count(id)) continue;
    DetectorParams d;
    if (auto it = s.detectors.find(id); it != s.detectors.end()) d = it->second;
    auto reg = control::registration_from_config(node, d.detector_efficiency, d.dark_rate_hz);
    if (auto it = s.registration.claims.find(id); it != s.registration.claims.end()) reg.claims = it->second;
    double at = s.registration.at_s;
    if (auto it = s.registration.late.find(id); it != s.registration.late.end()) at = it->second;
    cp.register_resource(reg, at);
  }
  for (const auto& f : s.faults) cp.schedule_fault(f);
  std::vector<std::string> ids;
  for (const auto& r : s.requests) ids.push_back(cp.submit(r.request, r.submit_s));
  return ids;
}

inline std::unique_ptr<control::ControlPlane> make_control_plane(const Scenario& s) {
  return std::make_unique<control::ControlPlane>(s.graph, s.params, s.config, s.seed);
}

struct RunOutcome {
  std::unique_ptr<control::ControlPlane> cp;
  std::vector<std::string> request_ids;
  std::optional<CoexistenceResult> coexistence;
};

inline RunOutcome run_scenario(const Scenario& s) {
  RunOutcome out;
  out.cp = make_control_plane(s);
  out.request_ids = wire_scenario(s, *out.cp);
  if (s.horizon_s) {
    out.cp->run_until(*s.horizon_s);
    out.cp->finalize();
  } else {
    out.cp->run();
  }
  if (s.coexistence) out.coexistence = run_coexistence(*s.coexistence);
  return out;
}

/// Blocking counts resource refusals: Blocked, plus rejections for lack of a
/// capable EPS, EPS capacity, or feasible paths. Malformed requests are in
/// the denominator only.
inline sim::Json summarize(const Scenario& s, const RunOutcome& o) {
  const auto& cp = *o.cp;
  std::map<std::string, int> states;
  int blocked = 0, unfinished = 0;
  long long ebits = 0;
  double stored_time = 0;
  int stored = 0;
  for (const auto& [id, rec] : cp.records()) {
    states[std::string(control::to_string(rec.state))]++;
    if (!control::is_terminal(rec.state)) ++unfinished;
    if (rec.state == control::RequestState::Blocked ||
        (rec.state == control::RequestState::Rejected && rec.reject_reason &&
         *rec.reject_reason != control::RejectReason::InvalidRequest))
      ++blocked;
    ebits += rec.ebits;
  }
  for (const auto& r : cp.results())
    if (r.final_state == "Stored") {
      ++stored;
      stored_time += r.virtual_duration_s;
    }
  std::size_t n = cp.records().size();
  sim::Json j;
  j["v"] = control::kSchemaVersion;
  j["scenario"] = s.name;
  j["seed"] = s.seed;
  j["requests"] = n;
  j["final_states"] = sim::Json::object();
  for (const auto& [k, v] : states) j["final_states"][k] = v;
  j["unfinished"] = unfinished;
  j["blocking_probability"] = n ? static_cast<double>(blocked) / static_cast<double>(n) : 0.0;
  j["mean_time_to_stored_s"] = stored ? sim::Json(stored_time / stored) : sim::Json(nullptr);
  j["ebits_delivered"] = ebits;
  j["virtual_end_t_ns"] = cp.engine().now();
  j["trace_records"] = cp.engine().trace().size();
  if (o.coexistence) j["coexistence"] = to_json(*o.coexistence);
  return j;
}

inline bool any_failed(const control::ControlPlane& cp) {
  for (const auto& [_, rec] : cp.records())
    if (rec.state == control::RequestState::Failed) return true;
  return false;
}

inline void write_batches_csv(std::ostream& os, const std::vector<control::ResultRecord>& results) {
  os << "request_id,t_s,duration_s,ebits,coincidences,car,visibility\n";
  char buf[256];
  for (const auto& r : results)
    for (const auto& b : r.statistics) {
      std::snprintf(buf, sizeof buf, "%s,%.9f,%.6f,%lld,%lld,%.4f,%.6f\n", r.request_id.c_str(),
                    sim::to_seconds(b.t_ns), b.duration_s, b.ebits, b.coincidences, b.car, b.visibility);
      os << buf;
    }
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("IoError", "cannot write '" + p.string() + "'");
  return f;
}

inline std::string utc_now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

/// Writes trace.ndjson, results.ndjson, batches.csv, summary.json, the
/// coexistence CSV when a sweep ran, and the wall-clock sidecar.
inline void write_outputs(const std::filesystem::path& dir, const Scenario& s, const RunOutcome& o,
                          double wall_seconds, const std::string& started_at) {
  std::filesystem::create_directories(dir);
  {
    auto f = detail::open_out(dir / "trace.ndjson");
    sim::write_ndjson(f, o.cp->engine().trace());
  }
  {
    auto f = detail::open_out(dir / "results.ndjson");
    for (const auto& r : o.cp->results()) f << control::to_json(r).dump() << '\n';
  }
  {
    auto f = detail::open_out(dir / "batches.csv");
    write_batches_csv(f, o.cp->results());
  }
  {
    auto f = detail::open_out(dir / "summary.json");
    f << summarize(s, o).dump(2) << '\n';
  }
  if (o.coexistence) {
    auto f = detail::open_out(dir / "coexistence.csv");
    write_coexistence_csv(f, *o.coexistence);
  }
  {
    sim::Json meta;
    meta["tool_version"] = kToolVersion;
    meta["started_at_utc"] = started_at;
    meta["wall_seconds"] = wall_seconds;
    auto f = detail::open_out(dir / "run_meta.json");
    f << meta.dump(2) << '\n';
  }
}

/// Loads, runs and persists. Exit status: 0 iff no request ended Failed.
inline int run_to_dir(const Scenario& s, const std::filesystem::path& out_dir) {
  auto started = detail::utc_now_iso();
  auto t0 = std::chrono::steady_clock::now();
  auto outcome = run_scenario(s);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_outputs(out_dir, s, outcome, wall, started);
  return any_failed(*outcome.cp) ? 1 : 0;
}

}  // namespace qnet::gateway
