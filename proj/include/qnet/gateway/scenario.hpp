#pragma once

// Scenario files: a topology, model parameters, scripted requests and faults,
// plus an optional coexistence sweep. File references are resolved relative
// to the scenario file and inlined before overrides are applied, so a dotted
// override can reach into any part of the document.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnet/control/control_plane.hpp"
#include "qnet/photonics/raman.hpp"
#include "qnet/topology/io.hpp"

namespace qnet::gateway {

using nlohmann::json;

inline constexpr int kScenarioVersion = 1;

struct ScriptedRequest {
  double submit_s = 0;
  control::EntanglementRequest request;
};

struct DetectorParams {
  double detector_efficiency = 0.3;
  double dark_rate_hz = 100.0;
};

struct RegistrationScript {
  double at_s = 0;
  std::map<std::string, double> late;                                   // resource -> registration time
  std::set<std::string> absent;                                          // never register
  std::map<std::string, std::vector<control::ConnectivityClaim>> claims;  // replaces config-derived claims
};

struct SweepBasis {
  std::string name;
  double intrinsic_visibility = 0.9;
};

/// Single-point anchor for the Raman coefficient.
struct SweepAnchor {
  std::string basis;  // empty: the first basis
  double power_dbm = 0;
  photonics::ObservedMetric metric = photonics::ObservedMetric::Visibility;
  double value = 0;
};

/// Pair source over one fiber with co-propagating classical light. Arm 1 is
/// the local arm; arm 2 crosses the fiber.
struct CoexistenceSweep {
  std::vector<double> powers_dbm;
  double fiber_km = 0;
  double loss_db_per_km = 0;
  std::optional<double> classical_loss_db_per_km;  // Raman effective length; defaults to loss_db_per_km
  double local_arm_loss_db = 0;
  double fiber_arm1_km = 0;  // arm 1 may also cross fiber (clock distributed to both nodes)
  double pair_rate_hz = 1e6;
  std::optional<double> zero_power_car;  // if set, the pair rate is solved to reproduce it
  double detector_efficiency = 0.3;
  double dark_rate_hz = 100.0;
  double filter_bw_ghz = 100.0;
  double window_s = 0.5e-9;
  bool classical_arm1 = false;
  bool classical_arm2 = true;
  std::optional<double> raman_coeff;
  std::optional<SweepAnchor> calibration;
  std::vector<SweepBasis> bases;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  json topology_doc;
  topology::NetworkGraph graph;
  control::PhysicalParams params;
  control::ControlConfig config;
  std::map<std::string, DetectorParams> detectors;
  RegistrationScript registration;
  std::vector<ScriptedRequest> requests;
  std::vector<control::Fault> faults;
  std::optional<double> horizon_s;
  std::optional<CoexistenceSweep> coexistence;
  json resolved;  // the document after ref resolution and overrides
};

namespace detail {

inline json read_json_file(const std::filesystem::path& p, const std::string& what) {
  std::ifstream in(p);
  if (!in) throw SchemaError("cannot open " + what + " file '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw SchemaError(what + " '" + p.string() + "' is not valid JSON: " + e.what());
  }
}

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + " must be an object");
  for (const auto& [k, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw SchemaError(where + ": unknown field '" + k + "'");
}

/// Reads `key` into `out` when present, with the JSON library's type check
/// turned into a SchemaError naming the field.
template <class T>
void opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(where + "." + key + " has the wrong type");
  }
}

template <class T>
T req(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
  T out{};
  opt(j, key, out, where);
  return out;
}

inline json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

}  // namespace detail

/// Applies `a.b.2.c=value`. Numeric segments index arrays; missing object
/// keys are created. The value is parsed as JSON, falling back to a string.
inline void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw SchemaError("override '" + assignment + "' is not key=value");
  std::string path = assignment.substr(0, eq);
  json* cur = &doc;
  std::size_t start = 0;
  while (true) {
    auto dot = path.find('.', start);
    std::string seg = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (seg.empty()) throw SchemaError("override '" + path + "' has an empty path segment");
    if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(seg, &used);
        if (used != seg.size()) throw std::invalid_argument(seg);
      } catch (const std::exception&) {
        throw SchemaError("override '" + path + "': '" + seg + "' is not an array index");
      }
      if (idx >= cur->size()) throw SchemaError("override '" + path + "': index " + seg + " out of range");
      cur = &(*cur)[idx];
    } else if (cur->is_object() || cur->is_null()) {
      cur = &(*cur)[seg];
    } else {
      throw SchemaError("override '" + path + "': cannot descend into a scalar at '" + seg + "'");
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *cur = detail::parse_override_value(assignment.substr(eq + 1));
}

inline control::PhysicalParams parse_model_params(const json& j, std::map<std::string, DetectorParams>* detectors) {
  using detail::opt;
  const std::string w = "model_params";
  detail::reject_unknown(j, {"eps", "filter_bw_ghz", "coincidence_window_s", "raman", "sync_power_mw", "probe_power_mw",
                             "probe_rel_noise", "verify_integration_s", "drift_rate_rad_per_s", "alignment_step_s",
                             "timebin_separation_ps", "timebin_jitter_ps", "interferometer_scan_s",
                             "delay_search_halfwidth_clk", "hom", "hom_counts_per_point", "clock", "clock_budget_ps",
                             "detectors"},
                         w);
  control::PhysicalParams p;
  if (j.contains("eps")) {
    const auto& e = j.at("eps");
    detail::reject_unknown(e, {"pair_rate_hz", "intrinsic_visibility", "rep_rate_hz", "pulse_width_ps"}, w + ".eps");
    opt(e, "pair_rate_hz", p.eps.pair_rate_hz, w + ".eps");
    opt(e, "intrinsic_visibility", p.eps.intrinsic_visibility, w + ".eps");
    opt(e, "rep_rate_hz", p.eps.rep_rate_hz, w + ".eps");
    opt(e, "pulse_width_ps", p.eps.pulse_width_ps, w + ".eps");
  }
  opt(j, "filter_bw_ghz", p.filter_bw_ghz, w);
  opt(j, "coincidence_window_s", p.coincidence_window_s, w);
  if (j.contains("raman")) {
    const auto& r = j.at("raman");
    detail::reject_unknown(r, {"anti_stokes", "stokes"}, w + ".raman");
    opt(r, "anti_stokes", p.raman.anti_stokes, w + ".raman");
    opt(r, "stokes", p.raman.stokes, w + ".raman");
  }
  opt(j, "sync_power_mw", p.sync_power_mw, w);
  opt(j, "probe_power_mw", p.probe_power_mw, w);
  opt(j, "probe_rel_noise", p.probe_rel_noise, w);
  opt(j, "verify_integration_s", p.verify_integration_s, w);
  opt(j, "drift_rate_rad_per_s", p.drift_rate_rad_per_s, w);
  opt(j, "alignment_step_s", p.alignment_step_s, w);
  opt(j, "timebin_separation_ps", p.timebin_separation_ps, w);
  opt(j, "timebin_jitter_ps", p.timebin_jitter_ps, w);
  opt(j, "interferometer_scan_s", p.interferometer_scan_s, w);
  opt(j, "delay_search_halfwidth_clk", p.delay_search_halfwidth_clk, w);
  if (j.contains("hom")) {
    const auto& h = j.at("hom");
    detail::reject_unknown(h, {"baseline_rate_hz", "hom_visibility", "coherence_time_ps"}, w + ".hom");
    opt(h, "baseline_rate_hz", p.hom.baseline_rate_hz, w + ".hom");
    opt(h, "hom_visibility", p.hom.hom_visibility, w + ".hom");
    opt(h, "coherence_time_ps", p.hom.coherence_time_ps, w + ".hom");
  }
  opt(j, "hom_counts_per_point", p.hom_counts_per_point, w);
  if (j.contains("clock")) {
    const auto& c = j.at("clock");
    detail::reject_unknown(c, {"oscillator_jitter_fs", "distribution_jitter_ps", "clock_rate_hz", "clock_power_mw"},
                           w + ".clock");
    opt(c, "oscillator_jitter_fs", p.clock.oscillator_jitter_fs, w + ".clock");
    opt(c, "distribution_jitter_ps", p.clock.distribution_jitter_ps, w + ".clock");
    opt(c, "clock_rate_hz", p.clock.clock_rate_hz, w + ".clock");
    opt(c, "clock_power_mw", p.clock.clock_power_mw, w + ".clock");
  }
  opt(j, "clock_budget_ps", p.clock_budget_ps, w);
  if (j.contains("detectors") && detectors) {
    const auto& d = j.at("detectors");
    if (!d.is_object()) throw SchemaError(w + ".detectors must map node ids to detector parameters");
    for (const auto& [node, v] : d.items()) {
      detail::reject_unknown(v, {"detector_efficiency", "dark_rate_hz"}, w + ".detectors." + node);
      DetectorParams dp;
      opt(v, "detector_efficiency", dp.detector_efficiency, w + ".detectors." + node);
      opt(v, "dark_rate_hz", dp.dark_rate_hz, w + ".detectors." + node);
      (*detectors)[node] = dp;
    }
  }
  try {
    p.eps.validate();
    p.hom.validate();
  } catch (const Error& e) {
    throw SchemaError(w + ": " + e.what());
  }
  return p;
}

inline control::ControlConfig parse_control(const json& j, control::ControlConfig c) {
  using detail::opt;
  const std::string w = "control";
  detail::reject_unknown(j, {"k_paths", "quantum_band", "sync_channel", "max_verification_rounds", "max_establish_attempts", "backoff_base_s",
                             "verify_threshold", "bus_latency_s", "batch_interval_s", "discovery_window_s",
                             "max_midrun_failures", "recal_visibility_floor"},
                         w);
  opt(j, "k_paths", c.routing.k_paths, w);
  if (j.contains("quantum_band")) c.routing.quantum_band = topology::band_from_string(detail::req<std::string>(j, "quantum_band", w));
  opt(j, "sync_channel", c.routing.sync_channel, w);
  opt(j, "max_verification_rounds", c.max_verification_rounds, w);
  opt(j, "max_establish_attempts", c.max_establish_attempts, w);
  opt(j, "backoff_base_s", c.backoff_base_s, w);
  opt(j, "verify_threshold", c.verify_threshold, w);
  opt(j, "bus_latency_s", c.bus_latency_s, w);
  opt(j, "batch_interval_s", c.batch_interval_s, w);
  opt(j, "discovery_window_s", c.discovery_window_s, w);
  opt(j, "max_midrun_failures", c.max_midrun_failures, w);
  opt(j, "recal_visibility_floor", c.recal_visibility_floor, w);
  if (!(c.bus_latency_s > 0)) throw SchemaError("control.bus_latency_s must be > 0");
  if (!(c.batch_interval_s > 0)) throw SchemaError("control.batch_interval_s must be > 0");
  return c;
}

inline CoexistenceSweep parse_coexistence(const json& j) {
  using detail::opt;
  const std::string w = "coexistence_sweep";
  detail::reject_unknown(j, {"powers_dbm", "fiber_km", "loss_db_per_km", "classical_loss_db_per_km",
                             "local_arm_loss_db", "fiber_arm1_km", "pair_rate_hz", "zero_power_car",
                             "detector_efficiency", "dark_rate_hz", "filter_bw_ghz", "window_s", "classical_arms",
                             "raman_coeff", "calibration", "bases"},
                         w);
  CoexistenceSweep s;
  s.powers_dbm = detail::req<std::vector<double>>(j, "powers_dbm", w);
  s.fiber_km = detail::req<double>(j, "fiber_km", w);
  s.loss_db_per_km = detail::req<double>(j, "loss_db_per_km", w);
  if (j.contains("classical_loss_db_per_km")) s.classical_loss_db_per_km = detail::req<double>(j, "classical_loss_db_per_km", w);
  opt(j, "local_arm_loss_db", s.local_arm_loss_db, w);
  opt(j, "fiber_arm1_km", s.fiber_arm1_km, w);
  opt(j, "pair_rate_hz", s.pair_rate_hz, w);
  if (j.contains("zero_power_car")) s.zero_power_car = detail::req<double>(j, "zero_power_car", w);
  opt(j, "detector_efficiency", s.detector_efficiency, w);
  opt(j, "dark_rate_hz", s.dark_rate_hz, w);
  opt(j, "filter_bw_ghz", s.filter_bw_ghz, w);
  opt(j, "window_s", s.window_s, w);
  if (j.contains("classical_arms")) {
    auto arms = detail::req<std::vector<int>>(j, "classical_arms", w);
    s.classical_arm1 = std::count(arms.begin(), arms.end(), 1) > 0;
    s.classical_arm2 = std::count(arms.begin(), arms.end(), 2) > 0;
    for (int a : arms)
      if (a != 1 && a != 2) throw SchemaError(w + ".classical_arms entries must be 1 or 2");
  }
  if (j.contains("raman_coeff")) s.raman_coeff = detail::req<double>(j, "raman_coeff", w);
  if (j.contains("calibration")) {
    const auto& c = j.at("calibration");
    detail::reject_unknown(c, {"basis", "power_dbm", "metric", "value"}, w + ".calibration");
    SweepAnchor a;
    opt(c, "basis", a.basis, w + ".calibration");
    a.power_dbm = detail::req<double>(c, "power_dbm", w + ".calibration");
    auto metric = detail::req<std::string>(c, "metric", w + ".calibration");
    if (metric == "visibility") a.metric = photonics::ObservedMetric::Visibility;
    else if (metric == "car") a.metric = photonics::ObservedMetric::Car;
    else throw SchemaError(w + ".calibration.metric must be 'visibility' or 'car'");
    a.value = detail::req<double>(c, "value", w + ".calibration");
    s.calibration = a;
  }
  if (s.raman_coeff.has_value() == s.calibration.has_value())
    throw SchemaError(w + ": give exactly one of raman_coeff or calibration");
  const auto& bases = j.contains("bases") ? j.at("bases") : json::array({{{"name", "HV"}}});
  if (!bases.is_array() || bases.empty()) throw SchemaError(w + ".bases must be a non-empty list");
  for (const auto& b : bases) {
    detail::reject_unknown(b, {"name", "intrinsic_visibility"}, w + ".bases[]");
    SweepBasis sb;
    sb.name = detail::req<std::string>(b, "name", w + ".bases[]");
    opt(b, "intrinsic_visibility", sb.intrinsic_visibility, w + ".bases[]");
    s.bases.push_back(sb);
  }
  if (s.calibration && !s.calibration->basis.empty() &&
      std::none_of(s.bases.begin(), s.bases.end(), [&](const SweepBasis& b) { return b.name == s.calibration->basis; }))
    throw SchemaError(w + ".calibration.basis names no listed basis");
  if (!(s.fiber_km >= 0 && s.loss_db_per_km >= 0)) throw SchemaError(w + ": fiber length and loss must be >= 0");
  return s;
}

inline control::Fault parse_fault(const json& j) {
  const std::string w = "faults[]";
  detail::reject_unknown(j, {"kind", "at_s", "target", "count", "magnitude"}, w);
  control::Fault f;
  f.kind = control::fault_kind_from_string(detail::req<std::string>(j, "kind", w));
  f.at_s = detail::req<double>(j, "at_s", w);
  detail::opt(j, "target", f.target, w);
  detail::opt(j, "count", f.count, w);
  detail::opt(j, "magnitude", f.magnitude, w);
  if (f.at_s < 0) throw SchemaError(w + ": at_s must be >= 0");
  return f;
}

/// Replaces "topology" / "model_params" string references by the referenced
/// documents, resolved against `base_dir`.
inline void resolve_refs(json& doc, const std::filesystem::path& base_dir) {
  for (const char* key : {"topology", "model_params"}) {
    if (!doc.contains(key) || !doc[key].is_string()) continue;
    std::filesystem::path p = doc[key].get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    doc[key] = detail::read_json_file(p, key);
  }
}

/// Builds a scenario from a document whose refs are already inlined.
inline Scenario parse_scenario(const json& doc) {
  using detail::opt;
  detail::reject_unknown(doc, {"v", "name", "topology", "model_params", "seed", "duty_cycle_s", "horizon_s", "control",
                               "registration", "requests", "faults", "coexistence_sweep"},
                         "scenario");
  Scenario s;
  s.resolved = doc;
  int v = detail::req<int>(doc, "v", "scenario");
  if (v != kScenarioVersion) throw SchemaError("scenario: unsupported version " + std::to_string(v));
  opt(doc, "name", s.name, "scenario");
  opt(doc, "seed", s.seed, "scenario");
  if (!doc.contains("topology")) throw SchemaError("scenario: missing field 'topology'");
  s.topology_doc = doc.at("topology");
  s.graph = topology::load_topology(s.topology_doc);
  s.params = parse_model_params(doc.value("model_params", json::object()), &s.detectors);
  for (const auto& [node, _] : s.detectors)
    if (!s.graph.has_node(node)) throw SchemaError("model_params.detectors: unknown node '" + node + "'");
  opt(doc, "duty_cycle_s", s.config.duty_cycle_s, "scenario");
  if (s.config.duty_cycle_s < 0) throw SchemaError("scenario: duty_cycle_s must be >= 0");
  if (doc.contains("control")) s.config = parse_control(doc.at("control"), s.config);
  if (doc.contains("horizon_s")) s.horizon_s = detail::req<double>(doc, "horizon_s", "scenario");

  if (doc.contains("registration")) {
    const auto& r = doc.at("registration");
    const std::string w = "registration";
    detail::reject_unknown(r, {"at_s", "late", "absent", "claims"}, w);
    opt(r, "at_s", s.registration.at_s, w);
    opt(r, "late", s.registration.late, w);
    opt(r, "absent", s.registration.absent, w);
    if (r.contains("claims")) {
      if (!r.at("claims").is_object()) throw SchemaError(w + ".claims must map node ids to claim lists");
      for (const auto& [node, list] : r.at("claims").items()) {
        if (!list.is_array()) throw SchemaError(w + ".claims." + node + " must be a list");
        auto& out = s.registration.claims[node];
        for (const auto& c : list) {
          detail::reject_unknown(c, {"local_port", "remote"}, w + ".claims." + node);
          auto tag = detail::req<std::string>(c, "remote", w + ".claims." + node);
          auto remote = control::parse_tag(tag);
          if (!remote) throw SchemaError(w + ".claims." + node + ": malformed remote '" + tag + "'");
          out.push_back({detail::req<int>(c, "local_port", w + ".claims." + node), *remote});
        }
      }
    }
    for (const auto& [node, _] : s.registration.late)
      if (!s.graph.has_node(node)) throw SchemaError(w + ": unknown node '" + node + "'");
    for (const auto& node : s.registration.absent)
      if (!s.graph.has_node(node)) throw SchemaError(w + ": unknown node '" + node + "'");
    for (const auto& [node, _] : s.registration.claims)
      if (!s.graph.has_node(node)) throw SchemaError(w + ": unknown node '" + node + "'");
  }

  if (doc.contains("requests")) {
    const auto& list = doc.at("requests");
    if (!list.is_array()) throw SchemaError("scenario: requests must be a list");
    for (const auto& item : list) {
      if (!item.is_object()) throw SchemaError("requests[]: entries must be objects");
      ScriptedRequest sr;
      sr.submit_s = detail::req<double>(item, "submit_s", "requests[]");
      json body = item;
      body.erase("submit_s");
      sr.request = control::request_from_json(body);
      control::validate_request(sr.request, s.graph);
      if (!s.requests.empty() && sr.submit_s < s.requests.back().submit_s)
        throw SchemaError("requests must be sorted by submit_s");
      if (sr.submit_s < 0) throw SchemaError("requests[]: submit_s must be >= 0");
      s.requests.push_back(std::move(sr));
    }
  }
  if (doc.contains("faults")) {
    const auto& list = doc.at("faults");
    if (!list.is_array()) throw SchemaError("scenario: faults must be a list");
    for (const auto& f : list) s.faults.push_back(parse_fault(f));
  }
  if (doc.contains("coexistence_sweep")) s.coexistence = parse_coexistence(doc.at("coexistence_sweep"));
  return s;
}

/// Loads a scenario file, inlines its refs, applies overrides and parses.
/// Any malformed input surfaces as SchemaError.
inline Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  json doc = detail::read_json_file(path, "scenario");
  if (!doc.is_object()) throw SchemaError("scenario must be a JSON object");
  resolve_refs(doc, path.parent_path());
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    return parse_scenario(doc);
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(e.code() + ": " + e.what());
  }
}

}  // namespace qnet::gateway
