#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qnet/core/error.hpp"

namespace qnet::topology {

enum class NodeKind { QNode, EPS, BSM, OpticalSwitch };

enum class Band { OBand, CBand, LBand };

enum class QubitType { Polarization, TimeBin };

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::QNode: return "QNode";
    case NodeKind::EPS: return "EPS";
    case NodeKind::BSM: return "BSM";
    case NodeKind::OpticalSwitch: return "OpticalSwitch";
  }
  return "?";
}

inline NodeKind node_kind_from_string(std::string_view s) {
  if (s == "QNode") return NodeKind::QNode;
  if (s == "EPS") return NodeKind::EPS;
  if (s == "BSM") return NodeKind::BSM;
  if (s == "OpticalSwitch") return NodeKind::OpticalSwitch;
  throw SchemaError("unknown node kind '" + std::string(s) + "'");
}

/// Band keys double as the attenuation-map keys of the topology schema.
inline std::string_view to_string(Band b) {
  switch (b) {
    case Band::OBand: return "o_band";
    case Band::CBand: return "c_band";
    case Band::LBand: return "l_band";
  }
  return "?";
}

inline Band band_from_string(std::string_view s) {
  if (s == "o_band") return Band::OBand;
  if (s == "c_band") return Band::CBand;
  if (s == "l_band") return Band::LBand;
  throw SchemaError("unknown band '" + std::string(s) + "'");
}

inline std::string_view to_string(QubitType q) {
  return q == QubitType::Polarization ? "Polarization" : "TimeBin";
}

inline QubitType qubit_type_from_string(std::string_view s) {
  if (s == "Polarization") return QubitType::Polarization;
  if (s == "TimeBin") return QubitType::TimeBin;
  throw SchemaError("unknown qubit type '" + std::string(s) + "'");
}

struct PortConfig {
  int index = 0;
  std::string tag;  // "<remote node>:<remote port>" for connected ports

  friend bool operator==(const PortConfig&, const PortConfig&) = default;
};

struct NetworkNode {
  std::string id;
  NodeKind kind = NodeKind::QNode;
  std::string ip;
  double insertion_loss_db = 0.0;
  double pdl_db = 0.0;
  double pmd_ps = 0.0;
  std::vector<PortConfig> ports;
  // EPS only: number of wavelength outputs N (serves N/2 user pairs).
  int wavelength_outputs = 0;
  std::set<QubitType> qubit_types;

  bool has_port(int index) const {
    for (const auto& p : ports)
      if (p.index == index) return true;
    return false;
  }
  const PortConfig* port(int index) const {
    for (const auto& p : ports)
      if (p.index == index) return &p;
    return nullptr;
  }

  friend bool operator==(const NetworkNode&, const NetworkNode&) = default;
};

struct Endpoint {
  std::string node;
  int port = 0;

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

struct WavelengthChannel {
  std::string label;
  double center_nm = 0.0;
  double width_ghz = 0.0;
  Band band = Band::CBand;

  friend bool operator==(const WavelengthChannel&, const WavelengthChannel&) = default;
};

struct FiberLink {
  std::string id;
  Endpoint a;
  Endpoint b;
  double length_km = 0.0;
  std::map<Band, double> attenuation_db_per_km;
  int total_wavelengths = 1;
  // channel label -> owning lightpath id
  std::map<std::string, std::string> occupancy;
  bool admin_up = true;

  bool touches(std::string_view node) const { return a.node == node || b.node == node; }

  const std::string& other_end(std::string_view node) const {
    return a.node == node ? b.node : a.node;
  }
  const Endpoint& endpoint_at(std::string_view node) const { return a.node == node ? a : b; }

  std::optional<double> attenuation(Band band) const {
    auto it = attenuation_db_per_km.find(band);
    if (it == attenuation_db_per_km.end()) return std::nullopt;
    return it->second;
  }

  bool is_full() const { return static_cast<int>(occupancy.size()) >= total_wavelengths; }

  friend bool operator==(const FiberLink&, const FiberLink&) = default;
};

/// Validates the band ranges that the grid depends on.
inline void validate_channel(const WavelengthChannel& ch) {
  if (ch.label.empty()) throw SchemaError("grid channel with empty label");
  if (ch.width_ghz <= 0.0) throw SchemaError("channel " + ch.label + ": width_ghz must be > 0");
  switch (ch.band) {
    case Band::OBand:
      if (ch.center_nm < 1260.0 || ch.center_nm > 1360.0)
        throw SchemaError("channel " + ch.label + ": O-band center must lie in [1260, 1360] nm");
      break;
    case Band::CBand:
      if (ch.center_nm < 1530.0 || ch.center_nm > 1565.0)
        throw SchemaError("channel " + ch.label + ": C-band center must lie in [1530, 1565] nm");
      break;
    case Band::LBand:
      if (ch.center_nm < 1565.0 || ch.center_nm > 1625.0)
        throw SchemaError("channel " + ch.label + ": L-band center must lie in [1565, 1625] nm");
      break;
  }
}

}  // namespace qnet::topology
