#pragma once

// Calibrated coexistence sweep: build the pair setup a scenario describes,
// anchor the Raman coefficient at one point, then predict visibility and CAR
// over a list of classical launch powers for every basis.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "qnet/gateway/scenario.hpp"
#include "qnet/photonics/raman.hpp"

namespace qnet::gateway {

struct CoexistenceRow {
  std::string basis;
  double power_dbm = 0;
  double visibility = 0;
  bool nonclassical = false;
  double car = 0;
};

struct CoexistenceResult {
  double raman_coeff = 0;
  double pair_rate_hz = 0;
  std::vector<CoexistenceRow> rows;
  std::vector<std::pair<std::string, double>> nonclassical_limit_dbm;  // per basis; +inf if never crossed, -inf if classical at zero power
};

inline photonics::PairSetup coexistence_setup(const CoexistenceSweep& s, const SweepBasis& basis) {
  photonics::PairSetup p;
  p.eps.pair_rate_hz = s.pair_rate_hz;
  p.eps.intrinsic_visibility = basis.intrinsic_visibility;
  double classical_att = s.classical_loss_db_per_km.value_or(s.loss_db_per_km);
  auto arm = [&](double extra_loss_db, double km) {
    photonics::ChannelModel ch;
    ch.transmittance = std::pow(10.0, -(extra_loss_db + s.loss_db_per_km * km) / 10.0);
    ch.detector_efficiency = s.detector_efficiency;
    ch.dark_rate_hz = s.dark_rate_hz;
    ch.filter_bw_ghz = s.filter_bw_ghz;
    ch.coincidence_window_s = s.window_s;
    ch.fiber_length_km = km;
    ch.classical_attenuation_db_per_km = classical_att;
    return ch;
  };
  p.arm1 = arm(s.local_arm_loss_db, s.fiber_arm1_km);
  p.arm2 = arm(0.0, s.fiber_km);
  p.classical_arm1 = s.classical_arm1;
  p.classical_arm2 = s.classical_arm2;
  return p;
}

/// Pair rate (when the sweep pins the zero-power CAR) and Raman coefficient
/// are fixed on the anchor basis and then shared by every basis.
inline CoexistenceResult run_coexistence(CoexistenceSweep s, const std::vector<double>* powers_override = nullptr) {
  if (powers_override) s.powers_dbm = *powers_override;
  const SweepBasis* anchor = &s.bases.front();
  if (s.calibration && !s.calibration->basis.empty())
    for (const auto& b : s.bases)
      if (b.name == s.calibration->basis) anchor = &b;

  if (s.zero_power_car) s.pair_rate_hz = photonics::solve_pair_rate_for_car(coexistence_setup(s, *anchor), *s.zero_power_car);

  CoexistenceResult out;
  out.pair_rate_hz = s.pair_rate_hz;
  if (s.raman_coeff) {
    out.raman_coeff = *s.raman_coeff;
  } else {
    photonics::RamanObservation obs{dbm_to_mw(s.calibration->power_dbm), s.calibration->metric,
                                    s.calibration->value};
    out.raman_coeff = photonics::calibrate_raman({obs}, coexistence_setup(s, *anchor)).raman_coeff;
  }
  for (const auto& b : s.bases) {
    auto setup = coexistence_setup(s, b);
    for (const auto& pt : photonics::sweep_power_dbm(setup, out.raman_coeff, s.powers_dbm))
      out.rows.push_back({b.name, pt.power_dbm, pt.stats.visibility, pt.bell == photonics::BellClass::NonClassical,
                          pt.stats.car});
    double lim = photonics::nonclassical_limit_mw(setup, out.raman_coeff);
    out.nonclassical_limit_dbm.emplace_back(b.name, lim > 0 ? 10 * std::log10(lim) : -INFINITY);
  }
  return out;
}

/// Fixed-precision CSV so identical runs give identical bytes.
inline void write_coexistence_csv(std::ostream& os, const CoexistenceResult& r) {
  os << "basis,launch_power_dbm,predicted_visibility,nonclassical,car\n";
  char buf[160];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.6f,%s,%.4f\n", row.basis.c_str(), row.power_dbm, row.visibility,
                  row.nonclassical ? "true" : "false", row.car);
    os << buf;
  }
}

inline sim::Json to_json(const CoexistenceResult& r) {
  sim::Json j;
  j["raman_coeff"] = r.raman_coeff;
  j["pair_rate_hz"] = r.pair_rate_hz;
  j["nonclassical_limit_dbm"] = sim::Json::object();
  for (const auto& [b, v] : r.nonclassical_limit_dbm)
    j["nonclassical_limit_dbm"][b] = std::isfinite(v) ? sim::Json(v) : sim::Json(nullptr);
  return j;
}

}  // namespace qnet::gateway
