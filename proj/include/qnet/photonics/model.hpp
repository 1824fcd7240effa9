#pragma once

// Phenomenological physical-layer model for a pair source feeding two
// detection arms. All rates are in counts per second.

#include <cmath>
#include <limits>
#include <optional>

#include "qnet/core/error.hpp"
#include "qnet/core/loss.hpp"

namespace qnet::photonics {

inline constexpr double kNonClassicalVisibility = 0.70710678118654752440;  // 1/sqrt(2)
inline constexpr double kClassicalTeleportationFidelity = 2.0 / 3.0;

struct EpsModel {
  double pair_rate_hz = 1e6;
  double intrinsic_visibility = 0.90;
  int n_wavelength_outputs = 4;
  double rep_rate_hz = 417e6;
  double pulse_width_ps = 80.0;

  int max_user_pairs() const { return n_wavelength_outputs / 2; }

  void validate() const {
    if (!(pair_rate_hz >= 0)) throw OutOfRange("pair_rate_hz must be >= 0");
    if (!(intrinsic_visibility >= 0 && intrinsic_visibility <= 1))
      throw OutOfRange("intrinsic_visibility must lie in [0, 1]");
    if (n_wavelength_outputs < 2 || n_wavelength_outputs % 2 != 0)
      throw OutOfRange("n_wavelength_outputs must be even and >= 2");
  }
};

/// Which side of the classical line the quantum channel sits on. The Raman
/// cross-section differs between the two so each has its own coefficient.
enum class RamanSide { AntiStokes, Stokes };

inline RamanSide raman_side(double quantum_nm, double classical_nm) {
  return quantum_nm < classical_nm ? RamanSide::AntiStokes : RamanSide::Stokes;
}

struct RamanCoefficients {
  double anti_stokes = 0.0;  // counts/s per mW per km per GHz
  double stokes = 0.0;

  double for_side(RamanSide s) const { return s == RamanSide::AntiStokes ? anti_stokes : stokes; }
};

struct ChannelModel {
  double transmittance = 1.0;
  double detector_efficiency = 0.3;
  double dark_rate_hz = 100.0;
  double filter_bw_ghz = 100.0;
  double coincidence_window_s = 0.5e-9;
  double raman_coeff = 0.0;  // counts/s per mW per km per GHz
  double classical_power_mw = 0.0;
  double fiber_length_km = 0.0;
  double classical_attenuation_db_per_km = 0.2;  // sets the Raman effective length

  static ChannelModel from_loss(Loss loss) {
    ChannelModel ch;
    ch.transmittance = loss.transmittance();
    return ch;
  }

  double detected_transmittance() const { return transmittance * detector_efficiency; }

  void validate() const {
    if (!(transmittance >= 0 && transmittance <= 1)) throw OutOfRange("transmittance must lie in [0, 1]");
    if (!(detector_efficiency > 0 && detector_efficiency <= 1))
      throw OutOfRange("detector_efficiency must lie in (0, 1]");
    if (!(dark_rate_hz >= 0)) throw OutOfRange("dark_rate_hz must be >= 0");
    if (!(filter_bw_ghz > 0)) throw OutOfRange("filter_bw_ghz must be > 0");
    if (!(coincidence_window_s > 0)) throw OutOfRange("coincidence_window_s must be > 0");
    if (!(raman_coeff >= 0)) throw OutOfRange("raman_coeff must be >= 0");
    if (!(classical_power_mw >= 0)) throw OutOfRange("classical_power_mw must be >= 0");
    if (!(fiber_length_km >= 0)) throw OutOfRange("fiber_length_km must be >= 0");
    if (!(classical_attenuation_db_per_km >= 0)) throw OutOfRange("classical_attenuation_db_per_km must be >= 0");
  }
};

/// (1 - 10^(-aL/10)) / (a ln10 / 10); equals L when a = 0.
inline double effective_length_km(double length_km, double attenuation_db_per_km) {
  if (attenuation_db_per_km <= 0) return length_km;
  double a = attenuation_db_per_km * std::log(10.0) / 10.0;
  return -std::expm1(-a * length_km) / a;
}

inline double raman_rate(const ChannelModel& ch) {
  return ch.raman_coeff * ch.classical_power_mw *
         effective_length_km(ch.fiber_length_km, ch.classical_attenuation_db_per_km) * ch.filter_bw_ghz *
         ch.detector_efficiency;
}

inline double noise_rate(const ChannelModel& ch) { return raman_rate(ch) + ch.dark_rate_hz; }

struct StatUncertainty {
  double singles_1_hz = 0;
  double singles_2_hz = 0;
  double coincidences_hz = 0;
  double accidentals_hz = 0;
  double car = 0;
  double visibility = 0;
};

struct PhotonStatistics {
  double singles_1_hz = 0;
  double singles_2_hz = 0;
  double coincidences_hz = 0;
  double accidentals_hz = 0;
  double car = 0;  // +inf when accidentals vanish with coincidences present
  double visibility = 0;
  std::optional<StatUncertainty> uncertainties;
};

/// 0 without coincidences, +inf without accidentals, C/A otherwise.
inline double car_of(double coincidences, double accidentals) {
  if (coincidences <= 0) return 0.0;
  if (accidentals <= 0) return std::numeric_limits<double>::infinity();
  return coincidences / accidentals;
}

/// Fringe visibility with accidentals adding equally to maximum and minimum.
/// Zero when there is no true coincidence signal at all.
inline double visibility(double intrinsic_visibility, double coincidences, double accidentals) {
  double denom = coincidences + 2.0 * accidentals;
  if (denom <= 0) return 0.0;
  return coincidences * intrinsic_visibility / denom;
}

inline double visibility(const EpsModel& eps, const PhotonStatistics& s) {
  return visibility(eps.intrinsic_visibility, s.coincidences_hz, s.accidentals_hz);
}

inline PhotonStatistics singles_and_coincidences(const EpsModel& eps, const ChannelModel& ch1,
                                                 const ChannelModel& ch2) {
  eps.validate();
  ch1.validate();
  ch2.validate();
  PhotonStatistics s;
  double d1 = ch1.detected_transmittance();
  double d2 = ch2.detected_transmittance();
  double tau = std::min(ch1.coincidence_window_s, ch2.coincidence_window_s);
  s.singles_1_hz = eps.pair_rate_hz * d1 + noise_rate(ch1);
  s.singles_2_hz = eps.pair_rate_hz * d2 + noise_rate(ch2);
  s.coincidences_hz = eps.pair_rate_hz * d1 * d2;
  s.accidentals_hz = s.singles_1_hz * s.singles_2_hz * tau;
  s.car = car_of(s.coincidences_hz, s.accidentals_hz);
  s.visibility = visibility(eps, s);
  return s;
}

enum class BellClass { NonClassical, Classical };
enum class TeleportationClass { AboveClassical, NotAboveClassical };

inline BellClass classify_nonclassical(double v) {
  if (!(v >= 0 && v <= 1)) throw OutOfRange("visibility must lie in [0, 1]");
  return v > kNonClassicalVisibility ? BellClass::NonClassical : BellClass::Classical;
}

inline TeleportationClass teleportation_bound_check(double fidelity) {
  if (!(fidelity >= 0 && fidelity <= 1)) throw OutOfRange("fidelity must lie in [0, 1]");
  return fidelity > kClassicalTeleportationFidelity ? TeleportationClass::AboveClassical
                                                    : TeleportationClass::NotAboveClassical;
}

inline const char* to_string(BellClass c) { return c == BellClass::NonClassical ? "nonclassical" : "classical"; }

struct HomDipModel {
  double baseline_rate_hz = 1000.0;
  double hom_visibility = 0.9;
  double coherence_time_ps = 10.0;

  void validate() const {
    if (!(baseline_rate_hz >= 0)) throw OutOfRange("baseline_rate_hz must be >= 0");
    if (!(hom_visibility >= 0 && hom_visibility <= 1)) throw OutOfRange("hom_visibility must lie in [0, 1]");
    if (!(coherence_time_ps > 0)) throw OutOfRange("coherence_time_ps must be > 0");
  }
};

inline double hom_coincidence_rate(const HomDipModel& m, double delay_ps) {
  double x = delay_ps / m.coherence_time_ps;
  return m.baseline_rate_hz * (1.0 - m.hom_visibility * std::exp(-x * x));
}

}  // namespace qnet::photonics
