#pragma once

// Physical-layer parameters of a run and the models the control plane
// derives from established lightpaths: per-arm channel models (with Raman
// noise from the co-propagating sync light) and the two-stage path check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "qnet/calibration/clock.hpp"
#include "qnet/calibration/polarization.hpp"
#include "qnet/control/paths.hpp"
#include "qnet/photonics/model.hpp"

namespace qnet::control {

struct PhysicalParams {
  photonics::EpsModel eps;
  double filter_bw_ghz = 100.0;
  double coincidence_window_s = 0.5e-9;
  photonics::RamanCoefficients raman;
  double sync_power_mw = 1.0;         // launch power of the sync light
  double probe_power_mw = 1.0;        // stage-1 classical probe
  double probe_rel_noise = 0.01;      // relative power-meter noise (1 sigma)
  double verify_integration_s = 1.0;  // per stage-2 measurement (light on, light off)
  double drift_rate_rad_per_s = 0.0;  // polarization random walk per fiber
  double alignment_step_s = 0.5;      // virtual time per alignment pass
  double timebin_separation_ps = 800.0;
  double timebin_jitter_ps = 25.0;
  double interferometer_scan_s = 1.0;
  int delay_search_halfwidth_clk = 4;
  photonics::HomDipModel hom;
  double hom_counts_per_point = 1e4;
  calibration::ClockModel clock;
  double clock_budget_ps = calibration::kDefaultJitterBudgetPs;
};

/// Links (and their summed length) shared by two lightpaths.
inline double shared_length_km(const NetworkGraph& g, const Lightpath& a, const Lightpath& b,
                               double* mean_classical_att = nullptr, topology::Band classical_band = topology::Band::CBand) {
  double len = 0, weighted = 0;
  for (const auto& x : a.path.links)
    for (const auto& y : b.path.links)
      if (x == y) {
        const auto& l = g.link(x);
        len += l.length_km;
        weighted += l.length_km * l.attenuation(classical_band).value_or(0.2);
      }
  if (mean_classical_att) *mean_classical_att = len > 0 ? weighted / len : 0.2;
  return len;
}

/// Channel model of one EPS arm. Raman noise comes from the sync light over
/// the links the two lightpaths share; the shared stretch is treated as one
/// span with the length-weighted classical attenuation.
inline photonics::ChannelModel arm_channel(const NetworkGraph& g, const Lightpath& quantum, const Lightpath& sync,
                                           const PhysicalParams& p, double detector_efficiency, double dark_rate_hz) {
  auto ch = photonics::ChannelModel::from_loss(quantum.total_loss);
  ch.detector_efficiency = detector_efficiency;
  ch.dark_rate_hz = dark_rate_hz;
  ch.filter_bw_ghz = p.filter_bw_ghz;
  ch.coincidence_window_s = p.coincidence_window_s;
  double att = 0.2;
  ch.fiber_length_km = shared_length_km(g, quantum, sync, &att, sync.channel.band);
  ch.classical_attenuation_db_per_km = att;
  if (ch.fiber_length_km > 0) {
    ch.classical_power_mw = p.sync_power_mw;
    ch.raman_coeff = p.raman.for_side(photonics::raman_side(quantum.channel.center_nm, sync.channel.center_nm));
  }
  return ch;
}

struct VerificationMeasurement {
  double probe_sent_mw = 0;
  double probe_received_mw = 0;
  double clicks = 0;        // counts with quantum light on
  double noise_counts = 0;  // counts with quantum light off
  double integration_s = 1;
  double probe_rel_uncertainty = 0;  // power-meter relative error (1 sigma)
};

struct VerificationResult {
  double loss_estimate_db = 0;
  double expected_click_rate = 0;  // R * eta, eta from the probe loss and detector efficiency
  double click_rate = 0;
  double noise_rate = 0;
  double noise_ratio = 0;
  double signal_sigma = 0;  // |signal - expected| in Poisson standard deviations
  bool pass = false;
  std::string reason;
};

inline Json to_json(const VerificationResult& r) {
  Json j;
  j["loss_estimate_db"] = r.loss_estimate_db;
  j["expected_click_rate_hz"] = r.expected_click_rate;
  j["click_rate_hz"] = r.click_rate;
  j["noise_rate_hz"] = r.noise_rate;
  j["noise_ratio"] = r.noise_ratio;
  j["signal_sigma"] = r.signal_sigma;
  j["pass"] = r.pass;
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

/// Stage 1 turns the probe power ratio into a loss; stage 2 passes iff
/// noise/clicks < threshold and the background-subtracted click count lies
/// within 3 sigma of R*eta*T. sigma combines the Poisson spread of the on and
/// off counts with the power-meter error carried into R*eta*T.
inline VerificationResult verify_path(const VerificationMeasurement& m, double pair_rate_hz, double detector_efficiency,
                                      double threshold = 1.0 / 6.0) {
  if (!(m.integration_s > 0)) throw PreconditionViolation("integration time must be > 0");
  if (!(m.probe_sent_mw > 0)) throw PreconditionViolation("probe power must be > 0");
  VerificationResult r;
  if (!(m.probe_received_mw > 0)) {
    r.loss_estimate_db = std::numeric_limits<double>::infinity();
    r.reason = "no probe light received";
    return r;
  }
  r.loss_estimate_db = 10 * std::log10(m.probe_sent_mw / m.probe_received_mw);
  double eta = std::pow(10.0, -r.loss_estimate_db / 10) * detector_efficiency;
  r.expected_click_rate = pair_rate_hz * eta;
  r.click_rate = m.clicks / m.integration_s;
  r.noise_rate = m.noise_counts / m.integration_s;
  r.noise_ratio = m.clicks > 0 ? m.noise_counts / m.clicks : std::numeric_limits<double>::infinity();
  double expected = r.expected_click_rate * m.integration_s;
  double meter = expected * m.probe_rel_uncertainty;
  double sigma = std::sqrt(std::max(m.clicks + m.noise_counts + meter * meter, 1.0));
  r.signal_sigma = std::abs(m.clicks - m.noise_counts - expected) / sigma;
  bool ratio_ok = r.noise_ratio < threshold;
  bool clicks_ok = r.signal_sigma <= 3.0;
  r.pass = ratio_ok && clicks_ok;
  if (!ratio_ok) r.reason = "noise/click ratio above threshold";
  else if (!clicks_ok) r.reason = "click rate inconsistent with R*eta";
  return r;
}

/// Simulated measurement on a lightpath whose real quantum transmittance is
/// `true_quantum_t` (the probe sees `true_probe_t`).
template <class Rng>
VerificationMeasurement simulate_verification(Rng& rng, const PhysicalParams& p, double true_probe_t,
                                              double true_quantum_t, double detector_efficiency, double noise_rate_hz) {
  VerificationMeasurement m;
  m.integration_s = p.verify_integration_s;
  m.probe_sent_mw = p.probe_power_mw;
  m.probe_rel_uncertainty = p.probe_rel_noise;
  std::normal_distribution<double> meter(1.0, p.probe_rel_noise);
  m.probe_received_mw = std::max(0.0, p.probe_power_mw * true_probe_t * meter(rng));
  auto poisson = [&](double mean) {
    return static_cast<double>(std::poisson_distribution<long long>(std::max(mean, 1e-12))(rng));
  };
  double signal = p.eps.pair_rate_hz * true_quantum_t * detector_efficiency;
  m.clicks = poisson((signal + noise_rate_hz) * m.integration_s);
  m.noise_counts = poisson(noise_rate_hz * m.integration_s);
  return m;
}

/// Contrast left after one receiver's basis misalignment: a wrong-port
/// probability r turns a fringe of contrast V into V(1 - 2r).
inline double alignment_contrast(double residual_infidelity) {
  return std::clamp(1.0 - 2.0 * residual_infidelity, 0.0, 1.0);
}

}  // namespace qnet::control
