#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "qnet/core/error.hpp"

namespace qnet::calibration {

struct ClockModel {
  double oscillator_jitter_fs = 700;
  double distribution_jitter_ps = 1.9;
  double clock_rate_hz = 200e6;
  double clock_power_mw = 0;
};

inline constexpr double kDefaultJitterBudgetPs = 5.0;

/// Root-sum-square of the oscillator, distribution, and any extra jitters.
inline double clock_jitter_budget(const ClockModel& clock, const std::vector<double>& extra_ps = {}) {
  double acc = 0;
  auto add = [&](double j) {
    if (!(j >= 0)) throw PreconditionViolation("jitter components must be >= 0");
    acc += j * j;
  };
  add(clock.oscillator_jitter_fs / 1000.0);
  add(clock.distribution_jitter_ps);
  for (double j : extra_ps) add(j);
  return std::sqrt(acc);
}

inline double rss_ps(const std::vector<double>& components) {
  return clock_jitter_budget(ClockModel{0, 0, 0, 0}, components);
}

inline bool within_jitter_budget(double total_ps, double budget_ps = kDefaultJitterBudgetPs) {
  return total_ps <= budget_ps;
}

/// Inputs a teleportation/swap fidelity estimator may use.
struct QualityInputs {
  double hom_visibility = 0;
  double alignment_residual = 0;
  double clock_jitter_ps = 0;
};

using FidelityEstimator = std::function<double(const QualityInputs&)>;

/// Repository default, not a derived physical formula: F = (1 + V_HOM) / 2.
inline FidelityEstimator default_fidelity_estimator() {
  return [](const QualityInputs& q) { return 0.5 * (1.0 + q.hom_visibility); };
}

}  // namespace qnet::calibration
