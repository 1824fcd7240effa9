#pragma once

// Calibration of the Raman coefficient from observed CAR or visibility, and
// the sweeps built on top of a calibrated setup.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qnet/core/error.hpp"
#include "qnet/photonics/model.hpp"

namespace qnet::photonics {

/// A pair source and its two arms. Arms flagged `classical_*` carry the
/// co-propagating classical light and therefore Raman noise.
struct PairSetup {
  EpsModel eps;
  ChannelModel arm1;
  ChannelModel arm2;
  bool classical_arm1 = false;
  bool classical_arm2 = true;

  PhotonStatistics predict(double raman_coeff, double power_mw) const {
    ChannelModel a = arm1, b = arm2;
    if (classical_arm1) {
      a.raman_coeff = raman_coeff;
      a.classical_power_mw = power_mw;
    }
    if (classical_arm2) {
      b.raman_coeff = raman_coeff;
      b.classical_power_mw = power_mw;
    }
    return singles_and_coincidences(eps, a, b);
  }
};

enum class ObservedMetric { Car, Visibility };

struct RamanObservation {
  double classical_power_mw = 0;
  ObservedMetric metric = ObservedMetric::Car;
  double value = 0;
};

struct RamanFit {
  double raman_coeff = 0;
  double rms_residual = 0;
  std::size_t used_observations = 0;
};

inline double predicted_metric(const PairSetup& s, const RamanObservation& o, double coeff) {
  auto st = s.predict(coeff, o.classical_power_mw);
  return o.metric == ObservedMetric::Car ? st.car : st.visibility;
}

namespace detail {

/// Coefficient at which the (strictly decreasing in coeff) prediction equals
/// the observation.
inline double solve_single(const PairSetup& s, const RamanObservation& o) {
  double at_zero = predicted_metric(s, o, 0.0);
  if (!(o.value > 0)) throw NoFeasibleFit("observed metric must be positive");
  if (o.value > at_zero * (1 + 1e-12))
    throw NoFeasibleFit("observed value " + std::to_string(o.value) + " exceeds the zero-noise prediction " +
                        std::to_string(at_zero));
  if (o.value >= at_zero) return 0.0;
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (predicted_metric(s, o, hi) > o.value) {
    lo = hi;
    hi *= 2;
    if (++guard > 2000) throw NoFeasibleFit("no coefficient reaches the observed value");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    (predicted_metric(s, o, mid) > o.value ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Least-squares Raman coefficient for the setup. Observations taken without
/// classical light carry no information about the coefficient and are
/// ignored; if nothing else remains the fit is infeasible. One informative
/// observation is matched exactly.
inline RamanFit calibrate_raman(const std::vector<RamanObservation>& observations, const PairSetup& setup) {
  if (observations.empty()) throw NoFeasibleFit("no observations");
  if (!setup.classical_arm1 && !setup.classical_arm2)
    throw NoFeasibleFit("neither arm carries classical light");
  std::vector<RamanObservation> used;
  std::vector<double> single;
  for (const auto& o : observations) {
    if (o.classical_power_mw <= 0) continue;
    used.push_back(o);
    single.push_back(detail::solve_single(setup, o));
  }
  if (used.empty()) throw NoFeasibleFit("every observation is at zero classical power; coefficient unconstrained");

  auto sse = [&](double c) {
    double acc = 0;
    for (const auto& o : used) {
      double r = (predicted_metric(setup, o, c) - o.value) / o.value;
      acc += r * r;
    }
    return acc;
  };

  // The minimizer lies between the individually exact solutions.
  double lo = *std::min_element(single.begin(), single.end());
  double hi = *std::max_element(single.begin(), single.end());
  double best = lo;
  if (hi > lo) {
    constexpr int kGrid = 400;
    double best_val = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i <= kGrid; ++i) {
      double c = lo + (hi - lo) * i / kGrid;
      double v = sse(c);
      if (v < best_val) {
        best_val = v;
        best_i = i;
      }
    }
    double a = lo + (hi - lo) * std::max(0, best_i - 1) / kGrid;
    double b = lo + (hi - lo) * std::min(kGrid, best_i + 1) / kGrid;
    const double g = (std::sqrt(5.0) - 1) / 2;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = sse(x1), f2 = sse(x2);
    for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(b)); ++it) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - g * (b - a);
        f1 = sse(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + g * (b - a);
        f2 = sse(x2);
      }
    }
    best = 0.5 * (a + b);
  }
  RamanFit fit;
  fit.raman_coeff = best;
  fit.used_observations = used.size();
  fit.rms_residual = std::sqrt(sse(best) / static_cast<double>(used.size()));
  return fit;
}

/// Pair rate on the high-rate branch (beyond the CAR maximum) at which the
/// noise-free CAR of the setup equals `target_car`.
inline double solve_pair_rate_for_car(const PairSetup& setup, double target_car) {
  auto car_at = [&](double r) {
    PairSetup s = setup;
    s.eps.pair_rate_hz = r;
    return s.predict(0.0, 0.0).car;
  };
  double d1 = setup.arm1.detected_transmittance(), d2 = setup.arm2.detected_transmittance();
  double peak = std::sqrt(std::max(setup.arm1.dark_rate_hz, 1e-30) * std::max(setup.arm2.dark_rate_hz, 1e-30) /
                          (d1 * d2));
  if (car_at(peak) < target_car) throw NoFeasibleFit("target CAR exceeds the setup's maximum");
  double lo = peak, hi = peak * 2;
  while (car_at(hi) > target_car) {
    lo = hi;
    hi *= 2;
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (car_at(mid) > target_car ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct SweepPoint {
  double power_dbm = 0;
  double power_mw = 0;
  PhotonStatistics stats;
  BellClass bell = BellClass::Classical;
};

inline std::vector<SweepPoint> sweep_power_dbm(const PairSetup& setup, double raman_coeff,
                                               const std::vector<double>& powers_dbm) {
  std::vector<SweepPoint> out;
  for (double dbm : powers_dbm) {
    SweepPoint p;
    p.power_dbm = dbm;
    p.power_mw = dbm_to_mw(dbm);
    p.stats = setup.predict(raman_coeff, p.power_mw);
    p.bell = classify_nonclassical(p.stats.visibility);
    out.push_back(p);
  }
  return out;
}

/// Classical power at which visibility falls to 1/sqrt(2). Visibility is
/// strictly decreasing in power, so the crossing is unique.
inline double nonclassical_limit_mw(const PairSetup& setup, double raman_coeff) {
  auto v = [&](double p) { return setup.predict(raman_coeff, p).visibility; };
  if (v(0.0) <= kNonClassicalVisibility) return 0.0;
  if (raman_coeff <= 0) return std::numeric_limits<double>::infinity();
  double lo = 0, hi = 1;
  while (v(hi) > kNonClassicalVisibility) {
    lo = hi;
    hi *= 2;
    if (hi > 1e12) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (v(mid) > kNonClassicalVisibility ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace qnet::photonics
