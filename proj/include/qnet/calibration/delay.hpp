#pragma once

// Electrical delay search: step through integer clock delays until a setting
// shows a coincidence excess over the accidental baseline, then confirm it
// with a fresh batch.

#include <cmath>
#include <functional>
#include <random>

#include "qnet/core/error.hpp"

namespace qnet::calibration {

/// Waiting time (s) until the next coincidence at a given delay setting.
using CoincidenceSource = std::function<double(int delay_clk)>;

struct DelaySearchConfig {
  int confirm_counts = 10;
  double sigma = 3.0;
};

struct DelaySearchResult {
  int delay_clk = 0;
  int coincidences_at_delay = 0;  // candidate batch plus verification batch
  long long total_coincidences = 0;
  double integration_s = 0;
  double verified_excess_sigma = 0;
  int settings_tried = 0;
};

/// Simulated correlation: accidentals everywhere plus true pairs at one delay.
template <class Rng>
struct SimulatedCorrelation {
  int true_delay_clk;
  double signal_rate_hz;
  double accidental_rate_hz;
  Rng* rng;

  double operator()(int delay_clk) const {
    double rate = accidental_rate_hz + (delay_clk == true_delay_clk ? signal_rate_hz : 0.0);
    return std::exponential_distribution<double>(rate)(*rng);
  }
};

namespace detail {

struct Batch {
  bool accepted = false;
  int counts = 0;
  double time_s = 0;
  double excess_sigma = 0;
};

/// Collects up to n coincidences. Accepted iff n - a*t >= sigma*max(sqrt n,
/// sqrt(a*t)); stops early once a*t exceeds the largest value that could
/// still pass.
inline Batch collect(const CoincidenceSource& src, int delay, double accidental_rate_hz, const DelaySearchConfig& cfg) {
  const double n = cfg.confirm_counts;
  const double max_mu = n - cfg.sigma * std::sqrt(n);
  Batch b;
  while (b.counts < cfg.confirm_counts) {
    double dt = src(delay);
    if (accidental_rate_hz * (b.time_s + dt) > max_mu) {
      b.time_s = max_mu / accidental_rate_hz;
      return b;
    }
    b.time_s += dt;
    ++b.counts;
  }
  double mu = accidental_rate_hz * b.time_s;
  double noise = std::max(std::sqrt(n), std::sqrt(mu));
  b.excess_sigma = (n - mu) / noise;
  b.accepted = b.excess_sigma >= cfg.sigma;
  return b;
}

}  // namespace detail

/// Scans delays lo..hi in order. NotFound when no setting passes both the
/// candidate and the verification batch.
inline DelaySearchResult find_correlation_delay(int lo, int hi, const CoincidenceSource& src, double accidental_rate_hz,
                                                const DelaySearchConfig& cfg = {}) {
  if (lo > hi) throw PreconditionViolation("empty delay range");
  if (!(accidental_rate_hz > 0)) throw PreconditionViolation("accidental baseline must be > 0");
  if (cfg.confirm_counts - cfg.sigma * std::sqrt(double(cfg.confirm_counts)) <= 0)
    throw PreconditionViolation("confirm_counts too small to reach the requested significance");
  DelaySearchResult r;
  for (int d = lo; d <= hi; ++d) {
    ++r.settings_tried;
    auto first = detail::collect(src, d, accidental_rate_hz, cfg);
    r.total_coincidences += first.counts;
    r.integration_s += first.time_s;
    if (!first.accepted) continue;
    auto verify = detail::collect(src, d, accidental_rate_hz, cfg);
    r.total_coincidences += verify.counts;
    r.integration_s += verify.time_s;
    if (!verify.accepted) continue;
    r.delay_clk = d;
    r.coincidences_at_delay = first.counts + verify.counts;
    r.verified_excess_sigma = verify.excess_sigma;
    return r;
  }
  throw NotFound("no delay in [" + std::to_string(lo) + ", " + std::to_string(hi) + "] shows correlations");
}

}  // namespace qnet::calibration
