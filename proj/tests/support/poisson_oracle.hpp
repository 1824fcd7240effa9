#pragma once

// Point-process oracle for accidental coincidences: two independent Poisson
// click streams, each arm-1 click opens a window of width tau centred on it,
// and every arm-2 click inside that window is one accidental coincidence.

#include <cstdint>
#include <deque>
#include <random>

namespace qnet::testing {

struct AccidentalEstimate {
  double rate_hz = 0;
  std::uint64_t coincidences = 0;
  std::uint64_t windows = 0;
};

/// Simulates arm-1 clicks over a span holding `n_windows` of them on average
/// and returns the observed accidental rate. Both streams are generated
/// lazily so memory stays constant.
inline AccidentalEstimate simulate_accidentals(double s1, double s2, double tau, std::uint64_t n_windows,
                                               std::uint64_t seed) {
  std::mt19937_64 rng_a(seed), rng_b(seed ^ 0x5bd1e995ULL);
  std::exponential_distribution<double> gap_a(s1), gap_b(s2);
  double span = static_cast<double>(n_windows) / s1;
  std::deque<double> live;  // arm-2 clicks that can still fall in a window
  double next_b = -tau + gap_b(rng_b);  // arm 2 starts early so edge windows are complete
  AccidentalEstimate est;
  for (double t = gap_a(rng_a); t < span; t += gap_a(rng_a)) {
    ++est.windows;
    while (next_b < t + tau / 2) {
      live.push_back(next_b);
      next_b += gap_b(rng_b);
    }
    while (!live.empty() && live.front() <= t - tau / 2) live.pop_front();
    est.coincidences += live.size();
  }
  est.rate_hz = static_cast<double>(est.coincidences) / span;
  return est;
}

}  // namespace qnet::testing
