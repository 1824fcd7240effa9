#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qnet/core/error.hpp"
#include "qnet/core/rng.hpp"

namespace qnet::photonics {

using CountMap = std::map<std::string, std::int64_t>;
using CountMetric = std::function<double(const CountMap&)>;

struct McResult {
  double mean = 0;
  double std = 0;
  std::size_t n_samples = 0;
};

struct McOptions {
  std::size_t n_samples = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

namespace detail {
// Samples are generated in fixed chunks with per-chunk seeds, so the values do
// not depend on how chunks are distributed over threads.
inline constexpr std::size_t kMcChunk = 1024;
}  // namespace detail

/// Resamples every count as a Poisson variate of that mean and returns the
/// mean and sample standard deviation of `metric` over the resamples.
inline McResult poisson_mc_uncertainty(const CountMap& counts, const CountMetric& metric, const McOptions& opt) {
  if (opt.n_samples < 100) throw PreconditionViolation("n_samples must be >= 100");
  for (const auto& [label, n] : counts)
    if (n < 0) throw PreconditionViolation("count '" + label + "' is negative");

  std::vector<double> values(opt.n_samples);
  std::size_t n_chunks = (opt.n_samples + detail::kMcChunk - 1) / detail::kMcChunk;
  struct ChunkError {
    std::size_t sample;
    std::string what;
  };
  std::vector<std::optional<ChunkError>> errors(n_chunks);

  auto run_chunk = [&](std::size_t c) {
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(c)));
    std::map<std::string, std::poisson_distribution<std::int64_t>> dists;
    for (const auto& [label, n] : counts) dists.emplace(label, std::poisson_distribution<std::int64_t>(n > 0 ? n : 1));
    CountMap draw = counts;
    std::size_t begin = c * detail::kMcChunk;
    std::size_t end = std::min(opt.n_samples, begin + detail::kMcChunk);
    for (std::size_t i = begin; i < end; ++i) {
      for (auto& [label, v] : draw) v = counts.at(label) > 0 ? dists.at(label)(rng) : 0;
      try {
        double m = metric(draw);
        if (!std::isfinite(m)) throw MetricEvaluationError("metric returned a non-finite value");
        values[i] = m;
      } catch (const std::exception& e) {
        errors[c] = ChunkError{i, e.what()};
        return;
      }
    }
  };

  unsigned threads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(n_chunks)));
  if (threads == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < n_chunks; c += threads) run_chunk(c);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) throw MetricEvaluationError("sample " + std::to_string(e->sample) + ": " + e->what);

  McResult r;
  r.n_samples = opt.n_samples;
  double sum = 0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return r;
}

inline McResult poisson_mc_uncertainty(const CountMap& counts, const CountMetric& metric, std::size_t n_samples,
                                       std::uint64_t seed) {
  return poisson_mc_uncertainty(counts, metric, McOptions{n_samples, seed, 1});
}

/// CAR from raw counts keyed "coincidences" and "accidentals".
inline double car_from_counts(const CountMap& c) {
  double coinc = static_cast<double>(c.at("coincidences"));
  double acc = static_cast<double>(c.at("accidentals"));
  if (acc <= 0) throw MetricEvaluationError("no accidental counts in resample");
  return coinc / acc;
}

}  // namespace qnet::photonics
