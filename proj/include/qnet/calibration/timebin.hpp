#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "qnet/core/error.hpp"

namespace qnet::calibration {

struct TimeBinFrame {
  double early_offset_ps = 0;
  double late_offset_ps = 0;
  double bin_width_ps = 0;
  double interferometer_phase_rad = 0;

  double middle_offset_ps() const { return 0.5 * (early_offset_ps + late_offset_ps); }
};

struct TimeBinConfig {
  double hist_start_ps = 0;     // time of the first histogram bin's centre
  double hist_bin_ps = 1;       // histogram resolution
  double min_separation_bins = 3;
  double min_peak_significance = 5;  // sigma above the background level
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

/// Background-subtracted centroid of the contiguous region around `peak`
/// that stays above `floor`.
inline double centroid(const std::vector<double>& h, std::size_t peak, double floor, double background,
                       std::size_t& lo, std::size_t& hi) {
  lo = peak;
  hi = peak;
  while (lo > 0 && h[lo - 1] > floor) --lo;
  while (hi + 1 < h.size() && h[hi + 1] > floor) ++hi;
  double w = 0, m = 0;
  for (std::size_t i = lo; i <= hi; ++i) {
    double c = h[i] - background;
    if (c <= 0) continue;
    w += c;
    m += c * static_cast<double>(i);
  }
  return w > 0 ? m / w : static_cast<double>(peak);
}

}  // namespace detail

/// Early and late bin offsets from a histogram holding both bursts. Which
/// burst was sent first is known from the protocol, so the earlier centroid
/// is always the early bin.
inline TimeBinFrame align_timebin(const std::vector<double>& histogram, const TimeBinConfig& cfg = {}) {
  if (histogram.size() < 3) throw PeaksUnresolved("histogram too short");
  double background = detail::median(histogram);
  double floor = background + cfg.min_peak_significance * std::sqrt(std::max(background, 1.0));

  auto first = static_cast<std::size_t>(std::max_element(histogram.begin(), histogram.end()) - histogram.begin());
  if (histogram[first] <= floor) throw PeaksUnresolved("no burst above background");
  std::size_t lo1, hi1;
  double c1 = detail::centroid(histogram, first, floor, background, lo1, hi1);

  std::size_t second = histogram.size();
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    if (i >= lo1 && i <= hi1) continue;
    if (second == histogram.size() || histogram[i] > histogram[second]) second = i;
  }
  if (second == histogram.size() || histogram[second] <= floor)
    throw PeaksUnresolved("only one burst found in the histogram");
  std::size_t lo2, hi2;
  double c2 = detail::centroid(histogram, second, floor, background, lo2, hi2);

  double sep_bins = std::abs(c2 - c1);
  if (!(sep_bins > cfg.min_separation_bins))
    throw PeaksUnresolved("bursts separated by " + std::to_string(sep_bins) + " bins");

  TimeBinFrame f;
  double t1 = cfg.hist_start_ps + c1 * cfg.hist_bin_ps;
  double t2 = cfg.hist_start_ps + c2 * cfg.hist_bin_ps;
  f.early_offset_ps = std::min(t1, t2);
  f.late_offset_ps = std::max(t1, t2);
  f.bin_width_ps = 0.5 * (f.late_offset_ps - f.early_offset_ps);  // adjacent bins touch, never overlap
  return f;
}

struct PhaseScanConfig {
  int grid_points = 36;
  double tol_rad = 1e-4;
};

/// Interferometer phase maximizing the middle-bin output `signal(phase)`,
/// searched over one period by grid scan and golden-section refinement.
inline double align_interferometer_phase(const std::function<double(double)>& signal,
                                         const PhaseScanConfig& cfg = {}) {
  const double period = 2 * std::numbers::pi;
  double best_x = 0, best_f = signal(0);
  double step = period / cfg.grid_points;
  for (int i = 1; i < cfg.grid_points; ++i) {
    double v = signal(i * step);
    if (v > best_f) {
      best_f = v;
      best_x = i * step;
    }
  }
  double a = best_x - step, b = best_x + step;
  const double g = (std::sqrt(5.0) - 1) / 2;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = signal(x1), f2 = signal(x2);
  while (b - a > cfg.tol_rad) {
    if (f1 > f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = signal(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = signal(x2);
    }
  }
  double x = std::fmod(0.5 * (a + b), period);
  return x < 0 ? x + period : x;
}

}  // namespace qnet::calibration
