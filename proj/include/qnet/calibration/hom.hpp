#pragma once

// HOM delay scan: Poisson counts over a delay grid and a weighted
// Levenberg-Marquardt fit of a Gaussian dip.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qnet/core/error.hpp"
#include "qnet/photonics/model.hpp"

namespace qnet::calibration {

struct HomFit {
  double baseline = 0;  // counts per point far from the dip
  double visibility = 0;
  double center_ps = 0;
  double coherence_ps = 0;
  int iterations = 0;
};

struct HomScanResult {
  double best_delay_ps = 0;
  double fitted_visibility = 0;
  HomFit fit;
  std::vector<double> counts;
};

/// Expected counts per grid point, normalized so a point far from the dip
/// collects `counts_per_point`.
inline std::vector<double> expected_hom_counts(const photonics::HomDipModel& dip, const std::vector<double>& grid,
                                               double counts_per_point) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double d : grid) out.push_back(counts_per_point * photonics::hom_coincidence_rate(dip, d) / dip.baseline_rate_hz);
  return out;
}

namespace detail {

inline double hom_model(const Eigen::Vector4d& p, double x) {
  double u = (x - p[2]) / p[3];
  return p[0] * (1 - p[1] * std::exp(-u * u));
}

inline Eigen::Vector4d hom_initial_guess(const std::vector<double>& x, const std::vector<double>& y) {
  double base = std::max(y.front(), y.back());
  auto imin = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
  double depth = base > 0 ? 1 - y[imin] / base : 0;
  double half = base * (1 - depth / 2);
  std::size_t lo = imin, hi = imin;
  while (lo > 0 && y[lo - 1] < half) --lo;
  while (hi + 1 < y.size() && y[hi + 1] < half) ++hi;
  double span = x.back() - x.front();
  double fwhm = hi > lo ? x[hi] - x[lo] : span / 10;
  double tau = std::max(fwhm / (2 * std::sqrt(std::log(2.0))), span / (10.0 * static_cast<double>(x.size())));
  return {base, std::clamp(depth, 0.0, 1.0), x[imin], tau};
}

}  // namespace detail

/// Fits B (1 - V exp(-((x - x0)/tau)^2)) to Poisson counts. FitFailure when
/// the fit does not converge, the centre falls outside the grid, or the dip is
/// not significant against the counting noise.
inline HomFit fit_hom_dip(const std::vector<double>& grid, const std::vector<double>& counts) {
  if (grid.size() != counts.size() || grid.size() < 5) throw FitFailure("need at least 5 scan points");
  if (!std::is_sorted(grid.begin(), grid.end())) throw FitFailure("delay grid must be ascending");
  const int n = static_cast<int>(grid.size());
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w[i] = 1.0 / std::sqrt(std::max(counts[i], 1.0));

  Eigen::Vector4d p = detail::hom_initial_guess(grid, counts);
  auto chi2 = [&](const Eigen::Vector4d& q) {
    double s = 0;
    for (int i = 0; i < n; ++i) {
      double r = (counts[i] - detail::hom_model(q, grid[i])) * w[i];
      s += r * r;
    }
    return s;
  };
  double lambda = 1e-3, cur = chi2(p);
  bool converged = false;
  int it = 0;
  for (; it < 500 && !converged; ++it) {
    Eigen::MatrixXd J(n, 4);
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) {
      double u = (grid[i] - p[2]) / p[3];
      double e = std::exp(-u * u);
      r[i] = (counts[i] - detail::hom_model(p, grid[i])) * w[i];
      J(i, 0) = (1 - p[1] * e) * w[i];
      J(i, 1) = -p[0] * e * w[i];
      J(i, 2) = -p[0] * p[1] * e * 2 * u / p[3] * w[i];
      J(i, 3) = -p[0] * p[1] * e * 2 * u * u / p[3] * w[i];
    }
    Eigen::Matrix4d A = J.transpose() * J;
    Eigen::Vector4d g = J.transpose() * r;
    bool stepped = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix4d M = A;
      M.diagonal() += lambda * A.diagonal().cwiseMax(1e-12);
      Eigen::Vector4d step = M.ldlt().solve(g);
      Eigen::Vector4d trial = p + step;
      trial[3] = std::abs(trial[3]);
      double next = trial.allFinite() && trial[3] > 0 ? chi2(trial) : std::numeric_limits<double>::infinity();
      if (next <= cur) {
        double rel = (cur - next) / std::max(cur, 1e-300);
        double move = (step.array().abs() / (p.array().abs() + 1e-12)).maxCoeff();
        p = trial;
        cur = next;
        lambda = std::max(lambda / 10, 1e-12);
        stepped = true;
        if (rel < 1e-12 || move < 1e-12 || cur < 1e-24) converged = true;
        break;
      }
      lambda *= 10;
    }
    if (!stepped) converged = true;  // no downhill step exists: at a minimum
  }
  if (!converged || !p.allFinite()) throw FitFailure("HOM fit did not converge");
  HomFit f{p[0], std::clamp(p[1], 0.0, 1.0), p[2], p[3], it};
  if (f.center_ps < grid.front() || f.center_ps > grid.back())
    throw FitFailure("fitted dip centre " + std::to_string(f.center_ps) + " ps lies outside the scanned grid");
  if (!(f.baseline > 0) || f.visibility < 5.0 / std::sqrt(f.baseline))
    throw FitFailure("no significant dip in the scanned grid");
  return f;
}

template <class Rng>
HomScanResult scan_hom(const photonics::HomDipModel& dip, const std::vector<double>& delay_grid,
                       double counts_per_point, Rng& rng) {
  dip.validate();
  HomScanResult r;
  for (double mean : expected_hom_counts(dip, delay_grid, counts_per_point)) {
    std::poisson_distribution<long long> pd(std::max(mean, 1e-12));
    r.counts.push_back(static_cast<double>(pd(rng)));
  }
  r.fit = fit_hom_dip(delay_grid, r.counts);
  r.best_delay_ps = r.fit.center_ps;
  r.fitted_visibility = r.fit.visibility;
  return r;
}

/// Same scan with expectation values in place of Poisson draws.
inline HomScanResult scan_hom_expected(const photonics::HomDipModel& dip, const std::vector<double>& delay_grid,
                                       double counts_per_point) {
  dip.validate();
  HomScanResult r;
  r.counts = expected_hom_counts(dip, delay_grid, counts_per_point);
  r.fit = fit_hom_dip(delay_grid, r.counts);
  r.best_delay_ps = r.fit.center_ps;
  r.fitted_visibility = r.fit.visibility;
  return r;
}

}  // namespace qnet::calibration
