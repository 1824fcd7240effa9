#pragma once

// Jones-calculus model of a receiver's polarization compensator and the
// two-signal alignment procedure (V align, then diag align).

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "qnet/core/error.hpp"

namespace qnet::calibration {

using Jones = Eigen::Matrix2cd;
using JonesVector = Eigen::Vector2cd;
using cplx = std::complex<double>;

inline JonesVector ket_h() { return JonesVector(1, 0); }
inline JonesVector ket_v() { return JonesVector(0, 1); }
inline JonesVector ket_d() { return JonesVector(1, 1) / std::sqrt(2.0); }
inline JonesVector ket_a() { return JonesVector(1, -1) / std::sqrt(2.0); }
inline JonesVector ket_diag(double phase) {
  return JonesVector(1, std::polar(1.0, phase)) / std::sqrt(2.0);
}

inline Jones rotation(double theta) {
  Jones r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

/// Linear retarder with fast axis at `theta` and retardance `gamma`.
inline Jones retarder(double theta, double gamma) {
  Jones d = Jones::Zero();
  d(0, 0) = std::polar(1.0, -gamma / 2);
  d(1, 1) = std::polar(1.0, gamma / 2);
  return rotation(theta) * d * rotation(-theta);
}

inline Jones qwp(double theta) { return retarder(theta, std::numbers::pi / 2); }
inline Jones hwp(double theta) { return retarder(theta, std::numbers::pi); }

/// Liquid-crystal retarder with its axis along H: a pure H/V relative phase.
inline Jones lcr(double phase) {
  Jones d = Jones::Identity();
  d(1, 1) = std::polar(1.0, phase);
  return d;
}

/// LCR phase is measured from the setting that cancels the H/V phase of the
/// two plates at zero angle, so an all-zero compensator is the identity up
/// to a global phase.
inline constexpr double kLcrZeroBias = std::numbers::pi / 2;

struct Compensator {
  double qwp_rad = 0;
  double hwp_rad = 0;
  double lcr_phase_rad = 0;

  Jones matrix() const { return lcr(lcr_phase_rad + kLcrZeroBias) * hwp(hwp_rad) * qwp(qwp_rad); }
};

inline double unitarity_error(const Jones& u) { return (u.adjoint() * u - Jones::Identity()).norm(); }

/// Nearest unitary (polar factor), used to remove round-off after drift steps.
inline Jones renormalize(const Jones& u) {
  Eigen::JacobiSVD<Jones> svd(u, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

/// exp(-i angle/2 n.sigma) for a unit axis n.
inline Jones su2_rotation(const Eigen::Vector3d& axis, double angle) {
  Eigen::Vector3d n = axis.normalized();
  double c = std::cos(angle / 2), s = std::sin(angle / 2);
  Jones u;
  u << cplx(c, -s * n.z()), cplx(-s * n.y(), -s * n.x()), cplx(s * n.y(), -s * n.x()), cplx(c, s * n.z());
  return u;
}

/// Haar-distributed SU(2) element (uniform unit quaternion).
template <class Rng>
Jones random_su2(Rng& rng) {
  std::normal_distribution<double> g;
  Eigen::Vector4d q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  Jones u;
  u << cplx(q[0], q[1]), cplx(q[2], q[3]), cplx(-q[2], q[3]), cplx(q[0], -q[1]);
  return u;
}

struct PolarizationChannelState {
  Jones fiber_unitary = Jones::Identity();
  Compensator compensator;
  double drift_rate = 0;  // rad/s

  Jones total() const { return compensator.matrix() * fiber_unitary; }

  /// One random-walk step: rotation by drift_rate*dt about a random axis.
  template <class Rng>
  void drift(double dt_s, Rng& rng) {
    if (drift_rate <= 0 || dt_s <= 0) return;
    std::normal_distribution<double> g;
    Eigen::Vector3d axis(g(rng), g(rng), g(rng));
    if (axis.norm() == 0) axis = Eigen::Vector3d::UnitZ();
    fiber_unitary = renormalize(su2_rotation(axis, drift_rate * dt_s) * fiber_unitary);
  }
};

enum class AlignmentKind { VAlign, DiagAlign };

struct AlignmentSignal {
  AlignmentKind kind = AlignmentKind::VAlign;
  double power = 1.0;
  double phase_eps = 0.0;

  JonesVector state() const { return kind == AlignmentKind::VAlign ? ket_v() : ket_diag(phase_eps); }
};

/// Analyzer: half-wave plate at `hwp_rad` then a PBS; `port` picks the H or V
/// output. The projector is the input state routed entirely to that port.
struct Projector {
  double hwp_rad = 0;
  bool v_port = false;

  JonesVector state() const { return hwp(hwp_rad).adjoint() * (v_port ? ket_v() : ket_h()); }
};

inline constexpr double kProjectionHwpDiag = std::numbers::pi / 8;  // 22.5 degrees

inline double singles_rate_for_projection(const AlignmentSignal& sig, const PolarizationChannelState& ch,
                                          const Projector& p) {
  cplx amp = p.state().dot(ch.total() * sig.state());
  return sig.power * std::norm(amp);
}

inline double fidelity(const JonesVector& target, const JonesVector& actual) {
  return std::norm(target.normalized().dot(actual));
}

struct AlignmentTolerance {
  double angle_tol_rad = 1e-4;   // golden-section bracket width
  double objective_tol = 1e-8;   // relative singles floor treated as extinction
  int max_sweeps = 4;
  int grid_points = 24;          // coarse scan per coordinate before refinement
  double residual_tol = 1e-3;
};

struct AlignmentReport {
  double residual_v = 1;
  double residual_diag = 1;
  double residual_infidelity = 1;  // max of the two
  int iterations = 0;              // stage-1 passes plus one for stage 2
  Compensator final_compensator;
};

namespace detail {

/// Global minimum of a periodic 1-D function over [0, period): coarse grid,
/// then golden section inside the best grid cell pair. Returns `start` if no
/// point is strictly better.
inline double minimize_periodic(const std::function<double(double)>& f, double start, double period, int grid,
                                double tol) {
  double best_x = start, best_f = f(start);
  double step = period / grid;
  for (int i = 0; i < grid; ++i) {
    double x = start + i * step;
    double v = f(x);
    if (v < best_f - 1e-15) {
      best_f = v;
      best_x = x;
    }
  }
  double a = best_x - step, b = best_x + step;
  const double g = (std::sqrt(5.0) - 1) / 2;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(x2);
    }
  }
  double x = 0.5 * (a + b);
  if (f(x) >= best_f) x = best_x;
  x = std::fmod(x, period);
  return x < 0 ? x + period : x;
}

}  // namespace detail

inline void evaluate_residuals(const PolarizationChannelState& ch, double phase_eps, AlignmentReport& r) {
  Jones t = ch.total();
  r.residual_v = 1 - fidelity(ket_v(), t * ket_v());
  r.residual_diag = 1 - fidelity(ket_d(), t * ket_diag(phase_eps));
  r.residual_infidelity = std::max(r.residual_v, r.residual_diag);
}

/// Stage 1 only: extinguish the H port under VAlign. The QWP angle is
/// searched on the profile min over HWP of the H-port singles, so every QWP
/// trial is paired with its best HWP setting. Repeated until a pass no longer
/// improves. The LCR is left untouched.
inline int align_v_stage(PolarizationChannelState& ch, const AlignmentTolerance& tol) {
  AlignmentSignal sig{AlignmentKind::VAlign, 1.0, 0.0};
  Projector h_port{0.0, false};
  auto& c = ch.compensator;
  auto at = [&](double q, double h) {
    Compensator keep = c;
    c.qwp_rad = q;
    c.hwp_rad = h;
    double v = singles_rate_for_projection(sig, ch, h_port);
    c = keep;
    return v;
  };
  auto best_h = [&](double q, double h_start) {
    return detail::minimize_periodic([&](double h) { return at(q, h); }, h_start, std::numbers::pi,
                                     tol.grid_points, tol.angle_tol_rad);
  };
  int sweeps = 0;
  double prev = at(c.qwp_rad, c.hwp_rad);
  while (sweeps < tol.max_sweeps && prev > tol.objective_tol) {
    ++sweeps;
    double q = detail::minimize_periodic([&](double q) { return at(q, best_h(q, c.hwp_rad)); }, c.qwp_rad,
                                         std::numbers::pi, tol.grid_points, tol.angle_tol_rad);
    double h = best_h(q, c.hwp_rad);
    double now = at(q, h);
    if (!(now < prev - 1e-15)) break;
    c.qwp_rad = q;
    c.hwp_rad = h;
    prev = now;
  }
  return sweeps;
}

/// Stage 2 only: with the analyzer HWP at 22.5 degrees, extinguish the port
/// that receives A under DiagAlign by scanning the LCR phase.
inline void align_diag_stage(PolarizationChannelState& ch, double phase_eps, const AlignmentTolerance& tol) {
  AlignmentSignal sig{AlignmentKind::DiagAlign, 1.0, phase_eps};
  Projector a_port{kProjectionHwpDiag, true};
  auto& c = ch.compensator;
  c.lcr_phase_rad = detail::minimize_periodic(
      [&](double phi) {
        double keep = c.lcr_phase_rad;
        c.lcr_phase_rad = phi;
        double v = singles_rate_for_projection(sig, ch, a_port);
        c.lcr_phase_rad = keep;
        return v;
      },
      c.lcr_phase_rad, 2 * std::numbers::pi, tol.grid_points, tol.angle_tol_rad);
}

/// Two-stage alignment. On success the receiver maps V to V and the source's
/// diag state to D. Throws ConvergenceFailure if either residual stays above
/// `tol.residual_tol`.
inline AlignmentReport align_polarization(PolarizationChannelState& ch, double phase_eps,
                                          const AlignmentTolerance& tol = {}) {
  AlignmentReport r;
  r.iterations = align_v_stage(ch, tol);
  align_diag_stage(ch, phase_eps, tol);
  r.iterations += 1;
  r.final_compensator = ch.compensator;
  evaluate_residuals(ch, phase_eps, r);
  if (!(r.residual_infidelity < tol.residual_tol))
    throw ConvergenceFailure("polarization residual " + std::to_string(r.residual_infidelity) + " after " +
                             std::to_string(r.iterations) + " iterations");
  return r;
}

}  // namespace qnet::calibration
