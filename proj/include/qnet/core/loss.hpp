#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>

namespace qnet {

/// Optical loss in decibels, stored as an integer count of micro-dB.
///
/// Path metrics are sums of per-hop losses and the router sorts and compares
/// them; a fixed-point representation keeps those sums exactly associative so
/// that splitting a path at any node gives parts that add back to the whole.
class Loss {
 public:
  constexpr Loss() = default;

  static Loss from_db(double db) {
    return Loss(static_cast<std::int64_t>(std::llround(db * kMicroPerDb)));
  }
  static constexpr Loss from_micro_db(std::int64_t micro) { return Loss(micro); }
  static constexpr Loss zero() { return Loss(0); }
  static constexpr Loss unbounded() {
    return Loss(std::numeric_limits<std::int64_t>::max());
  }

  constexpr std::int64_t micro_db() const { return micro_; }
  constexpr double db() const { return static_cast<double>(micro_) / kMicroPerDb; }
  constexpr bool is_unbounded() const { return micro_ == unbounded().micro_; }

  /// Power transmittance, 10^(-dB/10).
  double transmittance() const { return std::pow(10.0, -db() / 10.0); }

  constexpr Loss& operator+=(Loss other) {
    micro_ += other.micro_;
    return *this;
  }
  friend constexpr Loss operator+(Loss a, Loss b) { return a += b; }
  friend constexpr Loss operator-(Loss a, Loss b) { return Loss(a.micro_ - b.micro_); }
  friend constexpr auto operator<=>(Loss, Loss) = default;

  friend std::ostream& operator<<(std::ostream& os, Loss l) { return os << l.db() << " dB"; }

 private:
  static constexpr double kMicroPerDb = 1e6;
  constexpr explicit Loss(std::int64_t micro) : micro_(micro) {}
  std::int64_t micro_ = 0;
};

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

}  // namespace qnet
