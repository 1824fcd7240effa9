#pragma once

#include <stdexcept>
#include <string>

namespace qnet {

/// Root of every exception thrown by the library. `code()` is a stable
/// machine-readable name that the gateway forwards in API error bodies.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define QNET_DEFINE_ERROR(Name)                                    \
  class Name : public ::qnet::Error {                              \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

// topology
QNET_DEFINE_ERROR(SchemaError);
QNET_DEFINE_ERROR(DanglingEndpoint);
QNET_DEFINE_ERROR(DuplicateId);
QNET_DEFINE_ERROR(MissingBandCoefficient);
QNET_DEFINE_ERROR(NonContiguousPath);

// rwa
QNET_DEFINE_ERROR(UnknownNode);
QNET_DEFINE_ERROR(PreconditionViolation);
QNET_DEFINE_ERROR(NotReserved);
QNET_DEFINE_ERROR(DoubleBooking);

// photonics / calibration
QNET_DEFINE_ERROR(OutOfRange);
QNET_DEFINE_ERROR(MetricEvaluationError);
QNET_DEFINE_ERROR(NoFeasibleFit);
QNET_DEFINE_ERROR(ConvergenceFailure);
QNET_DEFINE_ERROR(PeaksUnresolved);
QNET_DEFINE_ERROR(FitFailure);
QNET_DEFINE_ERROR(NotFound);

// simulation / control plane / gateway
QNET_DEFINE_ERROR(ScheduleInPast);
QNET_DEFINE_ERROR(EngineFinalized);
QNET_DEFINE_ERROR(ProtocolViolation);
QNET_DEFINE_ERROR(AuthError);
QNET_DEFINE_ERROR(VerificationMismatch);
QNET_DEFINE_ERROR(SwitchUnavailable);
QNET_DEFINE_ERROR(ProbeTimeout);
QNET_DEFINE_ERROR(CalibrationFailure);
QNET_DEFINE_ERROR(NotSupported);

#undef QNET_DEFINE_ERROR

}  // namespace qnet
