#pragma once

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfrs {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// hess[i](j, k) = d^2 F_i / dx_j dx_k
using Hessian = std::array<Mat3, 3>;

/// One array per velocity component, each living on that component's faces.
using FaceArrays = std::array<std::vector<double>, 3>;

enum class ErrorCode {
  kInvalidArgument,
  kNoAdmissiblePlacement,
  kSeedExhausted,
  kUnsupportedDimension,
  kOverlappingSupports,
  kStepTooLarge,
  kNewtonDiverged,
  kOutOfDomain,
  kDeltaTooLarge,
  kMissingDerivative,
  kUnresolvableRadius,
  kShapeMismatch,
  kSolverStalled,
  kCflViolation,
  kCollisionDetected,
  kUsageError,
  kCaseFailure,
  kIoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline constexpr double kPi = 3.14159265358979323846;

/// Stable 64-bit FNV-1a, used for config hashes that must not change between runs.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t value);

/// Worker count: PFRS_THREADS if set, else `requested`, else 1.
int resolve_threads(int requested);

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Rethrows the first exception.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace pfrs
