#include "pfrs/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace pfrs {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNoAdmissiblePlacement: return "NoAdmissiblePlacement";
    case ErrorCode::kSeedExhausted: return "SeedExhausted";
    case ErrorCode::kUnsupportedDimension: return "UnsupportedDimension";
    case ErrorCode::kOverlappingSupports: return "OverlappingSupports";
    case ErrorCode::kStepTooLarge: return "StepTooLarge";
    case ErrorCode::kNewtonDiverged: return "NewtonDiverged";
    case ErrorCode::kOutOfDomain: return "OutOfDomain";
    case ErrorCode::kDeltaTooLarge: return "DeltaTooLarge";
    case ErrorCode::kMissingDerivative: return "MissingDerivative";
    case ErrorCode::kUnresolvableRadius: return "UnresolvableRadius";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kSolverStalled: return "SolverStalled";
    case ErrorCode::kCflViolation: return "CFLViolation";
    case ErrorCode::kCollisionDetected: return "CollisionDetected";
    case ErrorCode::kUsageError: return "UsageError";
    case ErrorCode::kCaseFailure: return "CaseFailure";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

int resolve_threads(int requested) {
  if (const char* env = std::getenv("PFRS_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return requested > 0 ? requested : 1;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pfrs
