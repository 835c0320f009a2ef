#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace netmo {

/// Error categories raised by the engine. Every failure path maps to one of
/// these so callers (CLI, query evaluator, tests) can react by code instead
/// of parsing messages.
enum class Err {
  kMeasureOutOfRange,
  kEmptyInterval,
  kDegeneratePoints,
  kEmptyInput,
  kDegenerateEdge,
  kUnknownRoute,
  kUnknownNode,
  kUnknownRouteAtNode,
  kNoPath,
  kNoNearbyRoute,
  kUndefinedAtTime,
  kQuasiDisjointViolation,
  kUnitInvariantViolation,
  kTemporalOverlap,
  kContinuityViolation,
  kMalformedRow,
  kTooFewNodes,
  kSyntaxError,
  kTypeError,
  kUnknownName,
  kBadArgument,
  kIoError,
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::kMeasureOutOfRange: return "MeasureOutOfRange";
    case Err::kEmptyInterval: return "EmptyInterval";
    case Err::kDegeneratePoints: return "DegeneratePoints";
    case Err::kEmptyInput: return "EmptyInput";
    case Err::kDegenerateEdge: return "DegenerateEdge";
    case Err::kUnknownRoute: return "UnknownRoute";
    case Err::kUnknownNode: return "UnknownNode";
    case Err::kUnknownRouteAtNode: return "UnknownRouteAtNode";
    case Err::kNoPath: return "NoPath";
    case Err::kNoNearbyRoute: return "NoNearbyRoute";
    case Err::kUndefinedAtTime: return "UndefinedAtTime";
    case Err::kQuasiDisjointViolation: return "QuasiDisjointViolation";
    case Err::kUnitInvariantViolation: return "UnitInvariantViolation";
    case Err::kTemporalOverlap: return "TemporalOverlap";
    case Err::kContinuityViolation: return "ContinuityViolation";
    case Err::kMalformedRow: return "MalformedRow";
    case Err::kTooFewNodes: return "TooFewNodes";
    case Err::kSyntaxError: return "SyntaxError";
    case Err::kTypeError: return "TypeError";
    case Err::kUnknownName: return "UnknownName";
    case Err::kBadArgument: return "BadArgument";
    case Err::kIoError: return "IoError";
  }
  return "Unknown";
}

class EngineError : public std::runtime_error {
 public:
  EngineError(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& what) {
  throw EngineError(code, what);
}

/// Distance tolerances shared across the engine, configurable at network
/// construction.
struct Tolerances {
  double eps_measure = 1e-9;  ///< measure equality, meters
  double eps_side = 1e-9;     ///< on-line test for the side sign, meters
  double snap = 0.01;         ///< endpoint merge distance, meters
};

using TimestampMs = std::int64_t;  ///< milliseconds since Unix epoch, UTC

}  // namespace netmo
