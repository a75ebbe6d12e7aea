#pragma once

#include <stdexcept>
#include <string>

namespace qhmm {

enum class ErrorCode {
  NonMonotoneDropout,
  DimensionMismatch,
  NonFiniteValue,
  NonPositiveScale,
  AllWeightsZero,
  RankDeficientDesign,
  NoConvergence,
  NonFiniteLikelihood,
  DegenerateFit,
  AllStartsFailed,
  LengthMismatch,
  ParseError,
  IoError,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace qhmm
