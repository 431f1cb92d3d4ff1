#pragma once

#include <stdexcept>
#include <string>

namespace gzsl {

enum class ErrorCode {
  kShape = 1,
  kIo,
  kFormat,
  kValidation,
  kTrainingDiverged,
  kUnsupported,
  kUsage,
  kDomain,
  kGeneration,
  kDegenerateTraining,
};

// Every failure surfaced by the library is an Error carrying a category, so
// the C API can translate it into a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace gzsl
