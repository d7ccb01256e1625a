#pragma once

#include <stdexcept>
#include <string>

namespace qdml {

// Every failure raised by the library carries one of these codes. The C API
// maps them one-to-one onto qdml_status values.
enum class ErrorCode {
  kInvalidArgument = 1,  // malformed input: dimension mismatch, bad ids
  kConfig = 2,           // hyperparameter / configuration constraint violated
  kDegenerate = 3,       // dataset cannot supply a required candidate pool
  kIo = 4,               // file could not be opened or written
  kParse = 5,            // file content does not follow its grammar
  kNonFinite = 6,        // loss or parameters became NaN/Inf during training
};

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

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace qdml
