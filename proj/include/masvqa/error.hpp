#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace masvqa {

enum class ErrorCode {
  kBadMagic,
  kHeaderCorrupt,
  kShapeMismatch,
  kNonFiniteTensor,
  kInvalidArgument,
  kEmptyGroup,
  kNonPositiveTemperature,
  kOutOfRange,
  kUnsortedInput,
  kIo,
  kParse,
  kMissingDump,
  kDuplicateSample,
  kUnknownSampleId,
  kTimeout,
  kHttpStatus,
  kMalformedResponse,
  kTransport,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// All library failures are reported through this type; `code()` identifies
// the failure class so callers can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace masvqa
