#include "masvqa/error.hpp"

namespace masvqa {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kHeaderCorrupt: return "HeaderCorrupt";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteTensor: return "NonFiniteTensor";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kNonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kUnsortedInput: return "UnsortedInput";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kMissingDump: return "MissingDump";
    case ErrorCode::kDuplicateSample: return "DuplicateSample";
    case ErrorCode::kUnknownSampleId: return "UnknownSampleId";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kHttpStatus: return "HttpStatus";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kTransport: return "Transport";
  }
  return "Unknown";
}

}  // namespace masvqa
