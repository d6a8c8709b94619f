#include "common/error.h"

namespace ladproto {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kLookup: return "lookup error";
    case ErrorKind::kAmbiguity: return "ambiguity error";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kUndefined: return "undefined metric";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kState: return "state error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

}  // namespace ladproto
