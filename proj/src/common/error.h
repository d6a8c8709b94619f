#ifndef LADPROTO_COMMON_ERROR_H_
#define LADPROTO_COMMON_ERROR_H_

#include <stdexcept>
#include <string>

namespace ladproto {

// Broad failure classes. The C API and the CLI map these onto status codes
// and process exit codes (see ladproto.h).
enum class ErrorKind {
  kConfig,         // bad configuration or geometry
  kParse,          // malformed input document
  kValidation,     // structurally invalid data (cycles, dangling ids)
  kLookup,         // unknown identifier
  kAmbiguity,      // query on a multi-path taxonomy node
  kInfeasible,     // not enough classes/examples to satisfy a request
  kUndefined,      // metric undefined for the given input
  kShape,          // tensor geometry mismatch
  kState,          // API called in the wrong state
  kNumeric,        // non-finite values
  kIo,             // filesystem / format errors
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ladproto

#endif  // LADPROTO_COMMON_ERROR_H_
