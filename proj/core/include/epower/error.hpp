#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epower {

enum class ErrorKind {
  config,             // invalid spec, manifest, or argument
  format,             // unparseable input text
  unit,               // wrong physical unit in a telemetry record
  ordering,           // non-increasing or duplicate timestamps
  schema,             // unrecognized schema version
  dimension,          // operand shape mismatch
  overflow,           // integer accounting overflow
  ambiguity,          // duplicate key where uniqueness is required
  source,             // telemetry source failure
  backend,            // GEMM backend launch or protocol failure
  resource,           // allocation / filesystem failure
  insufficient_data,  // too few samples to reduce
  no_input,           // empty input set
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for a failure of the given kind:
/// 2 configuration, 3 source/backend, 4 insufficient data.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

}  // namespace epower
