#include "epower/error.hpp"

namespace epower {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::format: return "format";
    case ErrorKind::unit: return "unit";
    case ErrorKind::ordering: return "ordering";
    case ErrorKind::schema: return "schema";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::ambiguity: return "ambiguity";
    case ErrorKind::source: return "source";
    case ErrorKind::backend: return "backend";
    case ErrorKind::resource: return "resource";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::no_input: return "no_input";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::source:
    case ErrorKind::backend:
    case ErrorKind::resource:
      return 3;
    case ErrorKind::insufficient_data:
    case ErrorKind::no_input:
      return 4;
    default:
      return 2;
  }
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace epower
