#include "infsamp/error.hpp"

namespace infsamp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::parse: return "parse";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace infsamp
