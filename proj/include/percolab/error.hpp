// Error codes shared by the library and mapped to CLI exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace percolab {

enum class Errc {
  bad_config,            // malformed law, window, or experiment config
  precondition_failed,   // operation preconditions not met
  no_giant,              // no unique crossing cluster at the requested level
  window_too_small,      // regularization or classification ran out of room
  routing_failed,        // no open route inside the prescribed good region
  too_large,             // exhaustive op refused above its size guard
  degenerate,            // unbounded or empty shape from a direction table
};

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::bad_config: return "BAD_CONFIG";
    case Errc::precondition_failed: return "PRECONDITION_FAILED";
    case Errc::no_giant: return "NO_GIANT";
    case Errc::window_too_small: return "WINDOW_TOO_SMALL";
    case Errc::routing_failed: return "ROUTING_FAILED";
    case Errc::too_large: return "TOO_LARGE";
    case Errc::degenerate: return "DEGENERATE";
  }
  return "UNKNOWN";
}

}  // namespace percolab
