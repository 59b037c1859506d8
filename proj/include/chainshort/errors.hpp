#pragma once

#include <stdexcept>
#include <string>

namespace chainshort {

/// Failure categories surfaced by the library. Each maps to one contract
/// violation class; callers match on code() rather than message text.
enum class Errc {
  invalid_argument,
  forward_violation,
  unknown_node,
  missing_annotation,
  empty_corpus,
  invalid_budget,
  parse_error,
  environment_error,
  provider_error,
  script_underflow,
  synthesis_error,
  index_error,
  configuration_error,
  io_error,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::forward_violation: return "forward-violation";
    case Errc::unknown_node: return "unknown-node";
    case Errc::missing_annotation: return "missing-annotation";
    case Errc::empty_corpus: return "empty-corpus";
    case Errc::invalid_budget: return "invalid-budget";
    case Errc::parse_error: return "parse-error";
    case Errc::environment_error: return "environment-error";
    case Errc::provider_error: return "provider-error";
    case Errc::script_underflow: return "script-underflow";
    case Errc::synthesis_error: return "synthesis-error";
    case Errc::index_error: return "index-error";
    case Errc::configuration_error: return "configuration-error";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace chainshort
