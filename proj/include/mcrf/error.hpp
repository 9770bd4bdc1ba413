#pragma once

#include <stdexcept>
#include <string>

namespace mcrf {

/// Broad failure classes. The CLI maps each to a distinct exit code.
enum class ErrorCategory {
  Index,
  Argument,
  EmptyInput,
  Capacity,
  Parse,
  Data,
  Schema,
  Configuration,
  UnreliableEntry,
  NotFound,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Index: return "index";
    case ErrorCategory::Argument: return "argument";
    case ErrorCategory::EmptyInput: return "empty-input";
    case ErrorCategory::Capacity: return "capacity";
    case ErrorCategory::Parse: return "parse";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Schema: return "schema";
    case ErrorCategory::Configuration: return "configuration";
    case ErrorCategory::UnreliableEntry: return "unreliable-entry";
    case ErrorCategory::NotFound: return "not-found";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) {
  throw Error(c, what);
}

}  // namespace mcrf
