#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace textmask {

// Base for every error raised by the library. The CLI maps the concrete
// subclass onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Input violated a type invariant or a codec contract.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad configuration value or flag combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Strict parsers reject any deviation from the grammar; lenient parsers repair
// what they can and report each repair as a diagnostic.
enum class ParseMode { kStrict, kLenient };

enum class Severity { kWarning, kError };

const char* to_string(Severity s);

struct Diagnostic {
  Severity severity = Severity::kWarning;
  std::string rule;
  std::size_t offset = 0;  // byte offset into the text handed to the parser
  std::string message;
};

using Diagnostics = std::vector<Diagnostic>;

// Raised by strict-mode parsers. Carries the grammar rule that failed and the
// byte offset at which it failed.
class ParseError : public ValidationError {
 public:
  ParseError(std::string rule, std::size_t offset, const std::string& message);

  const std::string& rule() const { return rule_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string rule_;
  std::size_t offset_;
};

// Shifts every diagnostic offset by `base`; used when a payload parsed in
// isolation is embedded in a larger text.
void rebase(Diagnostics& diags, std::size_t base);

}  // namespace textmask
