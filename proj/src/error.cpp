#include "textmask/error.hpp"

namespace textmask {

const char* to_string(Severity s) {
  return s == Severity::kError ? "error" : "warning";
}

ParseError::ParseError(std::string rule, std::size_t offset,
                       const std::string& message)
    : ValidationError(rule + " at byte " + std::to_string(offset) + ": " +
                      message),
      rule_(std::move(rule)),
      offset_(offset) {}

void rebase(Diagnostics& diags, std::size_t base) {
  for (auto& d : diags) d.offset += base;
}

}  // namespace textmask
