#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "silica/ast.hpp"

namespace silica {

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string code;
  SourceSpan span;
  std::string rule;
  std::string message;
};

// `ERR <CODE> <file>:<line>:<col> rule=<RuleName> <message>`
std::string format_diagnostic(const Diagnostic& d, bool color = false);

struct CodeInfo {
  const char* code;
  const char* summary;
};

const std::vector<CodeInfo>& error_taxonomy();
bool known_code(const std::string& code);

// Raised by the checker's judgments; converted to a Diagnostic at the
// transaction or program boundary.
class CheckFailure : public std::runtime_error {
 public:
  CheckFailure(std::string code, std::string rule, std::string message, SourceSpan span = {})
      : std::runtime_error(message), diag_{Diagnostic::Severity::Error, std::move(code),
                                            std::move(span), std::move(rule), std::move(message)} {}
  const Diagnostic& diagnostic() const { return diag_; }
  Diagnostic& diagnostic() { return diag_; }

 private:
  Diagnostic diag_;
};

// Malformed machine state: a bug in the interpreter, never a user error.
class InternalError : public std::runtime_error {
 public:
  explicit InternalError(const std::string& what) : std::runtime_error("INT001 " + what) {}
};

}  // namespace silica
