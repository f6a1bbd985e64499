#pragma once

#include <optional>
#include <string>
#include <vector>

#include "silica/ast.hpp"
#include "silica/diagnostics.hpp"

namespace silica {

struct ParseResult {
  std::optional<Program> program;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return program.has_value() && diagnostics.empty(); }
};

struct ExprParseResult {
  ExprPtr expr;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return expr != nullptr && diagnostics.empty(); }
};

struct TypeParseResult {
  std::optional<Type> type;
  std::vector<Diagnostic> diagnostics;
};

ParseResult parse_program(const std::string& source, const std::string& file = "<input>");
ExprParseResult parse_expression(const std::string& source, const std::string& file = "<input>");
TypeParseResult parse_type(const std::string& source);

bool is_keyword(const std::string& word);

}  // namespace silica
