#include "silica/diagnostics.hpp"

#include <algorithm>

namespace silica {

std::string format_diagnostic(const Diagnostic& d, bool color) {
  std::string head = d.severity == Diagnostic::Severity::Error ? "ERR" : "WARN";
  if (color) head = "\x1b[31m" + head + "\x1b[0m";
  std::string file = d.span.file.empty() ? "<input>" : d.span.file;
  return head + " " + d.code + " " + file + ":" + std::to_string(d.span.line) + ":" +
         std::to_string(d.span.col) + " rule=" + (d.rule.empty() ? "-" : d.rule) + " " + d.message;
}

const std::vector<CodeInfo>& error_taxonomy() {
  static const std::vector<CodeInfo> codes = {
      {"SYN001", "unexpected token"},
      {"SYN002", "non-simple expression in argument position"},
      {"SYN003", "duplicate declaration name"},
      {"DECL001", "unknown contract or interface"},
      {"NAME001", "unbound variable"},
      {"GEN001", "unknown permission variable"},
      {"GEN002", "unknown state name"},
      {"GEN003", "type argument arity mismatch"},
      {"GEN004", "type argument violates generic bound"},
      {"GEN005", "ill-formed generic parameter bound"},
      {"SPL001", "no split satisfies the demand"},
      {"TXN001", "no such transaction"},
      {"TXN002", "argument count mismatch"},
      {"TXN003", "private transaction invoked on a receiver other than this"},
      {"TYP001", "type is not a subtype of the expected type"},
      {"FLD001", "field or state operation through a receiver other than this"},
      {"FLD002", "unknown field"},
      {"ASSET001", "owned asset dropped"},
      {"ASSET002", "overwrite of non-disposable field"},
      {"STATE001", "receiver mode below the required mode"},
      {"STATE002", "transition would drop non-disposable fields"},
      {"STATE003", "dynamic state check not applicable or ownership lost in checked block"},
      {"PACK001", "field override inconsistent with its declaration"},
      {"PUB001", "public invocation while field overrides are outstanding"},
      {"ASSERT001", "static assertion failed"},
      {"MRG001", "non-disposable binding present in one branch only"},
      {"MRG002", "branch types cannot be merged"},
      {"POST001", "transaction output inconsistent with its signature"},
      {"WF001", "interface member missing in implementing contract"},
      {"WF002", "asset state implements non-asset interface state"},
      {"WF003", "contract without states"},
      {"WF004", "duplicate field name in a state"},
      {"WF005", "asset field in a non-asset state"},
      {"INT001", "malformed machine state"},
      {"FUEL001", "step budget exhausted"},
      {"VER001", "global consistency violated after a step"},
      {"VER002", "residual expression fails to re-typecheck or is not l-stronger"},
      {"AUD001", "more than one owning alias to an asset"},
      {"AUD002", "asset ownership lost without disown"},
      {"IO001", "unreadable file"},
      {"MAN001", "malformed corpus manifest"},
  };
  return codes;
}

bool known_code(const std::string& code) {
  const auto& t = error_taxonomy();
  return std::any_of(t.begin(), t.end(), [&](const CodeInfo& c) { return code == c.code; });
}

}  // namespace silica
