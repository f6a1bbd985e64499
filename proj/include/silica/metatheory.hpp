#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "silica/ast.hpp"
#include "silica/checker.hpp"
#include "silica/interpreter.hpp"
#include "silica/judgments.hpp"

namespace silica {

enum class AliasSource { HeapField, IndirectRef, ContextBinding };

const char* alias_source_name(AliasSource s);

struct Alias {
  Type type;
  AliasSource source;
  std::string where;  // o3.f, l7 or o2
};

struct AliasReport {
  ObjId object = 0;
  std::vector<Alias> aliases;
};

// refTypes: field-held types (with overrides), then environment-held, then
// direct context bindings.
AliasReport ref_types(const Judgments& j, const RuntimeConfig& sigma, const TypingContext& delta, ObjId o);

// Alias compatibility closure. Heads must name the same declaration or a
// contract and the interface it implements; type arguments are ignored.
bool compatible(const Judgments& j, const Type& t1, const Type& t2, bool state_locked = false);

// ok(Sigma, Delta). When `e` is given, phi and psi must also match the
// boxes present in `e`. Returns the first violated clause.
std::optional<std::string> check_global_consistency(const Judgments& j, const RuntimeConfig& sigma,
                                                    const TypingContext& delta, const ExprPtr& e = nullptr);

// d1 <l d2: every binding of d2 is matched in d1 by a binding to the same
// referent whose type is a subtype with the same ownership.
bool l_stronger(const Judgments& j, const RuntimeConfig& sigma, const TypingContext& d1, const TypingContext& d2);

// Owning-alias counts per object at one trace point.
struct OwnershipSnapshot {
  std::size_t step = 0;
  std::string rule;
  std::optional<ObjId> disowned;  // object disowned by this step's redex
  SourceSpan span;
  std::map<ObjId, int> owners;
  std::set<ObjId> assets;
};

OwnershipSnapshot ownership_snapshot(const Judgments& j, const RuntimeConfig& sigma, const TypingContext& delta);

struct AuditFinding {
  std::string code;  // AUD001 / AUD002
  std::size_t step = 0;
  ObjId object = 0;
  std::string detail;
  SourceSpan span;
};

std::vector<AuditFinding> audit_ownership(const std::vector<OwnershipSnapshot>& trace);

struct StepVerdict {
  std::size_t step = 0;
  std::string rule;
  std::string verdict;  // pass, VER001 or VER002
  std::string detail;
  SourceSpan span;
  bool pass() const { return verdict == "pass"; }
};

struct DisownEvent {
  std::size_t step = 0;
  ObjId object = 0;
};

struct VerifiedRun {
  EvalReport report;
  std::vector<StepVerdict> verdicts;
  std::vector<OwnershipSnapshot> ownership;
  std::vector<AuditFinding> findings;
  std::vector<DisownEvent> disowns;
  std::string halted;  // set when a verdict failed or the interpreter raised INT001
  bool ok() const;
};

// Evaluates `program`, checking every step against the preservation witness
// for its rule. Evaluation halts at the first failing verdict.
VerifiedRun verified_run(const CheckedProgram& program, std::size_t fuel, bool trace, Faults faults = {});

// `VERIFY step=<n> rule=<E-Rule> verdict=<v>`
std::string verdict_line(const StepVerdict& v);

}  // namespace silica
