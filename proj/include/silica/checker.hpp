#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "silica/ast.hpp"
#include "silica/diagnostics.hpp"
#include "silica/judgments.hpp"

namespace silica {

struct CheckResult {
  Type type;
  TypingContext out;
  ExprPtr elaborated;
};

// Caller-side view of an invocation frame, recorded when the frame is
// entered and consulted when its box is re-typed.
struct FrameStatic {
  std::vector<std::pair<Binding, Type>> caller_after;
  std::vector<std::pair<std::string, Type>> fields_after;
};
using FrameTable = std::map<const CallFrame*, FrameStatic>;

using NodeHook =
    std::function<void(const Expr* node, const TypingContext& in, const TypingContext& out, const Type& t)>;

struct CheckOptions {
  // Runtime mode: bindings may be indirect/object references; field
  // overrides are keyed by the object a receiver denotes.
  const RuntimeConfig* sigma = nullptr;
  const FrameTable* frames = nullptr;
  NodeHook on_node;
};

class Checker {
 public:
  Checker(const Decls& decls, GenericContext gamma, CheckOptions opts = {});

  // Checks `e` under `in` with receiver `self` (none for main).
  CheckResult check(const TypingContext& in, const ExprPtr& e, std::optional<Binding> self,
                    std::optional<Type> expected = std::nullopt) const;

  const Judgments& judgments() const { return j_; }

  // Canonical override key for a receiver binding.
  Binding receiver_key(const Binding& b) const;

  // PublicTransactionOK / PrivateTransactionOK; returns the elaborated
  // transaction.
  Transaction check_transaction(const ContractDecl& c, const Transaction& t) const;

 private:
  struct Scope {
    std::optional<Binding> self;
    std::optional<Binding> key;
  };
  struct Out {
    Type type;
    ExprPtr e;
  };

  Out go(TypingContext& d, const Scope& sc, const ExprPtr& e, const std::optional<Type>& expected) const;
  Out node(TypingContext& d, const Scope& sc, const ExprPtr& e, const std::optional<Type>& expected) const;

  Type lookup(const TypingContext& d, const Binding& b, const SourceSpan& sp) const;
  Type use_simple(TypingContext& d, const Binding& b, const std::optional<Type>& expected,
                  const SourceSpan& sp) const;
  void require_self(const Scope& sc, const Binding& recv, const char* rule, const SourceSpan& sp) const;
  Type declared_field(const TypingContext& d, const Scope& sc, const std::string& f, const char* rule,
                      const SourceSpan& sp) const;
  Type current_field(const TypingContext& d, const Scope& sc, const std::string& f, const char* rule,
                     const SourceSpan& sp) const;
  void set_field(TypingContext& d, const Scope& sc, const std::string& f, const Type& t) const;
  bool overrides_consistent(const TypingContext& d, const Scope& sc, std::string* bad) const;
  void coerce(const Type& actual, const Type& expected, const std::string& sub_code,
              const std::string& own_code, const std::string& rule, const std::string& what,
              const SourceSpan& sp) const;
  Mode resolve_mode_for(const Type& t, const Mode& m, const SourceSpan& sp) const;
  TypingContext merge_branches(TypingContext a, TypingContext b, const Scope& sc) const;

  Out check_invoke(TypingContext& d, const Scope& sc, const ExprPtr& e) const;
  Out check_dyn(TypingContext& d, const Scope& sc, const ExprPtr& e, const std::optional<Type>& expected) const;
  Out check_frame(TypingContext& d, const Scope& sc, const ExprPtr& e, const std::optional<Type>& expected) const;

  const Decls& decls_;
  Judgments j_;
  CheckOptions opts_;
};

// Result of whole-program checking: an elaborated declaration table
// (annotations resolved, packs inserted) and the elaborated main.
struct CheckedProgram {
  std::shared_ptr<const Decls> decls;
  ExprPtr main;
  Type main_type;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return diagnostics.empty() && decls && main; }
};

CheckedProgram check_program(const Program& parsed);

// Resolves symbolic modes and declaration variables inside a type.
Type resolve_type(const Decls& decls, const GenericContext& gamma, const Type& t, const SourceSpan& sp);
Mode resolve_mode(const Decls& decls, const GenericContext& gamma, const ContractRef& governing,
                  const Mode& m, const SourceSpan& sp);

}  // namespace silica
