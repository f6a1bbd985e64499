#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "silica/ast.hpp"
#include "silica/diagnostics.hpp"

namespace silica {

// Program-scoped declaration table (the calculus' ambient def/tdef).
// Holds a desugared copy of the program.
class Decls {
 public:
  Decls() = default;
  explicit Decls(Program desugared);

  const Program& program() const { return prog_; }
  const ContractDecl* contract(const std::string& name) const;
  const InterfaceDecl* interface(const std::string& name) const;
  bool exists(const std::string& name) const { return contract(name) || interface(name); }
  const std::vector<GenericParam>* generics_of(const std::string& name) const;
  const std::vector<StateDecl>* states_of(const std::string& name) const;
  std::vector<std::string> state_names(const std::string& name) const;
  bool state_is_asset(const std::string& decl, const std::string& state) const;

 private:
  Program prog_;
};

struct Classification {
  bool is_asset = false;
  bool maybe_owned = false;
  bool disposable = false;
  bool non_asset() const { return !is_asset; }
  bool not_owned() const { return !maybe_owned; }
  bool non_disposable() const { return !disposable; }
};

struct SplitDemand {
  std::optional<Type> expected;  // nullopt: transfer all
  static SplitDemand transfer_all() { return {}; }
  static SplitDemand satisfy(Type t) { return {std::move(t)}; }
};

struct SplitResult {
  Type taken;
  Type residual;
};

struct FuncArgResult {
  Type caller_after;
  Type residual;
};

enum class FieldSelector { State, Union, Intersect, Contract };

// Judgments over a fixed declaration table and generic context.
class Judgments {
 public:
  Judgments(const Decls& decls, GenericContext gamma) : decls_(decls), gamma_(std::move(gamma)) {}

  const Decls& decls() const { return decls_; }
  const GenericContext& gamma() const { return gamma_; }

  const GenericParam* perm_param(const std::string& p) const;
  const GenericParam* decl_param(const std::string& x) const;

  bool subpermission(const Mode& m1, const Mode& m2) const;
  bool subtype(const Type& t1, const Type& t2) const;
  bool same_ownership(const Type& t1, const Type& t2) const;
  Mode bound_perm(const Mode& m) const;
  Type bound(const Type& t) const;

  std::vector<std::string> possible_states(const Type& t) const;
  bool is_asset(const Type& t) const;
  bool maybe_owned(const Type& t) const;
  bool disposable(const Type& t) const;
  Classification classify(const Type& t) const;

  SplitResult split(const Type& t, const SplitDemand& d) const;  // SPL001

  // Field tables over the contract of `t` (substituted with its arguments).
  std::vector<FieldDecl> state_fields(const ContractRef& c, const std::string& state) const;
  std::vector<FieldDecl> fields_of(const Type& t, FieldSelector sel, const std::string& state = {}) const;
  std::optional<FieldDecl> intersect_field(const Type& t, const std::string& f) const;

  // Mode join; nullopt where the join is undefined.
  std::optional<Type> join(const Type& t1, const Type& t2) const;
  TypingContext merge(const TypingContext& d1, const TypingContext& d2) const;  // MRG001/MRG002

  FuncArgResult func_arg(const Type& passed, const Mode& declared_in, const Mode& declared_out) const;

  // Implemented interface of a concrete contract instantiation, substituted.
  std::optional<ContractRef> implemented_interface(const ContractRef& c) const;

  void check_subs_ok(const Type& arg, const GenericParam& param, const SourceSpan& span) const;  // GEN004
  void check_type_args(const std::vector<GenericParam>& params, const std::vector<Type>& args,
                       const SourceSpan& span) const;  // GEN003/GEN004

  // Convert a permission to the coarse permission used by dynamic checks.
  static Permission to_permission(const Mode& m);

 private:
  const Decls& decls_;
  GenericContext gamma_;
  std::vector<std::string> possible_states_of_mode(const ContractRef& c, const Mode& m, int depth) const;
};

// Substitution [D<T>/X][T_ST/p], applied sequentially left to right.
Type subst_type(const Type& t, const std::vector<GenericParam>& params, const std::vector<Type>& args);
Mode subst_mode(const Mode& m, const std::vector<GenericParam>& params, const std::vector<Type>& args);
ContractRef subst_contract(const ContractRef& c, const std::vector<GenericParam>& params,
                           const std::vector<Type>& args);
TransactionSig subst_sig(const TransactionSig& s, const std::vector<GenericParam>& params,
                         const std::vector<Type>& args);
ExprPtr subst_expr_types(const ExprPtr& e, const std::vector<GenericParam>& params,
                         const std::vector<Type>& args);
// Capture-avoiding replacement of variable x by binding b.
ExprPtr subst_var(const ExprPtr& e, const std::string& x, const Binding& b);

struct LookedUpTransaction {
  TransactionSig sig;
  ExprPtr body;  // null for interface signatures
  ContractRef owner;
};

// transaction(Gamma, m<T_M>, D<T>): receiver head must already be bounded.
LookedUpTransaction lookup_transaction(const Judgments& j, const std::string& name,
                                       const std::vector<Type>& targs, const Type& receiver,
                                       const SourceSpan& span);

}  // namespace silica
