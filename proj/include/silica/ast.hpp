#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace silica {

using ObjId = std::uint32_t;
using RefId = std::uint32_t;

struct SourceSpan {
  std::string file;
  int line = 0;
  int col = 0;
  int end_line = 0;
  int end_col = 0;
};

enum class Permission { Owned, Unowned, Shared };

const char* permission_name(Permission p);

// A mode is the ownership/state component of a reference type. `Name` is
// the parser's symbolic form for a bare identifier, resolved by the checker
// into either a single-state set or a permission variable.
struct Mode {
  enum class Kind { States, Var, Perm, Name };
  Kind kind = Kind::Perm;
  std::vector<std::string> states;  // sorted, unique, nonempty for States
  std::string name;                 // Var and Name
  Permission perm = Permission::Owned;

  static Mode of_states(std::vector<std::string> names);
  static Mode state(std::string s) { return of_states({std::move(s)}); }
  static Mode var(std::string p);
  static Mode symbol(std::string n);
  static Mode of(Permission p);
  static Mode owned() { return of(Permission::Owned); }
  static Mode unowned() { return of(Permission::Unowned); }
  static Mode shared() { return of(Permission::Shared); }

  bool is_states() const { return kind == Kind::States; }
  bool is_var() const { return kind == Kind::Var; }
  bool is_perm() const { return kind == Kind::Perm; }
  bool is_perm(Permission p) const { return kind == Kind::Perm && perm == p; }

  friend bool operator==(const Mode& a, const Mode& b);
  friend bool operator<(const Mode& a, const Mode& b);
};

struct Type;

struct ContractRef {
  enum class Kind { Concrete, DeclVar };
  Kind kind = Kind::Concrete;
  std::string name;
  std::vector<Type> args;

  static ContractRef concrete(std::string n, std::vector<Type> a = {});
  static ContractRef decl_var(std::string x);
  bool is_var() const { return kind == Kind::DeclVar; }
};

struct Type {
  bool unit = true;
  ContractRef contract;
  Mode mode;

  static Type make_unit() { return Type{}; }
  static Type ref(ContractRef c, Mode m);
  bool is_ref() const { return !unit; }
  Type with_mode(Mode m) const;
};

bool operator==(const ContractRef& a, const ContractRef& b);
bool operator==(const Type& a, const Type& b);
bool operator<(const ContractRef& a, const ContractRef& b);
bool operator<(const Type& a, const Type& b);

struct GenericParam {
  bool asset = false;
  std::string decl_var;
  std::string perm_var;
  ContractRef bound_iface;
  Mode bound_mode;
  SourceSpan span;

  Type as_type() const;  // X@p
  Type bound_type() const { return Type::ref(bound_iface, bound_mode); }
};

using GenericContext = std::vector<GenericParam>;

struct FieldDecl {
  Type type;
  std::string name;
  SourceSpan span;
};

struct StateDecl {
  bool asset = false;
  std::string name;
  std::vector<FieldDecl> fields;
  SourceSpan span;
};

struct Param {
  Type type;
  Mode post;
  std::string name;
};

struct FieldSpec {
  std::string field;
  Mode pre;
  Mode post;
};

struct TransactionSig {
  bool is_private = false;
  std::vector<FieldSpec> field_specs;
  Type ret;
  std::string name;
  std::vector<GenericParam> generics;
  std::vector<Param> params;
  Mode this_pre;
  Mode this_post;
  SourceSpan span;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Transaction {
  TransactionSig sig;
  ExprPtr body;
};

struct ContractDecl {
  std::string name;
  std::vector<GenericParam> generics;
  std::optional<ContractRef> implements;
  std::vector<FieldDecl> contract_fields;  // empty after desugaring
  std::vector<StateDecl> states;
  std::vector<Transaction> transactions;
  SourceSpan span;

  const StateDecl* find_state(const std::string& s) const;
  const Transaction* find_transaction(const std::string& m) const;
};

struct InterfaceDecl {
  std::string name;
  std::vector<GenericParam> generics;
  std::vector<StateDecl> states;
  std::vector<TransactionSig> signatures;
  SourceSpan span;

  const StateDecl* find_state(const std::string& s) const;
  const TransactionSig* find_signature(const std::string& m) const;
};

struct Program {
  std::vector<InterfaceDecl> interfaces;
  std::vector<ContractDecl> contracts;
  ExprPtr main;
};

// Moves contract-level fields to the front of every state's field list.
Program desugar(const Program& p);

struct Binding {
  enum class Kind { Var, Indirect, Object };
  Kind kind = Kind::Var;
  std::string name;
  std::uint32_t id = 0;

  static Binding var(std::string x) { return {Kind::Var, std::move(x), 0}; }
  static Binding this_var() { return var("this"); }
  static Binding indirect(RefId l) { return {Kind::Indirect, {}, l}; }
  static Binding object(ObjId o) { return {Kind::Object, {}, o}; }
  bool is_var() const { return kind == Kind::Var; }
  bool is_indirect() const { return kind == Kind::Indirect; }
  bool is_object() const { return kind == Kind::Object; }

  friend bool operator==(const Binding& a, const Binding& b) {
    return a.kind == b.kind && a.name == b.name && a.id == b.id;
  }
  friend bool operator<(const Binding& a, const Binding& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.id != b.id) return a.id < b.id;
    return a.name < b.name;
  }
};

std::string render_binding(const Binding& b);

enum class TransitionAnn { Unresolved, Owned, Shared };

struct CheckAnn {
  enum class Kind { Unresolved, Owned, Shared, Unowned, Perm };
  Kind kind = Kind::Unresolved;
  Permission perm = Permission::Owned;
  friend bool operator==(const CheckAnn& a, const CheckAnn& b) {
    return a.kind == b.kind && (a.kind != Kind::Perm || a.perm == b.perm);
  }
};

// Bookkeeping carried by an invocation box. The interpreter fills the
// binding links; the verifier keys its static side table on the frame address.
struct FrameLink {
  Binding caller;
  Binding callee;
  Type declared_in;
  Type declared_post;
};

struct CallFrame {
  std::string transaction;
  ObjId receiver = 0;
  Binding self;
  std::vector<FrameLink> links;  // links[0] is the receiver
  Type result;
  std::vector<std::pair<std::string, Type>> field_pre;
  std::vector<std::pair<std::string, Type>> field_post;
};

namespace ex {
struct Simple { Binding b; };
struct UnitLit {};
struct FieldRead { Binding recv; std::string field; };
struct Invoke {
  Binding recv;
  std::string name;
  std::vector<Type> targs;
  std::vector<Binding> args;
};
struct Let {
  std::string var;
  Type type;
  ExprPtr bound;
  ExprPtr body;
};
struct New {
  ContractRef contract;
  std::string state;
  std::vector<Binding> args;
};
struct Transition {
  Binding recv;
  TransitionAnn ann = TransitionAnn::Unresolved;
  std::string state;
  std::vector<Binding> args;
};
struct FieldWrite { Binding recv; std::string field; Binding src; };
struct StaticAssert { Binding b; Mode mode; };
struct DynCheck {
  Binding b;
  CheckAnn ann;
  Mode mode;
  ExprPtr then_e;
  ExprPtr else_e;
};
struct Disown { Binding b; };
struct Pack {};
// Runtime-only forms.
struct StateLockBox { ExprPtr body; ObjId o; Binding scrutinee; };
struct ReentrancyBox {
  ExprPtr body;
  ObjId o;
  bool guards = true;  // false for private invocation frames
  std::shared_ptr<const CallFrame> frame;
};
}  // namespace ex

struct Expr {
  using Node = std::variant<ex::Simple, ex::UnitLit, ex::FieldRead, ex::Invoke, ex::Let,
                            ex::New, ex::Transition, ex::FieldWrite, ex::StaticAssert,
                            ex::DynCheck, ex::Disown, ex::Pack, ex::StateLockBox,
                            ex::ReentrancyBox>;
  Node node;
  SourceSpan span;

  template <class T>
  const T* as() const { return std::get_if<T>(&node); }
  template <class T>
  bool is() const { return std::holds_alternative<T>(node); }
};

template <class T>
ExprPtr mk(T node, SourceSpan span = {}) {
  return std::make_shared<const Expr>(Expr{Expr::Node(std::move(node)), std::move(span)});
}

// Structural equality ignoring source positions.
bool same_expr(const ExprPtr& a, const ExprPtr& b);

struct Value {
  bool unit = true;
  ObjId obj = 0;
  static Value unit_val() { return {}; }
  static Value object(ObjId o) { return {false, o}; }
  friend bool operator==(const Value& a, const Value& b) {
    return a.unit == b.unit && (a.unit || a.obj == b.obj);
  }
};

bool is_value(const ExprPtr& e);
std::optional<Value> value_of(const ExprPtr& e);
ExprPtr value_expr(const Value& v);

struct HeapObject {
  ContractRef type;
  std::string state;
  std::vector<Value> fields;
};

struct RuntimeConfig {
  std::map<ObjId, HeapObject> heap;
  std::map<RefId, Value> env;
  std::set<ObjId> locks;   // phi
  std::set<ObjId> active;  // psi
  std::map<std::string, Mode> perm_env;  // xi
  ObjId next_obj = 0;
  RefId next_ref = 0;

  ObjId fresh_object() { return next_obj++; }
  RefId fresh_ref() { return next_ref++; }
  void bind_perm(const std::string& p, const Mode& m);
};

// Typing context: bindings and field overrides in insertion order.
class TypingContext {
 public:
  struct Key {
    Binding b;
    std::optional<std::string> field;
    friend bool operator==(const Key& x, const Key& y) { return x.b == y.b && x.field == y.field; }
    friend bool operator<(const Key& x, const Key& y) {
      if (!(x.b == y.b)) return x.b < y.b;
      return x.field < y.field;
    }
  };
  struct Entry {
    Key key;
    Type type;
  };

  const Type* find(const Binding& b) const { return find(Key{b, std::nullopt}); }
  const Type* find_field(const Binding& recv, const std::string& f) const {
    return find(Key{recv, f});
  }
  const Type* find(const Key& k) const;
  void set(const Binding& b, Type t) { set(Key{b, std::nullopt}, std::move(t)); }
  void set_field(const Binding& recv, const std::string& f, Type t) { set(Key{recv, f}, std::move(t)); }
  void set(const Key& k, Type t);
  bool erase(const Key& k);
  bool erase(const Binding& b) { return erase(Key{b, std::nullopt}); }
  std::vector<Entry> overrides_of(const Binding& recv) const;
  void erase_overrides_of(const Binding& recv);

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  std::map<Key, Type> as_map() const;

 private:
  std::vector<Entry> entries_;
};

// Rendering in the surface grammar.
std::string render_mode(const Mode& m);
std::string render_contract(const ContractRef& c);
std::string render_type(const Type& t);
std::string render_expr(const ExprPtr& e);
std::string render_program(const Program& p);
std::string render_context(const TypingContext& ctx);

}  // namespace silica
