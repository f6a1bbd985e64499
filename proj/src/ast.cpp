#include "silica/ast.hpp"

#include <algorithm>
#include <sstream>

namespace silica {

const char* permission_name(Permission p) {
  switch (p) {
    case Permission::Owned: return "Owned";
    case Permission::Unowned: return "Unowned";
    case Permission::Shared: return "Shared";
  }
  return "?";
}

Mode Mode::of_states(std::vector<std::string> names) {
  if (names.empty()) throw std::invalid_argument("empty state set");
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end())
    throw std::invalid_argument("duplicate state in state set");
  Mode m;
  m.kind = Kind::States;
  m.states = std::move(names);
  return m;
}

Mode Mode::var(std::string p) {
  Mode m;
  m.kind = Kind::Var;
  m.name = std::move(p);
  return m;
}

Mode Mode::symbol(std::string n) {
  Mode m;
  m.kind = Kind::Name;
  m.name = std::move(n);
  return m;
}

Mode Mode::of(Permission p) {
  Mode m;
  m.kind = Kind::Perm;
  m.perm = p;
  return m;
}

bool operator==(const Mode& a, const Mode& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Mode::Kind::States: return a.states == b.states;
    case Mode::Kind::Var:
    case Mode::Kind::Name: return a.name == b.name;
    case Mode::Kind::Perm: return a.perm == b.perm;
  }
  return false;
}

bool operator<(const Mode& a, const Mode& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  switch (a.kind) {
    case Mode::Kind::States: return a.states < b.states;
    case Mode::Kind::Var:
    case Mode::Kind::Name: return a.name < b.name;
    case Mode::Kind::Perm: return a.perm < b.perm;
  }
  return false;
}

ContractRef ContractRef::concrete(std::string n, std::vector<Type> a) {
  ContractRef c;
  c.kind = Kind::Concrete;
  c.name = std::move(n);
  c.args = std::move(a);
  return c;
}

ContractRef ContractRef::decl_var(std::string x) {
  ContractRef c;
  c.kind = Kind::DeclVar;
  c.name = std::move(x);
  return c;
}

Type Type::ref(ContractRef c, Mode m) {
  Type t;
  t.unit = false;
  t.contract = std::move(c);
  t.mode = std::move(m);
  return t;
}

Type Type::with_mode(Mode m) const {
  Type t = *this;
  t.mode = std::move(m);
  return t;
}

bool operator==(const ContractRef& a, const ContractRef& b) {
  return a.kind == b.kind && a.name == b.name && a.args == b.args;
}

bool operator==(const Type& a, const Type& b) {
  if (a.unit != b.unit) return false;
  if (a.unit) return true;
  return a.contract == b.contract && a.mode == b.mode;
}

bool operator<(const ContractRef& a, const ContractRef& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  if (a.name != b.name) return a.name < b.name;
  return std::lexicographical_compare(a.args.begin(), a.args.end(), b.args.begin(), b.args.end());
}

bool operator<(const Type& a, const Type& b) {
  if (a.unit != b.unit) return a.unit;
  if (a.unit) return false;
  if (!(a.contract == b.contract)) return a.contract < b.contract;
  return a.mode < b.mode;
}

Type GenericParam::as_type() const {
  return Type::ref(ContractRef::decl_var(decl_var), Mode::var(perm_var));
}

const StateDecl* ContractDecl::find_state(const std::string& s) const {
  for (const auto& st : states)
    if (st.name == s) return &st;
  return nullptr;
}

const Transaction* ContractDecl::find_transaction(const std::string& m) const {
  for (const auto& t : transactions)
    if (t.sig.name == m) return &t;
  return nullptr;
}

const StateDecl* InterfaceDecl::find_state(const std::string& s) const {
  for (const auto& st : states)
    if (st.name == s) return &st;
  return nullptr;
}

const TransactionSig* InterfaceDecl::find_signature(const std::string& m) const {
  for (const auto& s : signatures)
    if (s.name == m) return &s;
  return nullptr;
}

Program desugar(const Program& p) {
  Program out = p;
  for (auto& c : out.contracts) {
    if (c.contract_fields.empty()) continue;
    for (auto& st : c.states) {
      std::vector<FieldDecl> fs = c.contract_fields;
      fs.insert(fs.end(), st.fields.begin(), st.fields.end());
      st.fields = std::move(fs);
    }
    c.contract_fields.clear();
  }
  return out;
}

std::string render_binding(const Binding& b) {
  switch (b.kind) {
    case Binding::Kind::Var: return b.name;
    case Binding::Kind::Indirect: return "l" + std::to_string(b.id);
    case Binding::Kind::Object: return "o" + std::to_string(b.id);
  }
  return "?";
}

bool is_value(const ExprPtr& e) { return value_of(e).has_value(); }

std::optional<Value> value_of(const ExprPtr& e) {
  if (e->is<ex::UnitLit>()) return Value::unit_val();
  if (auto s = e->as<ex::Simple>(); s && s->b.is_object()) return Value::object(s->b.id);
  return std::nullopt;
}

ExprPtr value_expr(const Value& v) {
  if (v.unit) return mk(ex::UnitLit{});
  return mk(ex::Simple{Binding::object(v.obj)});
}

void RuntimeConfig::bind_perm(const std::string& p, const Mode& m) {
  if (m.is_var() || m.kind == Mode::Kind::Name)
    throw std::logic_error("permission environment must map " + p + " to a concrete mode");
  perm_env[p] = m;
}

const Type* TypingContext::find(const Key& k) const {
  for (const auto& e : entries_)
    if (e.key == k) return &e.type;
  return nullptr;
}

void TypingContext::set(const Key& k, Type t) {
  for (auto& e : entries_) {
    if (e.key == k) {
      e.type = std::move(t);
      return;
    }
  }
  entries_.push_back({k, std::move(t)});
}

bool TypingContext::erase(const Key& k) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == k; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

std::vector<TypingContext::Entry> TypingContext::overrides_of(const Binding& recv) const {
  std::vector<Entry> out;
  for (const auto& e : entries_)
    if (e.key.field && e.key.b == recv) out.push_back(e);
  return out;
}

void TypingContext::erase_overrides_of(const Binding& recv) {
  entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                [&](const Entry& e) { return e.key.field && e.key.b == recv; }),
                 entries_.end());
}

std::map<TypingContext::Key, Type> TypingContext::as_map() const {
  std::map<Key, Type> m;
  for (const auto& e : entries_) m[e.key] = e.type;
  return m;
}

// ---------------------------------------------------------------------------
// rendering

std::string render_mode(const Mode& m) {
  switch (m.kind) {
    case Mode::Kind::Perm: return permission_name(m.perm);
    case Mode::Kind::Var:
    case Mode::Kind::Name: return m.name;
    case Mode::Kind::States: {
      if (m.states.size() == 1) return m.states[0];
      std::string s = "(";
      for (std::size_t i = 0; i < m.states.size(); ++i) {
        if (i) s += "|";
        s += m.states[i];
      }
      return s + ")";
    }
  }
  return "?";
}

std::string render_contract(const ContractRef& c) {
  std::string s = c.name;
  if (!c.args.empty()) {
    s += "<";
    for (std::size_t i = 0; i < c.args.size(); ++i) {
      if (i) s += ", ";
      s += render_type(c.args[i]);
    }
    s += ">";
  }
  return s;
}

std::string render_type(const Type& t) {
  if (t.unit) return "unit";
  return render_contract(t.contract) + "@" + render_mode(t.mode);
}

namespace {

std::string join_bindings(const std::vector<Binding>& bs) {
  std::string s;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    if (i) s += ", ";
    s += render_binding(bs[i]);
  }
  return s;
}

std::string type_args(const std::vector<Type>& ts) {
  if (ts.empty()) return "";
  std::string s = "<";
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i) s += ", ";
    s += render_type(ts[i]);
  }
  return s + ">";
}

void emit(std::ostream& os, const ExprPtr& e, int indent);

void pad(std::ostream& os, int indent) {
  for (int i = 0; i < indent; ++i) os << "  ";
}

void emit(std::ostream& os, const ExprPtr& e, int indent) {
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, ex::Simple>) {
          os << render_binding(n.b);
        } else if constexpr (std::is_same_v<N, ex::UnitLit>) {
          os << "()";
        } else if constexpr (std::is_same_v<N, ex::FieldRead>) {
          os << render_binding(n.recv) << "." << n.field;
        } else if constexpr (std::is_same_v<N, ex::Invoke>) {
          os << render_binding(n.recv) << "." << n.name << type_args(n.targs) << "("
             << join_bindings(n.args) << ")";
        } else if constexpr (std::is_same_v<N, ex::Let>) {
          os << "let " << n.var << ": " << render_type(n.type) << " = ";
          emit(os, n.bound, indent + 1);
          os << " in\n";
          pad(os, indent);
          emit(os, n.body, indent);
        } else if constexpr (std::is_same_v<N, ex::New>) {
          os << "new " << render_contract(n.contract) << "." << n.state << "("
             << join_bindings(n.args) << ")";
        } else if constexpr (std::is_same_v<N, ex::Transition>) {
          os << render_binding(n.recv) << " ->" << n.state << "(" << join_bindings(n.args) << ")";
        } else if constexpr (std::is_same_v<N, ex::FieldWrite>) {
          os << render_binding(n.recv) << "." << n.field << " := " << render_binding(n.src);
        } else if constexpr (std::is_same_v<N, ex::StaticAssert>) {
          os << "[" << render_binding(n.b) << " @ " << render_mode(n.mode) << "]";
        } else if constexpr (std::is_same_v<N, ex::DynCheck>) {
          os << "if " << render_binding(n.b) << " in " << render_mode(n.mode) << " {\n";
          pad(os, indent + 1);
          emit(os, n.then_e, indent + 1);
          os << "\n";
          pad(os, indent);
          os << "} else {\n";
          pad(os, indent + 1);
          emit(os, n.else_e, indent + 1);
          os << "\n";
          pad(os, indent);
          os << "}";
        } else if constexpr (std::is_same_v<N, ex::Disown>) {
          os << "disown " << render_binding(n.b);
        } else if constexpr (std::is_same_v<N, ex::Pack>) {
          os << "pack";
        } else if constexpr (std::is_same_v<N, ex::StateLockBox>) {
          os << "lock<o" << n.o << "> { ";
          emit(os, n.body, indent + 1);
          os << " }";
        } else if constexpr (std::is_same_v<N, ex::ReentrancyBox>) {
          os << (n.guards ? "frame<o" : "pframe<o") << n.o << "> { ";
          emit(os, n.body, indent + 1);
          os << " }";
        }
      },
      e->node);
}

std::string render_generics(const std::vector<GenericParam>& gs) {
  if (gs.empty()) return "";
  std::string s = "<";
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (i) s += ", ";
    const auto& g = gs[i];
    if (g.asset) s += "asset ";
    s += g.decl_var + "@" + g.perm_var + " where " + render_contract(g.bound_iface) + "@" +
         render_mode(g.bound_mode);
  }
  return s + ">";
}

void emit_state(std::ostream& os, const StateDecl& st) {
  os << "  ";
  if (st.asset) os << "asset ";
  os << "state " << st.name;
  if (st.fields.empty()) {
    os << ";\n";
    return;
  }
  os << " {";
  for (const auto& f : st.fields) os << " " << render_type(f.type) << " " << f.name << ";";
  os << " }\n";
}

void emit_sig(std::ostream& os, const TransactionSig& s, const std::string& owner) {
  os << "  ";
  if (s.is_private) {
    os << "private [";
    for (std::size_t i = 0; i < s.field_specs.size(); ++i) {
      if (i) os << ", ";
      const auto& f = s.field_specs[i];
      os << f.field << ": " << render_mode(f.pre) << " >> " << render_mode(f.post);
    }
    os << "] ";
  }
  os << "transaction " << s.name << render_generics(s.generics) << "(" << owner << "@"
     << render_mode(s.this_pre) << " >> " << render_mode(s.this_post) << " this";
  for (const auto& p : s.params)
    os << ", " << render_type(p.type) << " >> " << render_mode(p.post) << " " << p.name;
  os << ") returns " << render_type(s.ret);
}

}  // namespace

std::string render_expr(const ExprPtr& e) {
  std::ostringstream os;
  emit(os, e, 0);
  return os.str();
}

std::string render_program(const Program& p) {
  std::ostringstream os;
  for (const auto& i : p.interfaces) {
    os << "interface " << i.name << render_generics(i.generics) << " {\n";
    for (const auto& st : i.states) emit_state(os, st);
    for (const auto& s : i.signatures) {
      emit_sig(os, s, i.name);
      os << ";\n";
    }
    os << "}\n\n";
  }
  for (const auto& c : p.contracts) {
    os << "contract " << c.name << render_generics(c.generics);
    if (c.implements) os << " implements " << render_contract(*c.implements);
    os << " {\n";
    for (const auto& f : c.contract_fields) os << "  " << render_type(f.type) << " " << f.name << ";\n";
    for (const auto& st : c.states) emit_state(os, st);
    for (const auto& t : c.transactions) {
      emit_sig(os, t.sig, c.name);
      os << " {\n    ";
      emit(os, t.body, 2);
      os << "\n  }\n";
    }
    os << "}\n\n";
  }
  os << "main ";
  if (p.main) emit(os, p.main, 1);
  os << "\n";
  return os.str();
}

std::string render_context(const TypingContext& ctx) {
  std::string s = "{";
  bool first = true;
  for (const auto& e : ctx.entries()) {
    if (!first) s += ", ";
    first = false;
    s += render_binding(e.key.b);
    if (e.key.field) s += "." + *e.key.field;
    s += ": " + render_type(e.type);
  }
  return s + "}";
}

// ---------------------------------------------------------------------------
// structural equality

namespace {

bool same_frame(const std::shared_ptr<const CallFrame>& a, const std::shared_ptr<const CallFrame>& b) {
  return a == b;
}

}  // namespace

bool same_expr(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->node.index() != b->node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using N = std::decay_t<decltype(x)>;
        const N& y = std::get<N>(b->node);
        if constexpr (std::is_same_v<N, ex::Simple>) {
          return x.b == y.b;
        } else if constexpr (std::is_same_v<N, ex::UnitLit> || std::is_same_v<N, ex::Pack>) {
          return true;
        } else if constexpr (std::is_same_v<N, ex::FieldRead>) {
          return x.recv == y.recv && x.field == y.field;
        } else if constexpr (std::is_same_v<N, ex::Invoke>) {
          return x.recv == y.recv && x.name == y.name && x.targs == y.targs && x.args == y.args;
        } else if constexpr (std::is_same_v<N, ex::Let>) {
          return x.var == y.var && x.type == y.type && same_expr(x.bound, y.bound) &&
                 same_expr(x.body, y.body);
        } else if constexpr (std::is_same_v<N, ex::New>) {
          return x.contract == y.contract && x.state == y.state && x.args == y.args;
        } else if constexpr (std::is_same_v<N, ex::Transition>) {
          return x.recv == y.recv && x.ann == y.ann && x.state == y.state && x.args == y.args;
        } else if constexpr (std::is_same_v<N, ex::FieldWrite>) {
          return x.recv == y.recv && x.field == y.field && x.src == y.src;
        } else if constexpr (std::is_same_v<N, ex::StaticAssert>) {
          return x.b == y.b && x.mode == y.mode;
        } else if constexpr (std::is_same_v<N, ex::DynCheck>) {
          return x.b == y.b && x.ann == y.ann && x.mode == y.mode && same_expr(x.then_e, y.then_e) &&
                 same_expr(x.else_e, y.else_e);
        } else if constexpr (std::is_same_v<N, ex::Disown>) {
          return x.b == y.b;
        } else if constexpr (std::is_same_v<N, ex::StateLockBox>) {
          return x.o == y.o && x.scrutinee == y.scrutinee && same_expr(x.body, y.body);
        } else if constexpr (std::is_same_v<N, ex::ReentrancyBox>) {
          return x.o == y.o && x.guards == y.guards && same_frame(x.frame, y.frame) &&
                 same_expr(x.body, y.body);
        }
        return false;
      },
      a->node);
}

}  // namespace silica
