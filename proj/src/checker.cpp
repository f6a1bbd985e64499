#include "silica/checker.hpp"

#include <algorithm>

namespace silica {

namespace {

const GenericParam* find_decl_var(const GenericContext& g, const std::string& x) {
  for (const auto& p : g)
    if (p.decl_var == x) return &p;
  return nullptr;
}

const GenericParam* find_perm_var(const GenericContext& g, const std::string& p) {
  for (const auto& q : g)
    if (q.perm_var == p) return &q;
  return nullptr;
}

std::string governing_decl(const GenericContext& gamma, const ContractRef& c, const SourceSpan& sp) {
  if (!c.is_var()) return c.name;
  const GenericParam* g = find_decl_var(gamma, c.name);
  if (!g) throw CheckFailure("GEN001", "T ok", "unknown declaration variable '" + c.name + "'", sp);
  return g->bound_iface.name;
}

bool has_state(const Decls& decls, const std::string& decl, const std::string& s) {
  auto names = decls.state_names(decl);
  return std::binary_search(names.begin(), names.end(), s);
}

}  // namespace

Mode resolve_mode(const Decls& decls, const GenericContext& gamma, const ContractRef& governing,
                  const Mode& m, const SourceSpan& sp) {
  switch (m.kind) {
    case Mode::Kind::Perm:
      return m;
    case Mode::Kind::Var:
      if (!find_perm_var(gamma, m.name))
        throw CheckFailure("GEN001", "T ok", "unknown permission variable '" + m.name + "'", sp);
      return m;
    case Mode::Kind::Name: {
      if (find_perm_var(gamma, m.name)) return Mode::var(m.name);
      std::string decl = governing_decl(gamma, governing, sp);
      if (has_state(decls, decl, m.name)) return Mode::state(m.name);
      throw CheckFailure("GEN002", "T ok", "'" + m.name + "' is neither a state of " + decl +
                                               " nor a permission variable in scope",
                         sp);
    }
    case Mode::Kind::States: {
      std::string decl = governing_decl(gamma, governing, sp);
      for (const auto& s : m.states)
        if (!has_state(decls, decl, s))
          throw CheckFailure("GEN002", "T ok", "unknown state '" + s + "' of " + decl, sp);
      return m;
    }
  }
  return m;
}

namespace {

ContractRef resolve_contract(const Decls& decls, const GenericContext& gamma, const ContractRef& c,
                             const SourceSpan& sp) {
  if (c.is_var()) {
    if (!find_decl_var(gamma, c.name))
      throw CheckFailure("GEN001", "T ok", "unknown declaration variable '" + c.name + "'", sp);
    return c;
  }
  if (c.args.empty() && find_decl_var(gamma, c.name)) return ContractRef::decl_var(c.name);
  const auto* generics = decls.generics_of(c.name);
  if (!generics) throw CheckFailure("DECL001", "T ok", "unknown contract or interface '" + c.name + "'", sp);
  ContractRef out = c;
  for (auto& a : out.args) a = resolve_type(decls, gamma, a, sp);
  if (out.args.size() != generics->size())
    throw CheckFailure("GEN003", "T ok",
                       c.name + " expects " + std::to_string(generics->size()) + " type arguments, got " +
                           std::to_string(out.args.size()),
                       sp);
  return out;
}

}  // namespace

Type resolve_type(const Decls& decls, const GenericContext& gamma, const Type& t, const SourceSpan& sp) {
  if (t.unit) return t;
  ContractRef c = resolve_contract(decls, gamma, t.contract, sp);
  Mode m = resolve_mode(decls, gamma, c, t.mode, sp);
  return Type::ref(std::move(c), std::move(m));
}

// ---------------------------------------------------------------------------

Checker::Checker(const Decls& decls, GenericContext gamma, CheckOptions opts)
    : decls_(decls), j_(decls, std::move(gamma)), opts_(std::move(opts)) {}

Binding Checker::receiver_key(const Binding& b) const {
  if (opts_.sigma && b.is_indirect()) {
    auto it = opts_.sigma->env.find(b.id);
    if (it != opts_.sigma->env.end() && !it->second.unit) return Binding::object(it->second.obj);
  }
  return b;
}

CheckResult Checker::check(const TypingContext& in, const ExprPtr& e, std::optional<Binding> self,
                           std::optional<Type> expected) const {
  Scope sc;
  sc.self = self;
  if (self) sc.key = receiver_key(*self);
  TypingContext d = in;
  Out o = go(d, sc, e, expected);
  return {o.type, std::move(d), o.e};
}

Checker::Out Checker::go(TypingContext& d, const Scope& sc, const ExprPtr& e,
                         const std::optional<Type>& expected) const {
  if (!e) throw CheckFailure("INT001", "-", "missing expression");
  TypingContext in;
  if (opts_.on_node) in = d;
  Out o;
  try {
    o = node(d, sc, e, expected);
  } catch (CheckFailure& f) {
    if (f.diagnostic().span.line == 0) f.diagnostic().span = e->span;
    throw;
  }
  if (opts_.on_node) opts_.on_node(e.get(), in, d, o.type);
  return o;
}

Type Checker::lookup(const TypingContext& d, const Binding& b, const SourceSpan& sp) const {
  const Type* t = d.find(b);
  if (!t) throw CheckFailure("NAME001", "T-lookup", "unbound " + render_binding(b), sp);
  return *t;
}

Type Checker::use_simple(TypingContext& d, const Binding& b, const std::optional<Type>& expected,
                         const SourceSpan& sp) const {
  Type t = lookup(d, b, sp);
  SplitResult r;
  if (expected) {
    try {
      r = j_.split(t, SplitDemand::satisfy(*expected));
    } catch (const CheckFailure&) {
      r = j_.split(t, SplitDemand::transfer_all());
    }
  } else {
    r = j_.split(t, SplitDemand::transfer_all());
  }
  d.set(b, r.residual);
  return r.taken;
}

void Checker::require_self(const Scope& sc, const Binding& recv, const char* rule, const SourceSpan& sp) const {
  if (!sc.self) throw CheckFailure("FLD001", rule, "no receiver in scope for " + render_binding(recv), sp);
  if (!(receiver_key(recv) == *sc.key))
    throw CheckFailure("FLD001", rule, "fields and states are only accessible through this, not " +
                                           render_binding(recv),
                       sp);
}

Type Checker::declared_field(const TypingContext& d, const Scope& sc, const std::string& f, const char* rule,
                             const SourceSpan& sp) const {
  Type self = lookup(d, *sc.self, sp);
  if (auto fd = j_.intersect_field(self, f)) return fd->type;
  for (const auto& u : j_.fields_of(self, FieldSelector::Union))
    if (u.name == f)
      throw CheckFailure("FLD002", rule, "field '" + f + "' is not defined in every possible state of " +
                                             render_type(self),
                         sp);
  throw CheckFailure("FLD002", rule, "no field '" + f + "' in " + render_type(self), sp);
}

Type Checker::current_field(const TypingContext& d, const Scope& sc, const std::string& f, const char* rule,
                            const SourceSpan& sp) const {
  if (const Type* o = d.find_field(*sc.key, f)) return *o;
  return declared_field(d, sc, f, rule, sp);
}

void Checker::set_field(TypingContext& d, const Scope& sc, const std::string& f, const Type& t) const {
  const Type* self = d.find(*sc.self);
  if (self) {
    auto fd = j_.intersect_field(*self, f);
    if (fd && fd->type == t) {
      d.erase(TypingContext::Key{*sc.key, f});
      return;
    }
  }
  d.set_field(*sc.key, f, t);
}

bool Checker::overrides_consistent(const TypingContext& d, const Scope& sc, std::string* bad) const {
  if (!sc.key) return true;
  const Type* self = d.find(*sc.self);
  for (const auto& e : d.overrides_of(*sc.key)) {
    std::optional<FieldDecl> fd;
    if (self) fd = j_.intersect_field(*self, *e.key.field);
    if (!fd || !j_.subtype(e.type, fd->type) || !j_.same_ownership(e.type, fd->type)) {
      if (bad)
        *bad = "field '" + *e.key.field + "' has type " + render_type(e.type) +
               (fd ? ", declared " + render_type(fd->type) : std::string(", not declared in every state"));
      return false;
    }
  }
  return true;
}

void Checker::coerce(const Type& actual, const Type& expected, const std::string& sub_code,
                     const std::string& own_code, const std::string& rule, const std::string& what,
                     const SourceSpan& sp) const {
  if (!j_.subtype(actual, expected))
    throw CheckFailure(sub_code, rule,
                       what + ": " + render_type(actual) + " is not a subtype of " + render_type(expected), sp);
  if (!j_.same_ownership(actual, expected) && !j_.disposable(actual))
    throw CheckFailure(own_code, rule,
                       what + ": owned asset " + render_type(actual) + " would be dropped as " +
                           render_type(expected),
                       sp);
}

Mode Checker::resolve_mode_for(const Type& t, const Mode& m, const SourceSpan& sp) const {
  if (t.unit) throw CheckFailure("TYP001", "T ok", "unit has no states or permissions", sp);
  return resolve_mode(decls_, j_.gamma(), t.contract, m, sp);
}

TypingContext Checker::merge_branches(TypingContext a, TypingContext b, const Scope& sc) const {
  if (sc.key) {
    auto fill = [&](const TypingContext& from, TypingContext& to) {
      const Type* self = to.find(*sc.self);
      if (!self) return;
      for (const auto& e : from.overrides_of(*sc.key)) {
        if (to.find(e.key)) continue;
        if (auto fd = j_.intersect_field(*self, *e.key.field)) to.set(e.key, fd->type);
      }
    };
    fill(a, b);
    fill(b, a);
  }
  TypingContext m = j_.merge(a, b);
  if (sc.key) {
    if (const Type* self = m.find(*sc.self))
      for (const auto& e : m.overrides_of(*sc.key)) {
        auto fd = j_.intersect_field(*self, *e.key.field);
        if (fd && fd->type == e.type) m.erase(e.key);
      }
  }
  return m;
}

Checker::Out Checker::node(TypingContext& d, const Scope& sc, const ExprPtr& e,
                           const std::optional<Type>& expected) const {
  const SourceSpan& sp = e->span;
  const Type unit = Type::make_unit();

  if (auto n = e->as<ex::Simple>()) return {use_simple(d, n->b, expected, sp), e};
  if (e->is<ex::UnitLit>()) return {unit, e};

  if (auto n = e->as<ex::FieldRead>()) {
    require_self(sc, n->recv, "T-this-field-def", sp);
    bool overridden = d.find_field(*sc.key, n->field) != nullptr;
    const char* rule = overridden ? "T-this-field-ctxt" : "T-this-field-def";
    Type t1 = current_field(d, sc, n->field, rule, sp);
    SplitResult r;
    if (expected) {
      try {
        r = j_.split(t1, SplitDemand::satisfy(*expected));
      } catch (const CheckFailure&) {
        r = j_.split(t1, SplitDemand::transfer_all());
      }
    } else {
      r = j_.split(t1, SplitDemand::transfer_all());
    }
    set_field(d, sc, n->field, r.residual);
    return {r.taken, e};
  }

  if (auto n = e->as<ex::FieldWrite>()) {
    require_self(sc, n->recv, "T-fieldUpdate", sp);
    Type old = current_field(d, sc, n->field, "T-fieldUpdate", sp);
    if (!j_.disposable(old))
      throw CheckFailure("ASSET002", "T-fieldUpdate",
                         "field '" + n->field + "' still holds " + render_type(old) + " and cannot be overwritten",
                         sp);
    Type decl = declared_field(d, sc, n->field, "T-fieldUpdate", sp);
    Type src = use_simple(d, n->src, decl, sp);
    bool ok_head = src.unit == decl.unit &&
                   (src.unit || j_.subtype(src.with_mode(Mode::unowned()), decl.with_mode(Mode::unowned())));
    if (!ok_head)
      throw CheckFailure("TYP001", "T-fieldUpdate",
                         "cannot store " + render_type(src) + " in field '" + n->field + "' of type " +
                             render_type(decl),
                         sp);
    set_field(d, sc, n->field, src);
    return {unit, e};
  }

  if (auto n = e->as<ex::Let>()) {
    Out o1 = go(d, sc, n->bound, n->type);
    coerce(o1.type, n->type, "TYP001", "ASSET001", "T-let", "binding of '" + n->var + "'", sp);
    Binding xb = Binding::var(n->var);
    std::optional<Type> saved;
    if (const Type* prev = d.find(xb)) saved = *prev;
    d.set(xb, n->type);
    Out o2 = go(d, sc, n->body, expected);
    Type fin = lookup(d, xb, sp);
    if (!j_.disposable(fin))
      throw CheckFailure("ASSET001", "T-let",
                         "'" + n->var + "' still owns asset " + render_type(fin) + " at the end of its scope", sp);
    d.erase(xb);
    if (saved) d.set(xb, *saved);
    ExprPtr out = e;
    if (o1.e != n->bound || o2.e != n->body) out = mk(ex::Let{n->var, n->type, o1.e, o2.e}, sp);
    return {o2.type, out};
  }

  if (auto n = e->as<ex::New>()) {
    const ContractDecl* cd = n->contract.is_var() ? nullptr : decls_.contract(n->contract.name);
    if (!cd)
      throw CheckFailure("DECL001", "T-new", "'" + render_contract(n->contract) + "' is not a contract", sp);
    j_.check_type_args(cd->generics, n->contract.args, sp);
    auto fields = j_.state_fields(n->contract, n->state);
    if (fields.size() != n->args.size())
      throw CheckFailure("TXN002", "T-new",
                         n->contract.name + "." + n->state + " has " + std::to_string(fields.size()) +
                             " fields, got " + std::to_string(n->args.size()) + " arguments",
                         sp);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      Type t = use_simple(d, n->args[i], fields[i].type, sp);
      coerce(t, fields[i].type, "TYP001", "ASSET001", "T-new", "field '" + fields[i].name + "'", sp);
    }
    return {Type::ref(n->contract, Mode::state(n->state)), e};
  }

  if (auto n = e->as<ex::Transition>()) {
    require_self(sc, n->recv, "T-transition", sp);
    Type self = lookup(d, *sc.self, sp);
    TransitionAnn ann;
    if (j_.subpermission(self.mode, Mode::owned()))
      ann = TransitionAnn::Owned;
    else if (self.mode.is_perm(Permission::Shared))
      ann = TransitionAnn::Shared;
    else
      throw CheckFailure("STATE001", "T-transition",
                         "state transition needs an Owned or Shared receiver, have " + render_type(self), sp);
    if (self.contract.is_var() || !decls_.contract(self.contract.name))
      throw CheckFailure("DECL001", "T-transition", "receiver is not a contract", sp);
    auto target = j_.state_fields(self.contract, n->state);
    if (target.size() != n->args.size())
      throw CheckFailure("TXN002", "T-transition",
                         "state " + n->state + " has " + std::to_string(target.size()) + " fields, got " +
                             std::to_string(n->args.size()) + " arguments",
                         sp);
    for (std::size_t i = 0; i < target.size(); ++i) {
      Type t = use_simple(d, n->args[i], target[i].type, sp);
      coerce(t, target[i].type, "TYP001", "ASSET001", "T-transition", "field '" + target[i].name + "'", sp);
    }
    self = lookup(d, *sc.self, sp);
    for (const auto& f : j_.fields_of(self, FieldSelector::Union)) {
      const Type* o = d.find_field(*sc.key, f.name);
      Type cur = o ? *o : f.type;
      if (!j_.disposable(cur))
        throw CheckFailure("STATE002", "T-transition",
                           "field '" + f.name + "' still holds " + render_type(cur) + " and would be dropped", sp);
    }
    d.erase_overrides_of(*sc.key);
    d.set(*sc.self, ann == TransitionAnn::Owned ? self.with_mode(Mode::state(n->state))
                                                : self.with_mode(Mode::shared()));
    ExprPtr out = e;
    if (n->ann != ann) out = mk(ex::Transition{n->recv, ann, n->state, n->args}, sp);
    return {unit, out};
  }

  if (auto n = e->as<ex::StaticAssert>()) {
    Type t = lookup(d, n->b, sp);
    Mode m = resolve_mode_for(t, n->mode, sp);
    std::function<bool(const Mode&, int)> holds = [&](const Mode& want, int depth) -> bool {
      if (depth > 64) return false;
      if (want.is_states()) {
        return t.mode.is_states() &&
               std::includes(want.states.begin(), want.states.end(), t.mode.states.begin(), t.mode.states.end());
      }
      if (want.is_perm()) return t.mode == want;
      if (t.mode == want) return true;
      Mode b = j_.bound_perm(want);
      return !b.is_var() && holds(b, depth + 1);
    };
    const char* rule = m.is_states() ? "T-assertStates" : m.is_perm() ? "T-assertPermission" : "T-assertInVar";
    if (!holds(m, 0))
      throw CheckFailure("ASSERT001", rule,
                         render_binding(n->b) + " has type " + render_type(t) + ", not @" + render_mode(m), sp);
    ExprPtr out = e;
    if (!(m == n->mode)) out = mk(ex::StaticAssert{n->b, m}, sp);
    return {unit, out};
  }

  if (e->is<ex::DynCheck>()) return check_dyn(d, sc, e, expected);

  if (auto n = e->as<ex::Disown>()) {
    Type t = lookup(d, n->b, sp);
    if (t.unit || !j_.subpermission(t.mode, Mode::owned()))
      throw CheckFailure("STATE001", "T-disown",
                         "disown needs an owned reference, " + render_binding(n->b) + " has " + render_type(t), sp);
    d.set(n->b, t.with_mode(Mode::unowned()));
    return {unit, e};
  }

  if (e->is<ex::Pack>()) {
    if (!sc.self) throw CheckFailure("FLD001", "T-pack", "pack outside a transaction", sp);
    std::string bad;
    if (!overrides_consistent(d, sc, &bad)) throw CheckFailure("PACK001", "T-pack", bad, sp);
    d.erase_overrides_of(*sc.key);
    return {unit, e};
  }

  if (e->is<ex::Invoke>()) return check_invoke(d, sc, e);
  if (e->is<ex::StateLockBox>() || e->is<ex::ReentrancyBox>()) return check_frame(d, sc, e, expected);
  throw CheckFailure("INT001", "-", "unknown expression form", sp);
}

Checker::Out Checker::check_invoke(TypingContext& d, const Scope& sc, const ExprPtr& e) const {
  const auto& n = *e->as<ex::Invoke>();
  const SourceSpan& sp = e->span;
  Type recv = lookup(d, n.recv, sp);
  if (recv.unit) throw CheckFailure("TYP001", "T-inv", "cannot invoke '" + n.name + "' on unit", sp);
  LookedUpTransaction lt = lookup_transaction(j_, n.name, n.targs, recv, sp);
  const TransactionSig& sig = lt.sig;
  const char* rule = sig.is_private ? "T-privInv" : "T-inv";
  bool on_self = sc.key && receiver_key(n.recv) == *sc.key;
  bool packed = false;
  if (sig.is_private) {
    if (!on_self)
      throw CheckFailure("TXN003", rule, "private transaction '" + n.name + "' may only be invoked on this", sp);
  } else if (on_self && !d.overrides_of(*sc.key).empty()) {
    std::string bad;
    if (!overrides_consistent(d, sc, &bad))
      throw CheckFailure("PUB001", rule, "public invocation of '" + n.name + "' while " + bad, sp);
    d.erase_overrides_of(*sc.key);
    packed = true;
  }
  if (sig.params.size() != n.args.size())
    throw CheckFailure("TXN002", rule,
                       "'" + n.name + "' takes " + std::to_string(sig.params.size()) + " arguments, got " +
                           std::to_string(n.args.size()),
                       sp);
  Type recv_bound = j_.bound(recv);
  if (!j_.subpermission(recv_bound.mode, sig.this_pre))
    throw CheckFailure("STATE001", rule,
                       "'" + n.name + "' requires receiver @" + render_mode(sig.this_pre) + ", but " +
                           render_binding(n.recv) + " has " + render_type(recv),
                       sp);
  for (std::size_t i = 0; i < n.args.size(); ++i) {
    Type a = lookup(d, n.args[i], sp);
    if (!j_.subtype(a, sig.params[i].type))
      throw CheckFailure("TYP001", rule,
                         "argument " + render_binding(n.args[i]) + ": " + render_type(a) + " is not a subtype of " +
                             render_type(sig.params[i].type),
                         sp);
  }
  if (sig.is_private) {
    for (const auto& fs : sig.field_specs) {
      Type cur = current_field(d, sc, fs.field, rule, sp);
      Type decl = declared_field(d, sc, fs.field, rule, sp);
      Type pre = decl.with_mode(fs.pre);
      if (!j_.subtype(cur, pre))
        throw CheckFailure("TYP001", rule,
                           "field '" + fs.field + "': " + render_type(cur) + " is not a subtype of " +
                               render_type(pre),
                           sp);
    }
    const Type* self = d.find(*sc.self);
    for (const auto& ov : d.overrides_of(*sc.key)) {
      const std::string& f = *ov.key.field;
      bool spec = std::any_of(sig.field_specs.begin(), sig.field_specs.end(),
                              [&](const FieldSpec& s) { return s.field == f; });
      if (spec) continue;
      auto fd = self ? j_.intersect_field(*self, f) : std::nullopt;
      if (!fd || !j_.subtype(ov.type, fd->type) || !j_.same_ownership(ov.type, fd->type))
        throw CheckFailure("PACK001", rule,
                           "field '" + f + "' has type " + render_type(ov.type) + " but '" + n.name +
                               "' expects its declared type",
                           sp);
    }
  }
  d.set(n.recv, j_.func_arg(recv, sig.this_pre, sig.this_post).caller_after);
  for (std::size_t i = 0; i < n.args.size(); ++i) {
    Type a = lookup(d, n.args[i], sp);
    d.set(n.args[i], j_.func_arg(a, sig.params[i].type.mode, sig.params[i].post).caller_after);
  }
  if (sig.is_private) {
    for (const auto& fs : sig.field_specs) {
      Type cur = current_field(d, sc, fs.field, rule, sp);
      set_field(d, sc, fs.field, j_.func_arg(cur, fs.pre, fs.post).caller_after);
    }
  }
  ExprPtr out = e;
  if (packed) out = mk(ex::Let{"__pack", Type::make_unit(), mk(ex::Pack{}, sp), e}, sp);
  return {sig.ret, out};
}

Checker::Out Checker::check_dyn(TypingContext& d, const Scope& sc, const ExprPtr& e,
                                const std::optional<Type>& expected) const {
  const auto& n = *e->as<ex::DynCheck>();
  const SourceSpan& sp = e->span;
  Type t = lookup(d, n.b, sp);
  if (t.unit) throw CheckFailure("STATE003", "T-IsIn", "cannot test the state of unit", sp);
  Mode m;
  if (opts_.sigma && n.mode.is_var() && opts_.sigma->perm_env.count(n.mode.name))
    m = opts_.sigma->perm_env.at(n.mode.name);
  else
    m = resolve_mode_for(t, n.mode, sp);
  auto result_type = [&](const Type& a, const Type& b) {
    if (a == b) return a;
    auto jn = j_.join(a, b);
    if (!jn)
      throw CheckFailure("MRG002", "merge",
                         "branches produce " + render_type(a) + " and " + render_type(b), sp);
    return *jn;
  };
  auto rebuild = [&](CheckAnn ann, ExprPtr then_e, ExprPtr else_e) {
    if (ann == n.ann && m == n.mode && then_e == n.then_e && else_e == n.else_e) return e;
    return mk(ex::DynCheck{n.b, ann, m, std::move(then_e), std::move(else_e)}, sp);
  };
  ExprPtr dead = mk(ex::UnitLit{}, sp);

  if (m.is_perm()) {
    Permission p;
    if (opts_.sigma && n.ann.kind == CheckAnn::Kind::Perm)
      p = n.ann.perm;
    else
      p = Judgments::to_permission(t.mode);
    CheckAnn ann{CheckAnn::Kind::Perm, p};
    if (j_.subpermission(Mode::of(p), m)) {
      Out o = go(d, sc, n.then_e, expected);
      return {o.type, rebuild(ann, o.e, dead)};
    }
    Out o = go(d, sc, n.else_e, expected);
    return {o.type, rebuild(ann, dead, o.e)};
  }

  if (m.is_var()) {
    TypingContext d1 = d, d2 = d;
    d1.set(n.b, t.with_mode(m));
    Out o1 = go(d1, sc, n.then_e, expected);
    Out o2 = go(d2, sc, n.else_e, expected);
    d = merge_branches(std::move(d1), std::move(d2), sc);
    CheckAnn ann{CheckAnn::Kind::Perm, Judgments::to_permission(t.mode)};
    return {result_type(o1.type, o2.type), rebuild(ann, o1.e, o2.e)};
  }

  // state-set test
  if (t.mode.is_var() || j_.subpermission(t.mode, Mode::owned())) {
    auto possible = j_.possible_states(t);
    std::vector<std::string> rest;
    std::set_difference(possible.begin(), possible.end(), m.states.begin(), m.states.end(),
                        std::back_inserter(rest));
    TypingContext d1 = d, d2 = d;
    d1.set(n.b, t.with_mode(m));
    d2.set(n.b, rest.empty() ? t : t.with_mode(Mode::of_states(rest)));
    Out o1 = go(d1, sc, n.then_e, expected);
    Out o2 = go(d2, sc, n.else_e, expected);
    d = merge_branches(std::move(d1), std::move(d2), sc);
    return {result_type(o1.type, o2.type), rebuild(CheckAnn{CheckAnn::Kind::Owned}, o1.e, o2.e)};
  }
  if (t.mode.is_perm(Permission::Shared)) {
    TypingContext d1 = d, d2 = d;
    d1.set(n.b, t.with_mode(m));
    Out o1 = go(d1, sc, n.then_e, expected);
    Type fin1 = lookup(d1, n.b, sp);
    if (fin1.unit || j_.bound_perm(fin1.mode).is_perm(Permission::Unowned))
      throw CheckFailure("STATE003", "T-IsIn-Dynamic",
                         "ownership of " + render_binding(n.b) + " escapes the checked block", sp);
    Out o2 = go(d2, sc, n.else_e, expected);
    Type fin2 = lookup(d2, n.b, sp);
    if (!(fin2 == t))
      throw CheckFailure("STATE003", "T-IsIn-Dynamic",
                         render_binding(n.b) + " must remain " + render_type(t) + " in the else branch", sp);
    d1.erase(n.b);
    d2.erase(n.b);
    d = merge_branches(std::move(d1), std::move(d2), sc);
    d.set(n.b, t);
    return {result_type(o1.type, o2.type), rebuild(CheckAnn{CheckAnn::Kind::Shared}, o1.e, o2.e)};
  }
  if (t.mode.is_perm(Permission::Unowned)) {
    Out o = go(d, sc, n.else_e, expected);
    return {o.type, rebuild(CheckAnn{CheckAnn::Kind::Unowned}, dead, o.e)};
  }
  throw CheckFailure("STATE003", "T-IsIn", "no dynamic state check applies to " + render_type(t), sp);
}

Checker::Out Checker::check_frame(TypingContext& d, const Scope& sc, const ExprPtr& e,
                                  const std::optional<Type>& expected) const {
  const SourceSpan& sp = e->span;
  if (auto n = e->as<ex::StateLockBox>()) {
    Out o = go(d, sc, n->body, expected);
    Type fin = lookup(d, n->scrutinee, sp);
    if (fin.unit || j_.bound_perm(fin.mode).is_perm(Permission::Unowned))
      throw CheckFailure("STATE003", "T-state-mutation-detection",
                         "ownership of " + render_binding(n->scrutinee) + " escapes the checked block", sp);
    d.set(n->scrutinee, fin.with_mode(Mode::shared()));
    return {o.type, e};
  }
  const auto& n = *e->as<ex::ReentrancyBox>();
  const char* rule = "T-reentrancy-detection";
  if (!n.frame) throw CheckFailure("VER002", rule, "invocation box without frame", sp);
  const CallFrame& fr = *n.frame;
  Scope inner;
  inner.self = fr.self;
  inner.key = Binding::object(fr.receiver);
  Out o = go(d, inner, n.body, fr.result);
  coerce(o.type, fr.result, "POST001", "ASSET001", rule, "result of '" + fr.transaction + "'", sp);
  for (const auto& [f, post] : fr.field_post) {
    Type cur = current_field(d, inner, f, rule, sp);
    coerce(cur, post, "POST001", "ASSET001", rule, "field '" + f + "'", sp);
  }
  for (const auto& ov : d.overrides_of(*inner.key)) {
    const std::string& f = *ov.key.field;
    bool spec = std::any_of(fr.field_post.begin(), fr.field_post.end(),
                            [&](const auto& p) { return p.first == f; });
    if (spec) continue;
    std::string bad;
    const Type* self = d.find(*inner.self);
    auto fd = self ? j_.intersect_field(*self, f) : std::nullopt;
    if (!fd || !j_.subtype(ov.type, fd->type) || !j_.same_ownership(ov.type, fd->type))
      throw CheckFailure("PACK001", rule, "field '" + f + "' left inconsistent by '" + fr.transaction + "'", sp);
  }
  for (const auto& link : fr.links) {
    Type fin = lookup(d, link.callee, sp);
    coerce(fin, link.declared_post, "POST001", "ASSET001", rule, "parameter " + render_binding(link.callee), sp);
  }
  if (!opts_.frames) throw CheckFailure("VER002", rule, "no frame table for invocation box", sp);
  auto it = opts_.frames->find(n.frame.get());
  if (it == opts_.frames->end()) throw CheckFailure("VER002", rule, "unknown invocation frame", sp);
  d.erase_overrides_of(*inner.key);
  for (const auto& link : fr.links) d.erase(link.callee);
  for (const auto& [b, t] : it->second.caller_after) d.set(b, t);
  for (const auto& [f, t] : it->second.fields_after) d.set_field(*inner.key, f, t);
  return {fr.result, e};
}

Transaction Checker::check_transaction(const ContractDecl& c, const Transaction& t) const {
  const TransactionSig& sig = t.sig;
  const char* rule = sig.is_private ? "PrivateTransactionOK" : "PublicTransactionOK";
  std::vector<Type> self_args;
  for (const auto& g : c.generics) self_args.push_back(g.as_type());
  ContractRef self_c = ContractRef::concrete(c.name, self_args);
  Binding self = Binding::this_var();
  TypingContext in;
  in.set(self, Type::ref(self_c, sig.this_pre));
  Scope sc{self, self};
  if (sig.is_private) {
    for (const auto& fs : sig.field_specs) {
      Type decl = declared_field(in, sc, fs.field, rule, sig.span);
      Type pre = decl.with_mode(fs.pre);
      if (!(pre == decl)) in.set_field(self, fs.field, pre);
    }
  }
  for (const auto& p : sig.params) in.set(Binding::var(p.name), p.type);
  TypingContext d = in;
  Out o = go(d, sc, t.body, sig.ret);
  SourceSpan sp = sig.span;
  coerce(o.type, sig.ret, "POST001", "ASSET001", rule, "result of '" + sig.name + "'", sp);
  ExprPtr body = o.e;
  if (sig.is_private) {
    for (const auto& fs : sig.field_specs) {
      Type decl = declared_field(d, sc, fs.field, rule, sp);
      Type cur = current_field(d, sc, fs.field, rule, sp);
      coerce(cur, decl.with_mode(fs.post), "POST001", "ASSET001", rule, "field '" + fs.field + "'", sp);
    }
    const Type* selft = d.find(self);
    for (const auto& ov : d.overrides_of(self)) {
      const std::string& f = *ov.key.field;
      bool spec = std::any_of(sig.field_specs.begin(), sig.field_specs.end(),
                              [&](const FieldSpec& s) { return s.field == f; });
      if (spec) continue;
      auto fd = selft ? j_.intersect_field(*selft, f) : std::nullopt;
      if (!fd || !j_.subtype(ov.type, fd->type) || !j_.same_ownership(ov.type, fd->type))
        throw CheckFailure("PACK001", rule, "field '" + f + "' ends with type " + render_type(ov.type), sp);
    }
  } else if (!d.overrides_of(self).empty()) {
    std::string bad;
    if (!overrides_consistent(d, sc, &bad)) throw CheckFailure("PACK001", rule, bad, sp);
    d.erase_overrides_of(self);
    body = mk(ex::Let{"__ret", sig.ret, body,
                      mk(ex::Let{"__pack", Type::make_unit(), mk(ex::Pack{}, sp),
                                 mk(ex::Simple{Binding::var("__ret")}, sp)},
                         sp)},
              sp);
  }
  coerce(lookup(d, self, sp), Type::ref(self_c, sig.this_post), "POST001", "ASSET001", rule, "this", sp);
  for (const auto& p : sig.params)
    coerce(lookup(d, Binding::var(p.name), sp), p.type.with_mode(p.post), "POST001", "ASSET001", rule,
           "parameter '" + p.name + "'", sp);
  return Transaction{sig, body};
}

// ---------------------------------------------------------------------------
// whole programs

namespace {

struct Collector {
  std::vector<Diagnostic> diags;
  template <class F>
  bool run(F&& f) {
    try {
      f();
      return true;
    } catch (const CheckFailure& e) {
      diags.push_back(e.diagnostic());
      return false;
    }
  }
};

void add_generics(const Decls& decls, GenericContext& gamma, std::vector<GenericParam>& params) {
  for (auto& g : params) {
    for (const auto& q : gamma)
      if (q.decl_var == g.decl_var || q.perm_var == g.perm_var || q.decl_var == g.perm_var ||
          q.perm_var == g.decl_var)
        throw CheckFailure("GEN005", "genericsOk", "generic parameter name reused in " + g.decl_var + "@" + g.perm_var,
                           g.span);
    if (g.decl_var == g.perm_var)
      throw CheckFailure("GEN005", "genericsOk", "declaration and permission variable share a name", g.span);
    ContractRef b = g.bound_iface;
    if (b.is_var() || (b.args.empty() && find_decl_var(gamma, b.name)))
      throw CheckFailure("GEN005", "genericsOk", "bound of " + g.decl_var + " must be an interface", g.span);
    if (!decls.interface(b.name))
      throw CheckFailure("GEN005", "genericsOk",
                         "bound '" + b.name + "' of " + g.decl_var + " is not an interface", g.span);
    GenericContext with_self = gamma;
    with_self.push_back(g);
    for (auto& a : b.args) a = resolve_type(decls, gamma, a, g.span);
    const auto* ig = decls.generics_of(b.name);
    if (ig->size() != b.args.size())
      throw CheckFailure("GEN003", "genericsOk", "wrong number of type arguments for bound " + b.name, g.span);
    g.bound_iface = b;
    Mode bm = g.bound_mode;
    if (bm.kind == Mode::Kind::Name && bm.name == g.perm_var)
      throw CheckFailure("GEN005", "genericsOk", "bound mode of " + g.perm_var + " refers to itself", g.span);
    g.bound_mode = resolve_mode(decls, gamma, b, bm, g.span);
    gamma.push_back(g);
  }
}

ExprPtr resolve_expr(const Decls& decls, const GenericContext& gamma, const ExprPtr& e) {
  if (!e) return e;
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using N = std::decay_t<decltype(n)>;
        N c = n;
        if constexpr (std::is_same_v<N, ex::Let>) {
          c.type = resolve_type(decls, gamma, n.type, e->span);
          c.bound = resolve_expr(decls, gamma, n.bound);
          c.body = resolve_expr(decls, gamma, n.body);
        } else if constexpr (std::is_same_v<N, ex::Invoke>) {
          for (auto& t : c.targs) t = resolve_type(decls, gamma, t, e->span);
        } else if constexpr (std::is_same_v<N, ex::New>) {
          c.contract = resolve_contract(decls, gamma, n.contract, e->span);
          if (c.contract.is_var() || !decls.contract(c.contract.name))
            throw CheckFailure("DECL001", "T-new", "'" + render_contract(c.contract) + "' is not a contract",
                               e->span);
          if (!has_state(decls, c.contract.name, n.state))
            throw CheckFailure("GEN002", "T-new", "unknown state '" + n.state + "' of " + c.contract.name, e->span);
        } else if constexpr (std::is_same_v<N, ex::DynCheck>) {
          c.then_e = resolve_expr(decls, gamma, n.then_e);
          c.else_e = resolve_expr(decls, gamma, n.else_e);
        } else {
          return e;
        }
        return mk(std::move(c), e->span);
      },
      e->node);
}

bool is_fieldless_dup(const std::vector<FieldDecl>& fs, std::string* dup) {
  for (std::size_t i = 0; i < fs.size(); ++i)
    for (std::size_t k = i + 1; k < fs.size(); ++k)
      if (fs[i].name == fs[k].name) {
        *dup = fs[i].name;
        return true;
      }
  return false;
}

void resolve_sig(const Decls& decls, const GenericContext& outer, const ContractRef& owner,
                 const std::vector<FieldDecl>* common_fields, TransactionSig& s) {
  GenericContext gamma = outer;
  add_generics(decls, gamma, s.generics);
  s.this_pre = resolve_mode(decls, gamma, owner, s.this_pre, s.span);
  s.this_post = resolve_mode(decls, gamma, owner, s.this_post, s.span);
  s.ret = resolve_type(decls, gamma, s.ret, s.span);
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    auto& p = s.params[i];
    if (p.name == "this")
      throw CheckFailure("SYN003", "T ok", "parameter may not be named this", s.span);
    for (std::size_t k = 0; k < i; ++k)
      if (s.params[k].name == p.name)
        throw CheckFailure("SYN003", "T ok", "duplicate parameter '" + p.name + "'", s.span);
    p.type = resolve_type(decls, gamma, p.type, s.span);
    if (p.type.unit) {
      p.post = p.type.mode;
      continue;
    }
    p.post = resolve_mode(decls, gamma, p.type.contract, p.post, s.span);
  }
  for (auto& fs : s.field_specs) {
    const FieldDecl* fd = nullptr;
    if (common_fields)
      for (const auto& f : *common_fields)
        if (f.name == fs.field) fd = &f;
    if (!fd || fd->type.unit)
      throw CheckFailure("FLD002", "PrivateTransactionOK",
                         "'" + fs.field + "' is not a field declared in every state", s.span);
    fs.pre = resolve_mode(decls, gamma, fd->type.contract, fs.pre, s.span);
    fs.post = resolve_mode(decls, gamma, fd->type.contract, fs.post, s.span);
  }
}

}  // namespace

CheckedProgram check_program(const Program& parsed) {
  CheckedProgram out;
  Collector col;
  Program p = desugar(parsed);

  // generic headers
  {
    Decls raw(p);
    for (auto& i : p.interfaces)
      col.run([&] {
        GenericContext g;
        add_generics(raw, g, i.generics);
      });
    for (auto& c : p.contracts)
      col.run([&] {
        GenericContext g;
        add_generics(raw, g, c.generics);
      });
  }
  if (!col.diags.empty()) {
    out.diagnostics = col.diags;
    return out;
  }

  // types in fields, signatures and bodies
  {
    Decls hdr(p);
    for (auto& i : p.interfaces) {
      GenericContext g = i.generics;
      for (auto& st : i.states)
        for (auto& f : st.fields) col.run([&] { f.type = resolve_type(hdr, g, f.type, f.span); });
      ContractRef owner = ContractRef::concrete(i.name, {});
      for (const auto& gp : i.generics) owner.args.push_back(gp.as_type());
      for (auto& s : i.signatures) col.run([&] { resolve_sig(hdr, g, owner, nullptr, s); });
    }
    for (auto& c : p.contracts) {
      GenericContext g = c.generics;
      for (auto& st : c.states)
        for (auto& f : st.fields) col.run([&] { f.type = resolve_type(hdr, g, f.type, f.span); });
      if (c.implements)
        col.run([&] {
          ContractRef r = resolve_contract(hdr, g, *c.implements, c.span);
          if (r.is_var() || !hdr.interface(r.name))
            throw CheckFailure("DECL001", "CL ok", "'" + render_contract(r) + "' is not an interface", c.span);
          c.implements = r;
        });
    }
    if (!col.diags.empty()) {
      out.diagnostics = col.diags;
      return out;
    }
    Decls fields(p);
    for (auto& c : p.contracts) {
      GenericContext g = c.generics;
      ContractRef owner = ContractRef::concrete(c.name, {});
      for (const auto& gp : c.generics) owner.args.push_back(gp.as_type());
      Judgments j(fields, g);
      std::vector<FieldDecl> common;
      if (!c.states.empty()) common = j.fields_of(Type::ref(owner, Mode::unowned()), FieldSelector::Intersect);
      for (auto& t : c.transactions)
        col.run([&] {
          resolve_sig(fields, g, owner, &common, t.sig);
          GenericContext tg = g;
          tg.insert(tg.end(), t.sig.generics.begin(), t.sig.generics.end());
          t.body = resolve_expr(fields, tg, t.body);
        });
    }
    col.run([&] { p.main = resolve_expr(fields, {}, p.main); });
  }
  if (!col.diags.empty()) {
    out.diagnostics = col.diags;
    return out;
  }

  auto table = std::make_shared<Decls>(p);
  const Decls& decls = *table;

  // well-formedness
  for (const auto& i : decls.program().interfaces) {
    Judgments j(decls, i.generics);
    for (const auto& g : i.generics)
      col.run([&] { j.check_subs_ok(g.bound_type(), g, g.span); });
    for (const auto& st : i.states)
      col.run([&] {
        std::string dup;
        if (is_fieldless_dup(st.fields, &dup))
          throw CheckFailure("WF004", "ST ok", "duplicate field '" + dup + "' in state " + st.name, st.span);
      });
  }
  for (const auto& c : decls.program().contracts) {
    Judgments j(decls, c.generics);
    if (c.states.empty())
      col.diags.push_back({Diagnostic::Severity::Error, "WF003", c.span, "CL ok",
                           "contract " + c.name + " declares no states"});
    for (const auto& st : c.states)
      col.run([&] {
        std::string dup;
        if (is_fieldless_dup(st.fields, &dup))
          throw CheckFailure("WF004", "ST ok", "duplicate field '" + dup + "' in state " + st.name, st.span);
        if (!st.asset)
          for (const auto& f : st.fields)
            if (j.is_asset(f.type))
              throw CheckFailure("WF005", "ST ok",
                                 "state " + st.name + " holds asset field '" + f.name + "' but is not an asset",
                                 f.span);
        for (const auto& f : st.fields)
          if (!f.type.unit && !f.type.contract.is_var()) {
            const auto* gs = decls.generics_of(f.type.contract.name);
            j.check_type_args(*gs, f.type.contract.args, f.span);
          }
      });
    if (c.implements) {
      const InterfaceDecl* iface = decls.interface(c.implements->name);
      col.run([&] { j.check_type_args(iface->generics, c.implements->args, c.span); });
      for (const auto& ist : iface->states)
        col.run([&] {
          const StateDecl* own = c.find_state(ist.name);
          if (!own)
            throw CheckFailure("WF001", "CL ok",
                               c.name + " lacks state " + ist.name + " required by " + iface->name, c.span);
          if (own->asset && !ist.asset)
            throw CheckFailure("WF002", "implementOk",
                               "asset state " + ist.name + " implements a non-asset state of " + iface->name,
                               own->span);
        });
      for (const auto& isig : iface->signatures)
        col.run([&] {
          const Transaction* t = c.find_transaction(isig.name);
          if (!t)
            throw CheckFailure("WF001", "CL ok",
                               c.name + " lacks transaction " + isig.name + " required by " + iface->name, c.span);
          TransactionSig want = subst_sig(isig, iface->generics, c.implements->args);
          const TransactionSig& have = t->sig;
          bool ok = want.params.size() == have.params.size() && want.is_private == have.is_private &&
                    want.generics.size() == have.generics.size();
          GenericContext tg = c.generics;
          tg.insert(tg.end(), have.generics.begin(), have.generics.end());
          Judgments jt(decls, tg);
          if (ok) {
            std::vector<Type> own_targs;
            for (const auto& g : have.generics) own_targs.push_back(g.as_type());
            want = subst_sig(want, want.generics, own_targs);
            for (std::size_t i = 0; i < want.params.size() && ok; ++i) {
              ok = jt.subtype(want.params[i].type, have.params[i].type) &&
                   jt.subpermission(have.params[i].post, want.params[i].post);
            }
            ok = ok && jt.subpermission(want.this_pre, have.this_pre) &&
                 jt.subpermission(have.this_post, want.this_post) && jt.subtype(have.ret, want.ret);
          }
          if (!ok)
            throw CheckFailure("WF001", "implementOk",
                               "transaction " + isig.name + " does not implement the signature in " + iface->name,
                               have.span);
        });
    }
  }
  for (const auto& c : decls.program().contracts)
    for (const auto& t : c.transactions)
      for (const auto& g : t.sig.generics)
        col.run([&] {
          GenericContext tg = c.generics;
          tg.insert(tg.end(), t.sig.generics.begin(), t.sig.generics.end());
          Judgments(decls, tg).check_subs_ok(g.bound_type(), g, g.span);
        });
  if (!col.diags.empty()) {
    out.diagnostics = col.diags;
    return out;
  }

  // transaction bodies and main
  Program elaborated = decls.program();
  for (auto& c : elaborated.contracts) {
    const ContractDecl* orig = decls.contract(c.name);
    for (std::size_t k = 0; k < c.transactions.size(); ++k) {
      const Transaction& t = orig->transactions[k];
      GenericContext tg = orig->generics;
      tg.insert(tg.end(), t.sig.generics.begin(), t.sig.generics.end());
      col.run([&] { c.transactions[k] = Checker(decls, tg).check_transaction(*orig, t); });
    }
  }
  col.run([&] {
    CheckResult r = Checker(decls, {}).check({}, elaborated.main, std::nullopt);
    elaborated.main = r.elaborated;
    out.main_type = r.type;
  });
  if (!col.diags.empty()) {
    out.diagnostics = col.diags;
    return out;
  }
  out.main = elaborated.main;
  out.decls = std::make_shared<Decls>(std::move(elaborated));
  return out;
}

}  // namespace silica
