#include "silica/judgments.hpp"

#include <algorithm>

namespace silica {

Decls::Decls(Program desugared) : prog_(std::move(desugared)) {}

const ContractDecl* Decls::contract(const std::string& name) const {
  for (const auto& c : prog_.contracts)
    if (c.name == name) return &c;
  return nullptr;
}

const InterfaceDecl* Decls::interface(const std::string& name) const {
  for (const auto& i : prog_.interfaces)
    if (i.name == name) return &i;
  return nullptr;
}

const std::vector<GenericParam>* Decls::generics_of(const std::string& name) const {
  if (auto c = contract(name)) return &c->generics;
  if (auto i = interface(name)) return &i->generics;
  return nullptr;
}

const std::vector<StateDecl>* Decls::states_of(const std::string& name) const {
  if (auto c = contract(name)) return &c->states;
  if (auto i = interface(name)) return &i->states;
  return nullptr;
}

std::vector<std::string> Decls::state_names(const std::string& name) const {
  std::vector<std::string> out;
  if (auto st = states_of(name))
    for (const auto& s : *st) out.push_back(s.name);
  std::sort(out.begin(), out.end());
  return out;
}

bool Decls::state_is_asset(const std::string& decl, const std::string& state) const {
  if (auto st = states_of(decl))
    for (const auto& s : *st)
      if (s.name == state) return s.asset;
  return false;
}

// ---------------------------------------------------------------------------

const GenericParam* Judgments::perm_param(const std::string& p) const {
  for (const auto& g : gamma_)
    if (g.perm_var == p) return &g;
  return nullptr;
}

const GenericParam* Judgments::decl_param(const std::string& x) const {
  for (const auto& g : gamma_)
    if (g.decl_var == x) return &g;
  return nullptr;
}

namespace {

void require_resolved(const Mode& m) {
  if (m.kind == Mode::Kind::Name) throw std::logic_error("unresolved mode name '" + m.name + "'");
}

bool subset(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

bool Judgments::subpermission(const Mode& m1, const Mode& m2) const {
  require_resolved(m1);
  require_resolved(m2);
  const Mode* cur = &m1;
  for (int depth = 0; depth < 64; ++depth) {
    if (*cur == m2) return true;
    if (cur->is_var()) {
      const GenericParam* g = perm_param(cur->name);
      if (!g) throw CheckFailure("GEN001", "subpermission", "unknown permission variable '" + cur->name + "'");
      cur = &g->bound_mode;
      continue;
    }
    const Mode& a = *cur;
    if (m2.is_var()) {
      if (!perm_param(m2.name))
        throw CheckFailure("GEN001", "subpermission", "unknown permission variable '" + m2.name + "'");
      // O-* does not reach variables bounded by a state set.
      if (bound_perm(m2).is_states()) return false;
      return a.is_states() || a.is_perm(Permission::Owned);
    }
    if (m2.is_perm(Permission::Unowned)) return true;
    if (a.is_states()) return m2.is_states() ? subset(a.states, m2.states) : true;
    if (a.is_perm(Permission::Owned)) return !m2.is_states();
    if (a.is_perm(Permission::Shared)) return m2.is_perm(Permission::Shared);
    return false;
  }
  return false;
}

Mode Judgments::bound_perm(const Mode& m) const {
  const Mode* cur = &m;
  for (int depth = 0; depth < 64 && cur->is_var(); ++depth) {
    const GenericParam* g = perm_param(cur->name);
    if (!g) throw CheckFailure("GEN001", "bound", "unknown permission variable '" + cur->name + "'");
    cur = &g->bound_mode;
  }
  return *cur;
}

Type Judgments::bound(const Type& t) const {
  if (t.unit) return t;
  if (t.contract.is_var()) {
    const GenericParam* g = decl_param(t.contract.name);
    if (!g) throw CheckFailure("GEN001", "bound", "unknown declaration variable '" + t.contract.name + "'");
    return Type::ref(g->bound_iface, bound_perm(t.mode));
  }
  return Type::ref(t.contract, bound_perm(t.mode));
}

std::optional<ContractRef> Judgments::implemented_interface(const ContractRef& c) const {
  if (c.is_var()) return std::nullopt;
  const ContractDecl* cd = decls_.contract(c.name);
  if (!cd || !cd->implements) return std::nullopt;
  return subst_contract(*cd->implements, cd->generics, c.args);
}

bool Judgments::subtype(const Type& t1, const Type& t2) const {
  if (t1.unit || t2.unit) return t1.unit && t2.unit;
  if (t1.contract == t2.contract) return subpermission(t1.mode, t2.mode);
  if (t1.contract.is_var()) {
    const GenericParam* g = decl_param(t1.contract.name);
    if (!g) throw CheckFailure("GEN001", "subtype", "unknown declaration variable '" + t1.contract.name + "'");
    if (g->bound_iface == t2.contract) return subpermission(t1.mode, t2.mode);
    return false;
  }
  if (auto iface = implemented_interface(t1.contract); iface && *iface == t2.contract)
    return subpermission(t1.mode, t2.mode);
  return false;
}

bool Judgments::same_ownership(const Type& t1, const Type& t2) const {
  return maybe_owned(t1) == maybe_owned(t2);
}

std::vector<std::string> Judgments::possible_states_of_mode(const ContractRef& c, const Mode& m,
                                                            int depth) const {
  require_resolved(m);
  std::string decl = c.name;
  if (c.is_var()) {
    const GenericParam* g = decl_param(c.name);
    if (!g) throw CheckFailure("GEN001", "possibleStates", "unknown declaration variable '" + c.name + "'");
    decl = g->bound_iface.name;
  }
  if (m.is_states()) return m.states;
  if (m.is_perm()) return decls_.state_names(decl);
  if (depth > 64) return {};
  const GenericParam* g = perm_param(m.name);
  if (!g) throw CheckFailure("GEN001", "possibleStates", "unknown permission variable '" + m.name + "'");
  return possible_states_of_mode(c, g->bound_mode, depth + 1);
}

std::vector<std::string> Judgments::possible_states(const Type& t) const {
  if (t.unit) return {};
  return possible_states_of_mode(t.contract, t.mode, 0);
}

bool Judgments::is_asset(const Type& t) const {
  if (t.unit) return false;
  if (t.contract.is_var()) {
    const GenericParam* g = decl_param(t.contract.name);
    if (!g) throw CheckFailure("GEN001", "isAsset", "unknown declaration variable '" + t.contract.name + "'");
    return g->asset;
  }
  for (const auto& s : possible_states(t))
    if (decls_.state_is_asset(t.contract.name, s)) return true;
  return false;
}

bool Judgments::maybe_owned(const Type& t) const {
  if (t.unit) return false;
  if (t.mode.is_var()) return true;
  return subpermission(t.mode, Mode::owned());
}

bool Judgments::disposable(const Type& t) const { return !maybe_owned(t) || !is_asset(t); }

Classification Judgments::classify(const Type& t) const {
  Classification c;
  c.is_asset = is_asset(t);
  c.maybe_owned = maybe_owned(t);
  c.disposable = !c.maybe_owned || !c.is_asset;
  return c;
}

SplitResult Judgments::split(const Type& t, const SplitDemand& d) const {
  if (t.unit) {
    if (d.expected && !d.expected->unit)
      throw CheckFailure("SPL001", "split", "unit cannot satisfy expected " + render_type(*d.expected));
    return {t, t};
  }
  const Type unowned = t.with_mode(Mode::unowned());
  if (!d.expected) {
    if (t.mode.is_perm(Permission::Shared)) return {t, t};
    return {t, unowned};
  }
  const Type& e = *d.expected;
  std::vector<SplitResult> candidates;
  if (t.mode.is_perm(Permission::Shared)) candidates.push_back({t, t});
  if (!is_asset(t) && maybe_owned(t)) {
    Type sh = t.with_mode(Mode::shared());
    candidates.push_back({sh, sh});
  }
  candidates.push_back({t, unowned});
  for (const auto& c : candidates)
    if (subtype(c.taken, e)) return c;
  throw CheckFailure("SPL001", "split",
                     "no split of " + render_type(t) + " yields a subtype of " + render_type(e));
}

std::vector<FieldDecl> Judgments::state_fields(const ContractRef& c, const std::string& state) const {
  if (c.is_var()) return {};
  const ContractDecl* cd = decls_.contract(c.name);
  if (!cd) return {};  // interfaces declare no fields
  const StateDecl* st = cd->find_state(state);
  if (!st) throw CheckFailure("GEN002", "stateFields", "unknown state '" + state + "' of " + c.name);
  std::vector<FieldDecl> out = st->fields;
  for (auto& f : out) f.type = subst_type(f.type, cd->generics, c.args);
  return out;
}

std::vector<FieldDecl> Judgments::fields_of(const Type& t, FieldSelector sel, const std::string& state) const {
  if (t.unit) return {};
  if (sel == FieldSelector::State) return state_fields(t.contract, state);
  if (sel == FieldSelector::Contract) return fields_of(t.with_mode(Mode::unowned()), FieldSelector::Intersect);
  auto states = possible_states(t);
  std::vector<FieldDecl> out;
  if (sel == FieldSelector::Union) {
    for (const auto& s : states)
      for (const auto& f : state_fields(t.contract, s))
        if (std::none_of(out.begin(), out.end(), [&](const FieldDecl& g) { return g.name == f.name; }))
          out.push_back(f);
    return out;
  }
  if (states.empty()) return {};
  for (const auto& f : state_fields(t.contract, states[0])) {
    bool everywhere = true;
    for (std::size_t i = 1; i < states.size() && everywhere; ++i) {
      auto fs = state_fields(t.contract, states[i]);
      everywhere = std::any_of(fs.begin(), fs.end(), [&](const FieldDecl& g) { return g.name == f.name; });
    }
    if (everywhere) out.push_back(f);
  }
  return out;
}

std::optional<FieldDecl> Judgments::intersect_field(const Type& t, const std::string& f) const {
  for (const auto& fd : fields_of(t, FieldSelector::Intersect))
    if (fd.name == f) return fd;
  return std::nullopt;
}

namespace {

std::optional<Mode> join_modes(const Mode& a, const Mode& b) {
  if (a == b) return a;
  if (a.is_perm(Permission::Owned) && b.is_states()) return a;
  if (b.is_perm(Permission::Owned) && a.is_states()) return b;
  if ((a.is_perm(Permission::Shared) && b.is_perm(Permission::Unowned)) ||
      (b.is_perm(Permission::Shared) && a.is_perm(Permission::Unowned)))
    return Mode::unowned();
  if (a.is_states() && b.is_states()) {
    std::vector<std::string> u;
    std::set_union(a.states.begin(), a.states.end(), b.states.begin(), b.states.end(), std::back_inserter(u));
    return Mode::of_states(u);
  }
  return std::nullopt;
}

}  // namespace

std::optional<Type> Judgments::join(const Type& t1, const Type& t2) const {
  if (t1.unit || t2.unit) {
    if (t1.unit && t2.unit) return t1;
    return std::nullopt;
  }
  std::optional<ContractRef> head;
  if (t1.contract == t2.contract) {
    head = t1.contract;
  } else if (auto i1 = implemented_interface(t1.contract); i1 && *i1 == t2.contract) {
    head = t2.contract;
  } else if (auto i2 = implemented_interface(t2.contract); i2 && *i2 == t1.contract) {
    head = t1.contract;
  }
  if (!head) return std::nullopt;
  auto m = join_modes(t1.mode, t2.mode);
  if (!m) return std::nullopt;
  return Type::ref(*head, *m);
}

namespace {

std::string key_name(const TypingContext::Key& k) {
  return render_binding(k.b) + (k.field ? "." + *k.field : std::string());
}

}  // namespace

TypingContext Judgments::merge(const TypingContext& d1, const TypingContext& d2) const {
  TypingContext out;
  for (const auto& e : d1.entries()) {
    if (const Type* other = d2.find(e.key)) {
      auto j = join(e.type, *other);
      if (!j)
        throw CheckFailure("MRG002", "merge",
                           "cannot merge " + key_name(e.key) + ": " + render_type(e.type) + " and " +
                               render_type(*other));
      out.set(e.key, *j);
    } else if (!disposable(e.type)) {
      throw CheckFailure("MRG001", "merge",
                         key_name(e.key) + ": " + render_type(e.type) + " is owned in only one branch");
    }
  }
  for (const auto& e : d2.entries()) {
    if (d1.find(e.key)) continue;
    if (!disposable(e.type))
      throw CheckFailure("MRG001", "merge",
                         key_name(e.key) + ": " + render_type(e.type) + " is owned in only one branch");
  }
  return out;
}

FuncArgResult Judgments::func_arg(const Type& passed, const Mode& declared_in, const Mode& declared_out) const {
  if (passed.unit) return {passed, passed};
  if (declared_in.is_perm(Permission::Unowned)) {
    if (maybe_owned(passed)) return {passed, passed};
    if (passed.mode.is_perm(Permission::Shared)) return {passed, passed};
  }
  return {passed.with_mode(declared_out), passed.with_mode(Mode::unowned())};
}

void Judgments::check_subs_ok(const Type& arg, const GenericParam& param, const SourceSpan& span) const {
  if (arg.unit) throw CheckFailure("GEN004", "subsOk", "unit cannot instantiate " + param.decl_var, span);
  if (!subtype(arg, param.bound_type()))
    throw CheckFailure("GEN004", "subsOk",
                       render_type(arg) + " is not a subtype of the bound " + render_type(param.bound_type()) +
                           " of " + param.decl_var,
                       span);
  if (!param.asset && is_asset(arg.with_mode(Mode::owned())))
    throw CheckFailure("GEN004", "subsOk",
                       "asset " + render_contract(arg.contract) + " passed for non-asset parameter " +
                           param.decl_var,
                       span);
}

void Judgments::check_type_args(const std::vector<GenericParam>& params, const std::vector<Type>& args,
                                const SourceSpan& span) const {
  if (params.size() != args.size())
    throw CheckFailure("GEN003", "subsOk",
                       "expected " + std::to_string(params.size()) + " type arguments, got " +
                           std::to_string(args.size()),
                       span);
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::vector<GenericParam> prefix(params.begin(), params.begin() + static_cast<long>(i));
    std::vector<Type> prefix_args(args.begin(), args.begin() + static_cast<long>(i));
    GenericParam p = params[i];
    p.bound_iface = subst_contract(p.bound_iface, prefix, prefix_args);
    p.bound_mode = subst_mode(p.bound_mode, prefix, prefix_args);
    check_subs_ok(args[i], p, span);
  }
}

Permission Judgments::to_permission(const Mode& m) {
  if (m.is_perm()) return m.perm;
  return Permission::Owned;
}

// ---------------------------------------------------------------------------
// substitution

namespace {

Mode subst_mode1(const Mode& m, const GenericParam& g, const Type& arg) {
  if (m.is_var() && m.name == g.perm_var && !arg.unit) return arg.mode;
  return m;
}

Type subst_type1(const Type& t, const GenericParam& g, const Type& arg);

ContractRef subst_contract1(const ContractRef& c, const GenericParam& g, const Type& arg) {
  if (c.is_var()) {
    if (c.name == g.decl_var && !arg.unit) return arg.contract;
    return c;
  }
  ContractRef out = c;
  for (auto& a : out.args) a = subst_type1(a, g, arg);
  return out;
}

Type subst_type1(const Type& t, const GenericParam& g, const Type& arg) {
  if (t.unit) return t;
  return Type::ref(subst_contract1(t.contract, g, arg), subst_mode1(t.mode, g, arg));
}

}  // namespace

Type subst_type(const Type& t, const std::vector<GenericParam>& params, const std::vector<Type>& args) {
  Type out = t;
  for (std::size_t i = 0; i < params.size() && i < args.size(); ++i) out = subst_type1(out, params[i], args[i]);
  return out;
}

Mode subst_mode(const Mode& m, const std::vector<GenericParam>& params, const std::vector<Type>& args) {
  Mode out = m;
  for (std::size_t i = 0; i < params.size() && i < args.size(); ++i) out = subst_mode1(out, params[i], args[i]);
  return out;
}

ContractRef subst_contract(const ContractRef& c, const std::vector<GenericParam>& params,
                           const std::vector<Type>& args) {
  ContractRef out = c;
  for (std::size_t i = 0; i < params.size() && i < args.size(); ++i)
    out = subst_contract1(out, params[i], args[i]);
  return out;
}

TransactionSig subst_sig(const TransactionSig& s, const std::vector<GenericParam>& params,
                         const std::vector<Type>& args) {
  if (params.empty()) return s;
  TransactionSig out = s;
  out.ret = subst_type(s.ret, params, args);
  out.this_pre = subst_mode(s.this_pre, params, args);
  out.this_post = subst_mode(s.this_post, params, args);
  for (auto& p : out.params) {
    p.type = subst_type(p.type, params, args);
    p.post = subst_mode(p.post, params, args);
  }
  for (auto& f : out.field_specs) {
    f.pre = subst_mode(f.pre, params, args);
    f.post = subst_mode(f.post, params, args);
  }
  for (auto& g : out.generics) {
    g.bound_iface = subst_contract(g.bound_iface, params, args);
    g.bound_mode = subst_mode(g.bound_mode, params, args);
  }
  return out;
}

ExprPtr subst_expr_types(const ExprPtr& e, const std::vector<GenericParam>& params,
                         const std::vector<Type>& args) {
  if (params.empty() || !e) return e;
  auto st = [&](const Type& t) { return subst_type(t, params, args); };
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using N = std::decay_t<decltype(n)>;
        N c = n;
        if constexpr (std::is_same_v<N, ex::Invoke>) {
          for (auto& t : c.targs) t = st(t);
        } else if constexpr (std::is_same_v<N, ex::Let>) {
          c.type = st(c.type);
          c.bound = subst_expr_types(c.bound, params, args);
          c.body = subst_expr_types(c.body, params, args);
        } else if constexpr (std::is_same_v<N, ex::New>) {
          c.contract = subst_contract(c.contract, params, args);
        } else if constexpr (std::is_same_v<N, ex::StaticAssert>) {
          c.mode = subst_mode(c.mode, params, args);
        } else if constexpr (std::is_same_v<N, ex::DynCheck>) {
          c.mode = subst_mode(c.mode, params, args);
          c.then_e = subst_expr_types(c.then_e, params, args);
          c.else_e = subst_expr_types(c.else_e, params, args);
        } else if constexpr (std::is_same_v<N, ex::StateLockBox> || std::is_same_v<N, ex::ReentrancyBox>) {
          c.body = subst_expr_types(c.body, params, args);
        } else {
          return e;
        }
        return mk(std::move(c), e->span);
      },
      e->node);
}

ExprPtr subst_var(const ExprPtr& e, const std::string& x, const Binding& b) {
  if (!e) return e;
  auto sb = [&](const Binding& v) { return v.is_var() && v.name == x ? b : v; };
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using N = std::decay_t<decltype(n)>;
        N c = n;
        if constexpr (std::is_same_v<N, ex::Simple>) {
          c.b = sb(c.b);
        } else if constexpr (std::is_same_v<N, ex::FieldRead>) {
          c.recv = sb(c.recv);
        } else if constexpr (std::is_same_v<N, ex::Invoke>) {
          c.recv = sb(c.recv);
          for (auto& a : c.args) a = sb(a);
        } else if constexpr (std::is_same_v<N, ex::Let>) {
          c.bound = subst_var(c.bound, x, b);
          if (c.var != x) c.body = subst_var(c.body, x, b);
        } else if constexpr (std::is_same_v<N, ex::New>) {
          for (auto& a : c.args) a = sb(a);
        } else if constexpr (std::is_same_v<N, ex::Transition>) {
          c.recv = sb(c.recv);
          for (auto& a : c.args) a = sb(a);
        } else if constexpr (std::is_same_v<N, ex::FieldWrite>) {
          c.recv = sb(c.recv);
          c.src = sb(c.src);
        } else if constexpr (std::is_same_v<N, ex::StaticAssert> || std::is_same_v<N, ex::Disown>) {
          c.b = sb(c.b);
        } else if constexpr (std::is_same_v<N, ex::DynCheck>) {
          c.b = sb(c.b);
          c.then_e = subst_var(c.then_e, x, b);
          c.else_e = subst_var(c.else_e, x, b);
        } else if constexpr (std::is_same_v<N, ex::StateLockBox>) {
          c.body = subst_var(c.body, x, b);
          c.scrutinee = sb(c.scrutinee);
        } else if constexpr (std::is_same_v<N, ex::ReentrancyBox>) {
          c.body = subst_var(c.body, x, b);
        } else {
          return e;
        }
        return mk(std::move(c), e->span);
      },
      e->node);
}

LookedUpTransaction lookup_transaction(const Judgments& j, const std::string& name,
                                       const std::vector<Type>& targs, const Type& receiver,
                                       const SourceSpan& span) {
  Type b = j.bound(receiver);
  const ContractRef& head = b.contract;
  LookedUpTransaction out;
  out.owner = head;
  const std::vector<GenericParam>* owner_generics = j.decls().generics_of(head.name);
  if (!owner_generics) throw CheckFailure("DECL001", "T-inv", "unknown declaration '" + head.name + "'", span);
  if (const ContractDecl* cd = j.decls().contract(head.name)) {
    const Transaction* t = cd->find_transaction(name);
    if (!t) throw CheckFailure("TXN001", "T-inv", "no transaction '" + name + "' on " + head.name, span);
    out.sig = t->sig;
    out.body = t->body;
  } else {
    const InterfaceDecl* id = j.decls().interface(head.name);
    const TransactionSig* s = id->find_signature(name);
    if (!s) throw CheckFailure("TXN001", "T-inv", "no transaction '" + name + "' on " + head.name, span);
    out.sig = *s;
  }
  out.sig = subst_sig(out.sig, *owner_generics, head.args);
  out.body = subst_expr_types(out.body, *owner_generics, head.args);
  j.check_type_args(out.sig.generics, targs, span);
  auto tg = out.sig.generics;
  out.sig = subst_sig(out.sig, tg, targs);
  out.body = subst_expr_types(out.body, tg, targs);
  return out;
}

}  // namespace silica
