#include "silica/interpreter.hpp"

#include <algorithm>
#include <sstream>

namespace silica {

namespace {

[[noreturn]] void internal(const std::string& what) { throw InternalError(what); }

ObjId object_of(const RuntimeConfig& sigma, const Binding& b) {
  if (b.is_object()) {
    if (!sigma.heap.count(b.id)) internal("dangling object o" + std::to_string(b.id));
    return b.id;
  }
  if (!b.is_indirect()) internal("free variable '" + b.name + "' in a running expression");
  auto it = sigma.env.find(b.id);
  if (it == sigma.env.end()) internal("dangling reference l" + std::to_string(b.id));
  if (it->second.unit) internal("l" + std::to_string(b.id) + " holds unit where an object is required");
  if (!sigma.heap.count(it->second.obj)) internal("dangling object o" + std::to_string(it->second.obj));
  return it->second.obj;
}

Value value_of_binding(const RuntimeConfig& sigma, const Binding& b) {
  if (b.is_object()) return Value::object(object_of(sigma, b));
  if (!b.is_indirect()) internal("free variable '" + b.name + "' in a running expression");
  auto it = sigma.env.find(b.id);
  if (it == sigma.env.end()) internal("dangling reference l" + std::to_string(b.id));
  return it->second;
}

std::size_t field_index(const Judgments& j, const HeapObject& obj, const std::string& f) {
  auto fields = j.state_fields(obj.type, obj.state);
  for (std::size_t i = 0; i < fields.size(); ++i)
    if (fields[i].name == f) {
      if (i >= obj.fields.size()) internal("object has fewer fields than its state declares");
      return i;
    }
  internal("no field '" + f + "' in " + obj.type.name + "." + obj.state);
}

bool in_states(const Mode& m, const std::string& s) {
  return std::find(m.states.begin(), m.states.end(), s) != m.states.end();
}

// Renames the permission variables tested by dynamic state checks so that
// each invocation gets its own entries in xi.
ExprPtr rename_tested_vars(const ExprPtr& e, const std::set<std::string>& vars,
                           std::map<std::string, std::string>& fresh, RuntimeConfig& sigma) {
  if (!e) return e;
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using N = std::decay_t<decltype(n)>;
        N c = n;
        if constexpr (std::is_same_v<N, ex::Let>) {
          c.bound = rename_tested_vars(n.bound, vars, fresh, sigma);
          c.body = rename_tested_vars(n.body, vars, fresh, sigma);
        } else if constexpr (std::is_same_v<N, ex::DynCheck>) {
          if (n.mode.is_var() && vars.count(n.mode.name)) {
            auto it = fresh.find(n.mode.name);
            if (it == fresh.end())
              it = fresh.emplace(n.mode.name, n.mode.name + "#" + std::to_string(sigma.perm_env.size() + fresh.size()))
                       .first;
            c.mode = Mode::var(it->second);
          }
          c.then_e = rename_tested_vars(n.then_e, vars, fresh, sigma);
          c.else_e = rename_tested_vars(n.else_e, vars, fresh, sigma);
        } else {
          return e;
        }
        return mk(std::move(c), e->span);
      },
      e->node);
}

StepOutcome stepped(std::string rule, const Expr* redex, ExprPtr next) {
  StepOutcome o;
  o.kind = StepKind::Stepped;
  o.rule = std::move(rule);
  o.redex = redex;
  o.next = std::move(next);
  return o;
}

StepOutcome produced(std::string rule, const Expr* redex, const Value& v) {
  StepOutcome o = stepped(std::move(rule), redex, value_expr(v));
  o.value = v;
  return o;
}

StepOutcome stuck(StepKind k, const Expr* redex, ObjId o, std::string detail) {
  StepOutcome s;
  s.kind = k;
  s.redex = redex;
  s.object = o;
  s.detail = std::move(detail);
  return s;
}

}  // namespace

Interpreter::Interpreter(std::shared_ptr<const Decls> decls, Faults faults)
    : decls_(std::move(decls)), j_(*decls_, {}), faults_(faults) {}

Mode Interpreter::resolve_mode(const RuntimeConfig& sigma, const Mode& m) {
  if (!m.is_var()) return m;
  auto it = sigma.perm_env.find(m.name);
  if (it == sigma.perm_env.end()) internal("permission variable '" + m.name + "' is not bound in xi");
  return it->second;
}

StepOutcome Interpreter::step(RuntimeConfig& sigma, const ExprPtr& e) const { return reduce(sigma, e, false); }

std::vector<std::string> Interpreter::applicable_rules(const RuntimeConfig& sigma, const ExprPtr& e) const {
  // Walk to the redex without touching sigma, then test every rule for that form.
  const ExprPtr* cur = &e;
  while (true) {
    const Expr& x = **cur;
    if (auto l = x.as<ex::Let>(); l && !is_value(l->bound)) {
      cur = &l->bound;
      continue;
    }
    if (auto b = x.as<ex::StateLockBox>(); b && !is_value(b->body)) {
      cur = &b->body;
      continue;
    }
    if (auto b = x.as<ex::ReentrancyBox>(); b && !is_value(b->body)) {
      cur = &b->body;
      continue;
    }
    break;
  }
  const ExprPtr& r = *cur;
  std::vector<std::string> out;
  if (is_value(r)) return out;
  if (r->is<ex::DynCheck>()) {
    RuntimeConfig copy = sigma;
    dyn_check(copy, r, true, &out);
    return out;
  }
  RuntimeConfig copy = sigma;
  StepOutcome o = reduce(copy, r, true);
  if (o.kind == StepKind::Stepped) out.push_back(o.rule);
  return out;
}

StepOutcome Interpreter::reduce(RuntimeConfig& sigma, const ExprPtr& e, bool dry) const {
  const Expr* node = e.get();
  if (is_value(e)) {
    StepOutcome o;
    o.kind = StepKind::Finished;
    o.value = *value_of(e);
    return o;
  }

  if (auto n = e->as<ex::Let>()) {
    if (!is_value(n->bound)) {
      StepOutcome o = reduce(sigma, n->bound, dry);
      if (o.kind == StepKind::Stepped) o.next = mk(ex::Let{n->var, n->type, o.next, n->body}, e->span);
      return o;
    }
    RefId l = sigma.next_ref;
    if (!dry) {
      sigma.fresh_ref();
      sigma.env[l] = *value_of(n->bound);
    }
    StepOutcome o = stepped("E-let", node, subst_var(n->body, n->var, Binding::indirect(l)));
    o.fresh = l;
    return o;
  }

  if (auto n = e->as<ex::StateLockBox>()) {
    if (!is_value(n->body)) {
      StepOutcome o = reduce(sigma, n->body, dry);
      if (o.kind == StepKind::Stepped) o.next = mk(ex::StateLockBox{o.next, n->o, n->scrutinee}, e->span);
      return o;
    }
    if (!dry && !faults_.keep_lock_at_box_exit) sigma.locks.erase(n->o);
    return stepped("E-box-phi", node, n->body);
  }

  if (auto n = e->as<ex::ReentrancyBox>()) {
    if (!is_value(n->body)) {
      StepOutcome o = reduce(sigma, n->body, dry);
      if (o.kind == StepKind::Stepped) o.next = mk(ex::ReentrancyBox{o.next, n->o, n->guards, n->frame}, e->span);
      return o;
    }
    if (!dry && n->guards) sigma.active.erase(n->o);
    return stepped("E-box-psi", node, n->body);
  }

  if (auto n = e->as<ex::Simple>()) {
    if (!n->b.is_indirect()) internal("free variable '" + render_binding(n->b) + "' in a running expression");
    return produced("E-lookup", node, value_of_binding(sigma, n->b));
  }

  if (auto n = e->as<ex::New>()) {
    HeapObject obj;
    obj.type = n->contract;
    obj.state = n->state;
    for (const auto& a : n->args) obj.fields.push_back(value_of_binding(sigma, a));
    ObjId o = sigma.next_obj;
    if (!dry) {
      sigma.fresh_object();
      sigma.heap[o] = std::move(obj);
    }
    return produced("E-new", node, Value::object(o));
  }

  if (auto n = e->as<ex::FieldRead>()) {
    ObjId o = object_of(sigma, n->recv);
    const HeapObject& obj = sigma.heap.at(o);
    return produced("E-field", node, obj.fields[field_index(j_, obj, n->field)]);
  }

  if (auto n = e->as<ex::FieldWrite>()) {
    ObjId o = object_of(sigma, n->recv);
    Value v = value_of_binding(sigma, n->src);
    if (!dry) {
      HeapObject& obj = sigma.heap.at(o);
      obj.fields[field_index(j_, obj, n->field)] = v;
    }
    return stepped("E-fieldUpdate", node, mk(ex::UnitLit{}, e->span));
  }

  if (auto n = e->as<ex::Transition>()) {
    ObjId o = object_of(sigma, n->recv);
    HeapObject& obj = sigma.heap.at(o);
    std::vector<Value> vals;
    for (const auto& a : n->args) vals.push_back(value_of_binding(sigma, a));
    if (faults_.drop_transition_field)
      for (auto& v : vals)
        if (!v.unit) {
          v = Value::unit_val();
          break;
        }
    std::string rule;
    if (n->ann == TransitionAnn::Owned) {
      rule = "E-transition-owned";
    } else if (n->ann == TransitionAnn::Shared) {
      if (sigma.locks.count(o) && obj.state != n->state && !faults_.ignore_state_lock)
        return stuck(StepKind::StuckBadTransition, node, o, n->state);
      rule = "E-transition-shared";
    } else {
      internal("unelaborated transition");
    }
    if (!dry) {
      if (!(faults_.skip_state_update && n->ann == TransitionAnn::Owned)) obj.state = n->state;
      obj.fields = std::move(vals);
    }
    return stepped(rule, node, mk(ex::UnitLit{}, e->span));
  }

  if (e->is<ex::StaticAssert>()) return stepped("E-assert", node, mk(ex::UnitLit{}, e->span));
  if (e->is<ex::Disown>()) return stepped("E-disown", node, mk(ex::UnitLit{}, e->span));
  if (e->is<ex::Pack>()) return stepped("E-pack", node, mk(ex::UnitLit{}, e->span));
  if (e->is<ex::DynCheck>()) return dyn_check(sigma, e, dry, nullptr);
  if (e->is<ex::Invoke>()) return invoke(sigma, e, dry);
  internal("no rule applies to " + summarize(e));
}

StepOutcome Interpreter::dyn_check(RuntimeConfig& sigma, const ExprPtr& e, bool dry,
                                   std::vector<std::string>* rules) const {
  const auto& n = *e->as<ex::DynCheck>();
  const Expr* node = e.get();
  ObjId o = object_of(sigma, n.b);
  const HeapObject& obj = sigma.heap.at(o);
  Judgments j0(*decls_, {});

  // Every rule for this form is tested; exactly one may hold.
  std::vector<std::pair<std::string, std::function<StepOutcome()>>> matches;
  auto add = [&](const char* rule, std::function<StepOutcome()> f) { matches.emplace_back(rule, std::move(f)); };

  CheckAnn::Kind kind = n.ann.kind;
  if (kind == CheckAnn::Kind::Perm && n.mode.is_var()) {
    add("E-IsIn-PermVar", [&] {
      Mode m = resolve_mode(sigma, n.mode);
      return stepped("E-IsIn-PermVar", node, mk(ex::DynCheck{n.b, n.ann, m, n.then_e, n.else_e}, e->span));
    });
  } else if (kind == CheckAnn::Kind::Perm && n.mode.is_perm()) {
    bool then = j0.subpermission(Mode::of(n.ann.perm), n.mode);
    if (then)
      add("E-IsIn-Perm-Then", [&] { return stepped("E-IsIn-Perm-Then", node, n.then_e); });
    else
      add("E-IsIn-Perm-Else", [&] { return stepped("E-IsIn-Perm-Else", node, n.else_e); });
  } else {
    if (kind == CheckAnn::Kind::Perm) {
      switch (n.ann.perm) {
        case Permission::Owned: kind = CheckAnn::Kind::Owned; break;
        case Permission::Shared: kind = CheckAnn::Kind::Shared; break;
        case Permission::Unowned: kind = CheckAnn::Kind::Unowned; break;
      }
    }
    if (!n.mode.is_states()) internal("state test with a non-state mode");
    bool hit = in_states(n.mode, obj.state);
    switch (kind) {
      case CheckAnn::Kind::Unowned:
        add("E-IsIn-Unowned", [&] { return stepped("E-IsIn-Unowned", node, n.else_e); });
        break;
      case CheckAnn::Kind::Owned:
        if (hit || faults_.confuse_state_check)
          add("E-IsIn-Owned-Then", [&] { return stepped("E-IsIn-Owned-Then", node, n.then_e); });
        else
          add("E-IsIn-Else", [&] { return stepped("E-IsIn-Else", node, n.else_e); });
        break;
      case CheckAnn::Kind::Shared:
        if (hit) {
          if (sigma.locks.count(o))
            return stuck(StepKind::StuckNestedStateCheck, node, o, obj.state);
          add("E-IsIn-Shared-Then", [&, o] {
            if (!dry) sigma.locks.insert(o);
            return stepped("E-IsIn-Shared-Then", node, mk(ex::StateLockBox{n.then_e, o, n.b}, e->span));
          });
        } else {
          add("E-IsIn-Else", [&] { return stepped("E-IsIn-Else", node, n.else_e); });
        }
        break;
      default:
        internal("unelaborated dynamic state check");
    }
  }
  if (rules) {
    for (const auto& m : matches) rules->push_back(m.first);
    return {};
  }
  if (matches.size() != 1) internal("dynamic state check is not deterministic");
  return matches.front().second();
}

StepOutcome Interpreter::invoke(RuntimeConfig& sigma, const ExprPtr& e, bool dry) const {
  const auto& n = *e->as<ex::Invoke>();
  const Expr* node = e.get();
  ObjId o = object_of(sigma, n.recv);
  const HeapObject& obj = sigma.heap.at(o);
  const ContractDecl* cd = decls_->contract(obj.type.name);
  if (!cd) internal("heap object of unknown contract " + obj.type.name);
  const Transaction* t = cd->find_transaction(n.name);
  if (!t) internal("no transaction " + n.name + " on " + obj.type.name);
  bool priv = t->sig.is_private;
  if (!priv && sigma.active.count(o) && !faults_.skip_reentrancy_check)
    return stuck(StepKind::StuckReentrancy, node, o, n.name);
  if (t->sig.params.size() != n.args.size()) internal("arity mismatch invoking " + n.name);

  std::vector<GenericParam> params = cd->generics;
  params.insert(params.end(), t->sig.generics.begin(), t->sig.generics.end());
  std::vector<Type> args = obj.type.args;
  args.insert(args.end(), n.targs.begin(), n.targs.end());
  if (args.size() != params.size()) internal("type argument count mismatch invoking " + n.name);

  RuntimeConfig& s = sigma;
  std::set<std::string> tested;
  for (const auto& g : params) tested.insert(g.perm_var);
  std::map<std::string, std::string> fresh_names;
  ExprPtr body = rename_tested_vars(t->body, tested, fresh_names, s);
  body = subst_expr_types(body, params, args);
  TransactionSig sig = subst_sig(t->sig, params, args);
  sig.generics.clear();

  RefId l1 = sigma.next_ref;
  std::vector<RefId> l2;
  for (std::size_t i = 0; i < n.args.size(); ++i) l2.push_back(l1 + 1 + static_cast<RefId>(i));
  body = subst_var(body, "this", Binding::indirect(l1));
  for (std::size_t i = 0; i < n.args.size(); ++i) body = subst_var(body, sig.params[i].name, Binding::indirect(l2[i]));

  auto frame = std::make_shared<CallFrame>();
  frame->transaction = n.name;
  frame->receiver = o;
  frame->self = Binding::indirect(l1);
  Type self_pre = Type::ref(obj.type, sig.this_pre);
  frame->links.push_back({n.recv, Binding::indirect(l1), self_pre, Type::ref(obj.type, sig.this_post)});
  for (std::size_t i = 0; i < n.args.size(); ++i)
    frame->links.push_back({n.args[i], Binding::indirect(l2[i]), sig.params[i].type,
                            sig.params[i].type.with_mode(sig.params[i].post)});
  frame->result = sig.ret;
  for (const auto& fs : sig.field_specs) {
    auto fd = j_.intersect_field(self_pre, fs.field);
    if (!fd) internal("private field specification names unknown field " + fs.field);
    frame->field_pre.emplace_back(fs.field, fd->type.with_mode(fs.pre));
    frame->field_post.emplace_back(fs.field, fd->type.with_mode(fs.post));
  }

  if (!dry) {
    Value recv = Value::object(o);
    std::vector<Value> vals;
    for (const auto& a : n.args) vals.push_back(value_of_binding(sigma, a));
    sigma.fresh_ref();
    sigma.env[l1] = recv;
    for (std::size_t i = 0; i < l2.size(); ++i) {
      sigma.fresh_ref();
      sigma.env[l2[i]] = vals[i];
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      Mode m = resolve_mode(sigma, args[i].mode);
      sigma.bind_perm(params[i].perm_var, m);
      if (auto it = fresh_names.find(params[i].perm_var); it != fresh_names.end()) sigma.bind_perm(it->second, m);
    }
    if (!priv) sigma.active.insert(o);
  }
  StepOutcome out = stepped(priv ? "E-privInv" : "E-inv", node,
                            mk(ex::ReentrancyBox{body, o, !priv, frame}, e->span));
  out.frame = frame;
  out.fresh_args.push_back(l1);
  out.fresh_args.insert(out.fresh_args.end(), l2.begin(), l2.end());
  return out;
}

// ---------------------------------------------------------------------------

std::string summarize(const ExprPtr& e, std::size_t width) {
  std::string raw = render_expr(e), out;
  bool space = false;
  for (char c : raw) {
    if (c == '\n' || c == ' ' || c == '\t') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  if (out.size() > width) out = out.substr(0, width - 3) + "...";
  return out;
}

EvalReport evaluate(const CheckedProgram& program, std::size_t fuel, bool trace, Faults faults) {
  EvalReport r;
  Interpreter interp(program.decls, faults);
  RuntimeConfig sigma;
  ExprPtr e = program.main;
  while (true) {
    if (is_value(e)) {
      r.outcome.kind = StepKind::Finished;
      r.outcome.value = *value_of(e);
      break;
    }
    if (r.steps >= fuel) {
      r.fuel_exhausted = true;
      break;
    }
    StepOutcome o = interp.step(sigma, e);
    if (o.kind != StepKind::Stepped) {
      r.outcome = o;
      break;
    }
    ++r.steps;
    if (trace) r.trace.push_back({r.steps, o.rule, summarize(o.next)});
    e = o.next;
  }
  r.final_config = std::move(sigma);
  return r;
}

std::string outcome_line(const EvalReport& r) {
  if (r.fuel_exhausted) return "FUEL";
  const StepOutcome& o = r.outcome;
  switch (o.kind) {
    case StepKind::Finished: {
      if (o.value.unit) return "FINISHED unit";
      const HeapObject& obj = r.final_config.heap.at(o.value.obj);
      return "FINISHED object " + std::to_string(o.value.obj) + " " + obj.type.name + "." + obj.state;
    }
    case StepKind::StuckBadTransition: return "STUCK bad-transition";
    case StepKind::StuckReentrancy: return "STUCK reentrancy";
    case StepKind::StuckNestedStateCheck: return "STUCK nested-state-check";
    case StepKind::Stepped: break;
  }
  return "STUCK unknown";
}

}  // namespace silica
