#include "silica/metatheory.hpp"

#include <algorithm>
#include <functional>

namespace silica {

const char* alias_source_name(AliasSource s) {
  switch (s) {
    case AliasSource::HeapField: return "heapField";
    case AliasSource::IndirectRef: return "indirectRef";
    case AliasSource::ContextBinding: return "contextBinding";
  }
  return "?";
}

namespace {

std::string obj_name(ObjId o) { return "o" + std::to_string(o); }

void for_each_node(const ExprPtr& e, const std::function<void(const Expr&)>& f) {
  if (!e) return;
  f(*e);
  if (auto n = e->as<ex::Let>()) {
    for_each_node(n->bound, f);
    for_each_node(n->body, f);
  } else if (auto n = e->as<ex::DynCheck>()) {
    for_each_node(n->then_e, f);
    for_each_node(n->else_e, f);
  } else if (auto n = e->as<ex::StateLockBox>()) {
    for_each_node(n->body, f);
  } else if (auto n = e->as<ex::ReentrancyBox>()) {
    for_each_node(n->body, f);
  }
}

std::set<ObjId> objects_mentioned(const ExprPtr& e) {
  std::set<ObjId> out;
  auto add = [&](const Binding& b) {
    if (b.is_object()) out.insert(b.id);
  };
  for_each_node(e, [&](const Expr& x) {
    std::visit(
        [&](const auto& n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, ex::Simple> || std::is_same_v<N, ex::StaticAssert> ||
                        std::is_same_v<N, ex::DynCheck> || std::is_same_v<N, ex::Disown>)
            add(n.b);
          if constexpr (std::is_same_v<N, ex::FieldRead> || std::is_same_v<N, ex::FieldWrite> ||
                        std::is_same_v<N, ex::Invoke> || std::is_same_v<N, ex::Transition>)
            add(n.recv);
          if constexpr (std::is_same_v<N, ex::FieldWrite>) add(n.src);
          if constexpr (std::is_same_v<N, ex::Invoke> || std::is_same_v<N, ex::New> ||
                        std::is_same_v<N, ex::Transition>)
            for (const auto& a : n.args) add(a);
          if constexpr (std::is_same_v<N, ex::StateLockBox>) add(n.scrutinee);
        },
        x.node);
  });
  return out;
}

std::optional<Value> referent(const RuntimeConfig& sigma, const Binding& b) {
  if (b.is_object()) return Value::object(b.id);
  if (b.is_indirect()) {
    auto it = sigma.env.find(b.id);
    if (it != sigma.env.end()) return it->second;
  }
  return std::nullopt;
}

bool concrete_type(const Type& t) {
  if (t.unit) return true;
  if (t.contract.is_var() || t.mode.is_var() || t.mode.kind == Mode::Kind::Name) return false;
  return std::all_of(t.contract.args.begin(), t.contract.args.end(), concrete_type);
}

bool heads_related(const Judgments& j, const ContractRef& a, const ContractRef& b) {
  if (a.is_var() || b.is_var()) return false;
  if (a.name == b.name) return true;
  auto up = [&](const ContractRef& c, const ContractRef& i) {
    auto impl = j.implemented_interface(c);
    return impl && impl->name == i.name;
  };
  return up(a, b) || up(b, a);
}

bool owned(const Judgments& j, const Type& t) { return !t.unit && j.maybe_owned(t); }

std::string describe(const Alias& a) { return a.where + ": " + render_type(a.type); }

}  // namespace

AliasReport ref_types(const Judgments& j, const RuntimeConfig& sigma, const TypingContext& delta, ObjId o) {
  if (!sigma.heap.count(o)) throw InternalError("refTypes of unknown object " + obj_name(o));
  AliasReport r;
  r.object = o;
  for (const auto& [holder, obj] : sigma.heap) {
    auto fields = j.state_fields(obj.type, obj.state);
    for (std::size_t i = 0; i < fields.size() && i < obj.fields.size(); ++i) {
      if (obj.fields[i].unit || obj.fields[i].obj != o) continue;
      const Type* ov = delta.find_field(Binding::object(holder), fields[i].name);
      r.aliases.push_back({ov ? *ov : fields[i].type, AliasSource::HeapField, obj_name(holder) + "." + fields[i].name});
    }
  }
  for (const auto& e : delta.entries()) {
    if (e.key.field || !e.key.b.is_indirect()) continue;
    auto it = sigma.env.find(e.key.b.id);
    if (it == sigma.env.end() || it->second.unit || it->second.obj != o) continue;
    r.aliases.push_back({e.type, AliasSource::IndirectRef, render_binding(e.key.b)});
  }
  if (const Type* t = delta.find(Binding::object(o))) r.aliases.push_back({*t, AliasSource::ContextBinding, obj_name(o)});
  return r;
}

bool compatible(const Judgments& j, const Type& t1, const Type& t2, bool state_locked) {
  if (t1.unit || t2.unit) return false;
  if (!heads_related(j, t1.contract, t2.contract)) return false;
  const Mode& a = t1.mode;
  const Mode& b = t2.mode;
  if (a.is_perm(Permission::Unowned) || b.is_perm(Permission::Unowned)) return true;
  if (a.is_perm(Permission::Shared) && b.is_perm(Permission::Shared)) return true;
  if (state_locked) {
    if (owned(j, t1) && b.is_perm(Permission::Shared)) return true;
    if (owned(j, t2) && a.is_perm(Permission::Shared)) return true;
  }
  return false;
}

std::optional<std::string> check_global_consistency(const Judgments& j, const RuntimeConfig& sigma,
                                                    const TypingContext& delta, const ExprPtr& e) {
  for (const auto& [l, v] : sigma.env)
    if (!v.unit && !sigma.heap.count(v.obj))
      return "range(rho): l" + std::to_string(l) + " refers to missing " + obj_name(v.obj);

  for (const auto& en : delta.entries()) {
    const Binding& b = en.key.b;
    std::string who = render_binding(b) + (en.key.field ? "." + *en.key.field : "");
    if (b.is_var()) return "dom(Delta): variable " + who + " in a runtime context";
    if (b.is_indirect() && !sigma.env.count(b.id)) return "dom(Delta): " + who + " is not in rho";
    if (b.is_object() && !sigma.heap.count(b.id)) return "dom(Delta): " + who + " is not in mu";
    if (!concrete_type(en.type)) return "concrete heads: " + who + ": " + render_type(en.type);
    if (en.key.field) {
      if (!b.is_object()) return "dom(Delta): field override " + who + " is not keyed by an object";
      continue;
    }
    auto v = referent(sigma, b);
    if (en.type.unit && b.is_indirect() && !v->unit) return "unit binding " + who + " refers to an object";
    if (!en.type.unit && v->unit) return "reference binding " + who + " holds unit";
    if (en.type.unit && b.is_object()) return "object " + who + " typed unit";
  }

  for (const auto& [p, m] : sigma.perm_env)
    if (m.is_var() || m.kind == Mode::Kind::Name) return "xi: " + p + " is not concrete";

  for (const auto& [o, obj] : sigma.heap) {
    auto fields = j.state_fields(obj.type, obj.state);
    if (fields.size() != obj.fields.size())
      return "arity: " + obj_name(o) + " in " + obj.type.name + "." + obj.state + " has " +
             std::to_string(obj.fields.size()) + " fields, state declares " + std::to_string(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (fields[i].type.unit != obj.fields[i].unit)
        return "field value: " + obj_name(o) + "." + fields[i].name + " does not match " +
               render_type(fields[i].type);
    AliasReport r = ref_types(j, sigma, delta, o);
    for (const auto& a : r.aliases) {
      if (a.type.unit || !heads_related(j, a.type.contract, obj.type))
        return "heap type: alias " + describe(a) + " of " + obj_name(o) + " does not name " + obj.type.name;
      if (a.type.mode.is_states() &&
          !std::binary_search(a.type.mode.states.begin(), a.type.mode.states.end(), obj.state))
        return "heap type: alias " + describe(a) + " but " + obj_name(o) + " is in state " + obj.state;
    }
    bool locked = sigma.locks.count(o) > 0;
    for (std::size_t x = 0; x < r.aliases.size(); ++x)
      for (std::size_t y = x + 1; y < r.aliases.size(); ++y)
        if (!compatible(j, r.aliases[x].type, r.aliases[y].type, locked))
          return "compatibility: " + obj_name(o) + " has aliases " + describe(r.aliases[x]) + " and " +
                 describe(r.aliases[y]);
  }

  if (e) {
    std::set<ObjId> lock_boxes, guard_boxes;
    for_each_node(e, [&](const Expr& x) {
      if (auto b = x.as<ex::StateLockBox>()) lock_boxes.insert(b->o);
      if (auto b = x.as<ex::ReentrancyBox>(); b && b->guards) guard_boxes.insert(b->o);
    });
    if (lock_boxes != sigma.locks) return "boxes: phi does not match the state-lock boxes of the expression";
    if (guard_boxes != sigma.active) return "boxes: psi does not match the invocation boxes of the expression";
  }
  return std::nullopt;
}

bool l_stronger(const Judgments& j, const RuntimeConfig& sigma, const TypingContext& d1, const TypingContext& d2) {
  auto related = [&](const Type& t, const Type& t2) {
    if (t.unit || t2.unit) return t.unit == t2.unit;
    return j.subtype(t, t2) && j.same_ownership(t, t2);
  };
  for (const auto& want : d2.entries()) {
    if (want.key.field) {
      const Type* have = d1.find(want.key);
      if (!have || !related(*have, want.type)) return false;
      continue;
    }
    auto target = referent(sigma, want.key.b);
    bool found = false;
    for (const auto& have : d1.entries()) {
      if (have.key.field) continue;
      if (have.key.b.is_var() || want.key.b.is_var()) {
        if (!(have.key.b == want.key.b)) continue;
      } else if (referent(sigma, have.key.b) != target) {
        continue;
      }
      if (related(have.type, want.type)) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

OwnershipSnapshot ownership_snapshot(const Judgments& j, const RuntimeConfig& sigma, const TypingContext& delta) {
  OwnershipSnapshot s;
  for (const auto& [o, obj] : sigma.heap) {
    int n = 0;
    for (const auto& a : ref_types(j, sigma, delta, o).aliases)
      if (owned(j, a.type)) ++n;
    s.owners[o] = n;
    if (j.is_asset(Type::ref(obj.type, Mode::state(obj.state)))) s.assets.insert(o);
  }
  return s;
}

std::vector<AuditFinding> audit_ownership(const std::vector<OwnershipSnapshot>& trace) {
  std::vector<AuditFinding> out;
  const OwnershipSnapshot* prev = nullptr;
  for (const auto& s : trace) {
    for (const auto& [o, n] : s.owners)
      if (n > 1)
        out.push_back({"AUD001", s.step, o, obj_name(o) + " has " + std::to_string(n) + " owning aliases", s.span});
    if (prev)
      for (const auto& [o, before] : prev->owners) {
        if (before < 1 || !prev->assets.count(o)) continue;
        auto it = s.owners.find(o);
        int after = it == s.owners.end() ? 0 : it->second;
        if (after == 0 && !(s.rule == "E-disown" && s.disowned == o))
          out.push_back({"AUD002", s.step, o, "asset " + obj_name(o) + " lost its owner at " + s.rule, s.span});
      }
    prev = &s;
  }
  return out;
}

bool VerifiedRun::ok() const {
  return halted.empty() && findings.empty() &&
         std::all_of(verdicts.begin(), verdicts.end(), [](const StepVerdict& v) { return v.pass(); });
}

std::string verdict_line(const StepVerdict& v) {
  return "VERIFY step=" + std::to_string(v.step) + " rule=" + v.rule + " verdict=" + v.verdict;
}

// ---------------------------------------------------------------------------

namespace {

struct Capture {
  TypingContext in;
  TypingContext out;
  Type type;
};

class StepWitness {
 public:
  StepWitness(const Decls& decls, const Judgments& j) : decls_(decls), j_(j) {}

  CheckResult type(const RuntimeConfig& sigma, const FrameTable& frames, const TypingContext& delta,
                   const ExprPtr& e, std::map<const Expr*, Capture>* captures) const {
    CheckOptions opts;
    opts.sigma = &sigma;
    opts.frames = &frames;
    if (captures)
      opts.on_node = [captures](const Expr* n, const TypingContext& in, const TypingContext& out, const Type& t) {
        (*captures)[n] = {in, out, t};
      };
    Checker c(decls_, {}, opts);
    return c.check(delta, e, std::nullopt);
  }

  // Successor context per rule, following the preservation proof's cases.
  TypingContext build(const std::map<const Expr*, Capture>& caps, const StepOutcome& o, const RuntimeConfig& before,
                      const RuntimeConfig& after, FrameTable& frames) const {
    const Capture& at = get(caps, o.redex);
    const Expr& redex = *o.redex;
    const std::string& rule = o.rule;
    auto with_value = [&](TypingContext d, const Type& t) {
      if (!o.value.unit) d.set(Binding::object(o.value.obj), t);
      return d;
    };

    if (rule == "E-lookup" || rule == "E-new" || rule == "E-field") return with_value(at.out, at.type);
    if (rule == "E-fieldUpdate" || rule == "E-transition-owned" || rule == "E-transition-shared" ||
        rule == "E-assert" || rule == "E-disown" || rule == "E-pack")
      return at.out;

    if (rule == "E-let") {
      const auto& n = *redex.as<ex::Let>();
      TypingContext d = get(caps, n.bound.get()).out;
      d.set(Binding::indirect(*o.fresh), n.type);
      return d;
    }

    if (rule == "E-box-phi" || rule == "E-box-psi") {
      ExprPtr body = redex.is<ex::StateLockBox>() ? redex.as<ex::StateLockBox>()->body
                                                   : redex.as<ex::ReentrancyBox>()->body;
      TypingContext d = at.out;
      auto v = value_of(body);
      if (v && !v->unit) {
        const Type* t = get(caps, body.get()).in.find(Binding::object(v->obj));
        if (!t) throw InternalError("box value " + obj_name(v->obj) + " is untyped");
        d.set(Binding::object(v->obj), *t);
      }
      return d;
    }

    if (rule == "E-inv" || rule == "E-privInv") return invocation(at, o, frames);

    if (auto n = redex.as<ex::DynCheck>()) {
      TypingContext d = at.in;
      const Type* tp = d.find(n->b);
      if (!tp) throw InternalError("untyped scrutinee " + render_binding(n->b));
      Type t = *tp;
      Mode m = n->mode.is_var() ? Interpreter::resolve_mode(before, n->mode) : n->mode;
      if (rule == "E-IsIn-Owned-Then" || rule == "E-IsIn-Shared-Then") {
        d.set(n->b, t.with_mode(m));
      } else if (rule == "E-IsIn-Else" && (t.mode.is_var() || j_.subpermission(t.mode, Mode::owned())) &&
                 m.is_states()) {
        auto possible = j_.possible_states(t);
        std::vector<std::string> rest;
        std::set_difference(possible.begin(), possible.end(), m.states.begin(), m.states.end(),
                            std::back_inserter(rest));
        if (!rest.empty()) d.set(n->b, t.with_mode(Mode::of_states(rest)));
      }
      return d;
    }
    (void)after;
    throw InternalError("no preservation witness for " + rule);
  }

 private:
  const Decls& decls_;
  const Judgments& j_;

  static const Capture& get(const std::map<const Expr*, Capture>& caps, const Expr* n) {
    auto it = caps.find(n);
    if (it == caps.end()) throw InternalError("redex was not typed");
    return it->second;
  }

  TypingContext invocation(const Capture& at, const StepOutcome& o, FrameTable& frames) const {
    const CallFrame& fr = *o.frame;
    TypingContext d = at.in;
    for (const auto& link : fr.links) {
      const Type* cur = d.find(link.caller);
      if (!cur) throw InternalError("untyped argument " + render_binding(link.caller));
      d.set(link.caller, j_.func_arg(*cur, link.declared_in.mode, link.declared_post.mode).residual);
    }
    for (const auto& link : fr.links) d.set(link.callee, link.declared_in);
    Binding key = Binding::object(fr.receiver);
    if (o.rule == "E-privInv") {
      d.erase_overrides_of(key);
      for (const auto& [f, pre] : fr.field_pre) {
        auto fd = j_.intersect_field(fr.links[0].declared_in, f);
        if (!fd || !(fd->type == pre)) d.set_field(key, f, pre);
      }
    }
    FrameStatic st;
    for (const auto& link : fr.links) {
      const Type* t = at.out.find(link.caller);
      if (!t) throw InternalError("caller binding " + render_binding(link.caller) + " vanished");
      st.caller_after.emplace_back(link.caller, *t);
    }
    for (const auto& ov : at.out.overrides_of(key)) st.fields_after.emplace_back(*ov.key.field, ov.type);
    frames[o.frame.get()] = std::move(st);
    return d;
  }
};

// Unowned object bindings that no longer occur in the expression carry no
// information.
void collect_garbage(const Judgments& j, TypingContext& delta, const ExprPtr& e) {
  auto live = objects_mentioned(e);
  std::vector<Binding> dead;
  for (const auto& en : delta.entries())
    if (!en.key.field && en.key.b.is_object() && !live.count(en.key.b.id) &&
        (en.type.unit || j.bound_perm(en.type.mode).is_perm(Permission::Unowned)))
      dead.push_back(en.key.b);
  for (const auto& b : dead) delta.erase(b);
}

}  // namespace

VerifiedRun verified_run(const CheckedProgram& program, std::size_t fuel, bool trace, Faults faults) {
  VerifiedRun run;
  const Decls& decls = *program.decls;
  Judgments j(decls, {});
  Interpreter interp(program.decls, faults);
  StepWitness witness(decls, j);
  RuntimeConfig sigma;
  TypingContext delta;
  FrameTable frames;
  ExprPtr e = program.main;
  EvalReport& r = run.report;

  OwnershipSnapshot first = ownership_snapshot(j, sigma, delta);
  run.ownership.push_back(first);

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
    std::map<const Expr*, Capture> caps;
    collect_garbage(j, delta, e);
    std::optional<CheckResult> before;
    try {
      before = witness.type(sigma, frames, delta, e, &caps);
    } catch (const CheckFailure& f) {
      run.halted = "VER002 " + f.diagnostic().code + " " + f.diagnostic().message;
      break;
    }
    RuntimeConfig next = sigma;
    StepOutcome o;
    try {
      o = interp.step(next, e);
    } catch (const InternalError& err) {
      run.halted = err.what();
      break;
    }
    if (o.kind != StepKind::Stepped) {
      r.outcome = o;
      break;
    }
    ++r.steps;
    if (trace) r.trace.push_back({r.steps, o.rule, summarize(o.next)});

    {
      StepVerdict v;
      v.step = r.steps;
      v.rule = o.rule;
      v.span = o.redex->span;
      std::optional<ObjId> disowned;
      if (o.rule == "E-disown") {
        auto b = o.redex->as<ex::Disown>()->b;
        if (auto ref = referent(sigma, b); ref && !ref->unit) disowned = ref->obj;
        if (disowned) run.disowns.push_back({r.steps, *disowned});
      }
      TypingContext after;
      try {
        after = witness.build(caps, o, sigma, next, frames);
      } catch (const InternalError& err) {
        run.halted = err.what();
        break;
      }
      if (auto bad = check_global_consistency(j, next, after, o.next)) {
        v.verdict = "VER001";
        v.detail = *bad;
      } else {
        try {
          CheckResult re = witness.type(next, frames, after, o.next, nullptr);
          bool type_ok = re.type == before->type || (!re.type.unit && !before->type.unit &&
                                                     j.subtype(re.type, before->type) &&
                                                     j.same_ownership(re.type, before->type));
          if (!type_ok) {
            v.verdict = "VER002";
            v.detail = "result type " + render_type(re.type) + " does not refine " + render_type(before->type);
          } else if (!l_stronger(j, next, re.out, before->out)) {
            v.verdict = "VER002";
            v.detail = "output context " + render_context(re.out) + " is not l-stronger than " +
                       render_context(before->out);
          } else {
            v.verdict = "pass";
          }
        } catch (const CheckFailure& f) {
          v.verdict = "VER002";
          v.detail = f.diagnostic().code + " " + f.diagnostic().message;
        }
      }
      OwnershipSnapshot snap = ownership_snapshot(j, next, after);
      snap.step = r.steps;
      snap.rule = o.rule;
      snap.disowned = disowned;
      snap.span = o.redex->span;
      run.ownership.push_back(std::move(snap));
      bool pass = v.pass();
      if (!pass) run.halted = v.verdict + " " + v.detail;
      run.verdicts.push_back(std::move(v));
      delta = std::move(after);
      if (!pass) {
        sigma = std::move(next);
        break;
      }
    }
    sigma = std::move(next);
    e = o.next;
  }
  r.final_config = std::move(sigma);
  run.findings = audit_ownership(run.ownership);
  return run;
}

}  // namespace silica
