#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "silica/cli.hpp"
#include "silica/interpreter.hpp"

namespace fs = std::filesystem;
using namespace silica;

namespace {

CheckedProgram load(const std::string& stem) {
  auto src = read_file(fs::path(SILICA_CORPUS_DIR) / (stem + ".silica"));
  if (!src) throw std::runtime_error("missing " + stem);
  Analysis a = analyze(*src, stem + ".silica");
  if (!a.program) throw std::runtime_error(stem + " rejected");
  return *a.program;
}

CheckedProgram compile(const std::string& src) {
  Analysis a = analyze(src, "inline.silica");
  if (!a.program) throw std::runtime_error(format_diagnostic(a.diagnostics.at(0)));
  return *a.program;
}

const std::vector<std::string> kRunnable = {
    "tiny_vending_machine", "vending_client_scenario", "wallet_swap",     "wallet_swap_states", "gift_certificate",
    "policy",               "linked_list_generic",     "disown_coin",     "reentrancy_trap",    "shared_lock_trap",
    "nested_dsc_trap"};

}  // namespace

class StepInvariants : public ::testing::TestWithParam<std::string> {};

TEST_P(StepInvariants, HoldAtEveryStep) {
  CheckedProgram p = load(GetParam());
  Interpreter interp(p.decls);
  Judgments j(*p.decls, {});
  RuntimeConfig sigma;
  ExprPtr e = p.main;
  for (std::size_t n = 1; !is_value(e) && n <= 10000; ++n) {
    auto rules = interp.applicable_rules(sigma, e);
    ASSERT_LE(rules.size(), 1u) << "step " << n;

    RuntimeConfig before = sigma;
    StepOutcome o = interp.step(sigma, e);
    if (o.kind != StepKind::Stepped) {
      EXPECT_TRUE(o.stuck());
      break;
    }
    ASSERT_EQ(rules, std::vector<std::string>{o.rule}) << "step " << n;

    for (const auto& [id, obj] : sigma.heap)
      if (!before.heap.count(id)) EXPECT_GE(id, before.next_obj) << "reused object id at step " << n;
    for (const auto& [id, v] : sigma.env)
      if (!before.env.count(id)) EXPECT_GE(id, before.next_ref) << "reused reference at step " << n;

    bool phi_grew = sigma.locks.size() > before.locks.size();
    bool phi_shrank = sigma.locks.size() < before.locks.size();
    bool psi_grew = sigma.active.size() > before.active.size();
    bool psi_shrank = sigma.active.size() < before.active.size();
    if (phi_grew) EXPECT_EQ(o.rule, "E-IsIn-Shared-Then");
    if (phi_shrank) EXPECT_EQ(o.rule, "E-box-phi");
    if (psi_grew) EXPECT_EQ(o.rule, "E-inv");
    if (psi_shrank) EXPECT_EQ(o.rule, "E-box-psi");

    for (const auto& [id, obj] : sigma.heap)
      EXPECT_EQ(obj.fields.size(), j.state_fields(obj.type, obj.state).size())
          << "o" << id << " in " << obj.state << " at step " << n;
    for (const auto& [p, m] : sigma.perm_env) EXPECT_FALSE(m.is_var()) << p;
    e = o.next;
  }
}

INSTANTIATE_TEST_SUITE_P(Corpus, StepInvariants, ::testing::ValuesIn(kRunnable));

TEST(Interpreter, CorpusOutcomes) {
  const std::vector<std::pair<std::string, std::string>> want = {
      {"tiny_vending_machine", "FINISHED object 1 TinyVendingMachine.Empty"},
      {"wallet_swap", "FINISHED object 0 Money.Held"},
      {"disown_coin", "FINISHED unit"},
      {"reentrancy_trap", "STUCK reentrancy"},
      {"shared_lock_trap", "STUCK bad-transition"},
      {"nested_dsc_trap", "STUCK nested-state-check"},
  };
  for (const auto& [stem, line] : want) EXPECT_EQ(outcome_line(evaluate(load(stem), 200, false)), line) << stem;
}

TEST(Interpreter, TraceIsStable) {
  CheckedProgram p = load("gift_certificate");
  EvalReport a = evaluate(p, 10000, true);
  EvalReport b = evaluate(p, 10000, true);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].rule, b.trace[i].rule);
    EXPECT_EQ(a.trace[i].summary, b.trace[i].summary);
    EXPECT_LE(a.trace[i].summary.size(), 80u);
    EXPECT_EQ(a.trace[i].n, i + 1);
  }
  EXPECT_EQ(a.steps, 57u);
}

TEST(Interpreter, FuelIsNotStuckness) {
  CheckedProgram p = load("tiny_vending_machine");
  EvalReport r = evaluate(p, 5, false);
  EXPECT_TRUE(r.fuel_exhausted);
  EXPECT_EQ(r.steps, 5u);
  EXPECT_EQ(outcome_line(r), "FUEL");
}

TEST(Interpreter, DynamicCheckOnUnownedTakesElse) {
  CheckedProgram p = compile(
      "contract C { state S; state T; }\n"
      "main\n  let x: C@Owned = new C.S() in\n  let u: C@Unowned = x in\n"
      "  if u in S { x } else { x }\n");
  EvalReport r = evaluate(p, 100, true);
  EXPECT_EQ(outcome_line(r), "FINISHED object 0 C.S");
  bool saw = false;
  for (const auto& t : r.trace) saw |= t.rule == "E-IsIn-Unowned";
  EXPECT_TRUE(saw);
}

TEST(Interpreter, PermissionTestResolvesThroughXi) {
  CheckedProgram p = compile(
      "interface I { }\n"
      "contract K implements I { state S; }\n"
      "contract Box<X@p where I@Shared> {\n"
      "  state Full { X@p item; }\n"
      "  transaction probe(Box@Full this) {\n"
      "    let it: X@p = this.item in\n"
      "    let r: unit = if it in p { () } else { () } in\n"
      "    this.item := it\n"
      "  }\n"
      "}\n"
      "main\n  let k: K@Shared = new K.S() in\n  let b: Box<K@Shared>@Full = new Box<K@Shared>.Full(k) in\n"
      "  let r: unit = b.probe() in\n  b\n");
  EvalReport r = evaluate(p, 200, true);
  EXPECT_EQ(outcome_line(r), "FINISHED object 1 Box.Full");
  bool perm_then = false;
  for (const auto& t : r.trace) perm_then |= t.rule.find("Perm") != std::string::npos;
  EXPECT_TRUE(perm_then);
}

TEST(Interpreter, OutcomeLines) {
  EvalReport r;
  r.outcome.kind = StepKind::StuckReentrancy;
  EXPECT_EQ(outcome_line(r), "STUCK reentrancy");
  r.outcome.kind = StepKind::StuckBadTransition;
  EXPECT_EQ(outcome_line(r), "STUCK bad-transition");
  r.outcome.kind = StepKind::StuckNestedStateCheck;
  EXPECT_EQ(outcome_line(r), "STUCK nested-state-check");
  r.outcome.kind = StepKind::Finished;
  r.outcome.value = Value::unit_val();
  EXPECT_EQ(outcome_line(r), "FINISHED unit");
}

TEST(Interpreter, SummaryIsTruncated) {
  auto e = load("gift_certificate").main;
  std::string s = summarize(e, 40);
  EXPECT_LE(s.size(), 40u);
  EXPECT_EQ(s.find('\n'), std::string::npos);
}
