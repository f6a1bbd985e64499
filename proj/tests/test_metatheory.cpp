#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "silica/cli.hpp"
#include "silica/metatheory.hpp"

namespace fs = std::filesystem;
using namespace silica;

namespace {

const char* kDecls =
    "contract C { asset state S; state T; }\n"
    "contract D { asset state U { C@Owned c; } }\n"
    "main\n  ()\n";

struct Fixture {
  CheckedProgram p;
  Judgments j;
  Fixture() : p(analyze(kDecls, "decls.silica").program.value()), j(*p.decls, {}) {}
};

Type C(Mode m) { return Type::ref(ContractRef::concrete("C"), std::move(m)); }

RuntimeConfig one_object(const std::string& state = "S") {
  RuntimeConfig s;
  s.heap[0] = HeapObject{ContractRef::concrete("C"), state, {}};
  s.env[0] = Value::object(0);
  s.env[1] = Value::object(0);
  s.next_obj = 1;
  s.next_ref = 2;
  return s;
}

CheckedProgram load(const std::string& stem) {
  auto src = read_file(fs::path(SILICA_CORPUS_DIR) / (stem + ".silica"));
  return analyze(src.value(), stem + ".silica").program.value();
}

}  // namespace

TEST(Metatheory, Compatibility) {
  Fixture f;
  EXPECT_TRUE(compatible(f.j, C(Mode::owned()), C(Mode::unowned())));
  EXPECT_TRUE(compatible(f.j, C(Mode::shared()), C(Mode::shared())));
  EXPECT_FALSE(compatible(f.j, C(Mode::owned()), C(Mode::owned())));
  EXPECT_FALSE(compatible(f.j, C(Mode::state("S")), C(Mode::shared())));
  EXPECT_TRUE(compatible(f.j, C(Mode::state("S")), C(Mode::shared()), true));
  EXPECT_FALSE(compatible(f.j, C(Mode::owned()), Type::ref(ContractRef::concrete("D"), Mode::unowned())));
  EXPECT_FALSE(compatible(f.j, Type::make_unit(), C(Mode::unowned())));
}

TEST(Metatheory, ConsistentConfiguration) {
  Fixture f;
  RuntimeConfig s = one_object();
  TypingContext d;
  d.set(Binding::indirect(0), C(Mode::state("S")));
  d.set(Binding::indirect(1), C(Mode::unowned()));
  EXPECT_EQ(check_global_consistency(f.j, s, d), std::nullopt);
}

TEST(Metatheory, ConsistencyViolations) {
  Fixture f;
  {
    RuntimeConfig s = one_object();
    TypingContext d;
    d.set(Binding::indirect(0), C(Mode::owned()));
    d.set(Binding::indirect(1), C(Mode::owned()));
    EXPECT_TRUE(check_global_consistency(f.j, s, d)) << "two owners";
  }
  {
    RuntimeConfig s = one_object();
    TypingContext d;
    d.set(Binding::indirect(0), C(Mode::state("T")));
    EXPECT_TRUE(check_global_consistency(f.j, s, d)) << "state set misses the current state";
  }
  {
    RuntimeConfig s = one_object();
    s.env[5] = Value::object(9);
    EXPECT_TRUE(check_global_consistency(f.j, s, {})) << "dangling reference";
  }
  {
    RuntimeConfig s = one_object();
    TypingContext d;
    d.set(Binding::var("x"), C(Mode::owned()));
    EXPECT_TRUE(check_global_consistency(f.j, s, d)) << "variable in a runtime context";
  }
  {
    RuntimeConfig s = one_object();
    s.heap[1] = HeapObject{ContractRef::concrete("D"), "U", {}};
    EXPECT_TRUE(check_global_consistency(f.j, s, {})) << "field arity";
  }
  {
    RuntimeConfig s = one_object();
    s.locks.insert(0);
    EXPECT_TRUE(check_global_consistency(f.j, s, {}, mk(ex::UnitLit{}))) << "lock without a box";
  }
}

TEST(Metatheory, RefTypesProvenance) {
  Fixture f;
  RuntimeConfig s = one_object();
  s.heap[1] = HeapObject{ContractRef::concrete("D"), "U", {Value::object(0)}};
  TypingContext d;
  d.set(Binding::indirect(0), C(Mode::unowned()));
  d.set(Binding::object(0), C(Mode::unowned()));
  AliasReport r = ref_types(f.j, s, d, 0);
  ASSERT_EQ(r.aliases.size(), 3u);
  EXPECT_EQ(r.aliases[0].source, AliasSource::HeapField);
  EXPECT_EQ(r.aliases[0].type, C(Mode::owned()));
  EXPECT_EQ(r.aliases[1].source, AliasSource::IndirectRef);
  EXPECT_EQ(r.aliases[2].source, AliasSource::ContextBinding);
  EXPECT_EQ(check_global_consistency(f.j, s, d), std::nullopt);
}

TEST(Metatheory, LStronger) {
  Fixture f;
  RuntimeConfig s = one_object();
  TypingContext strong, weak, shared, other;
  strong.set(Binding::indirect(0), C(Mode::state("S")));
  weak.set(Binding::indirect(0), C(Mode::owned()));
  shared.set(Binding::indirect(0), C(Mode::shared()));
  other.set(Binding::indirect(1), C(Mode::owned()));
  EXPECT_TRUE(l_stronger(f.j, s, strong, weak));
  EXPECT_FALSE(l_stronger(f.j, s, weak, strong));
  EXPECT_FALSE(l_stronger(f.j, s, weak, shared));
  EXPECT_TRUE(l_stronger(f.j, s, strong, other)) << "same referent";
  EXPECT_TRUE(l_stronger(f.j, s, strong, {}));
  EXPECT_FALSE(l_stronger(f.j, s, {}, weak));
}

TEST(Metatheory, AuditFindings) {
  OwnershipSnapshot a, b, c;
  a.owners[0] = 1;
  a.assets = {0};
  b.step = 1;
  b.rule = "E-let";
  b.owners[0] = 0;
  auto lost = audit_ownership({a, b});
  ASSERT_EQ(lost.size(), 1u);
  EXPECT_EQ(lost[0].code, "AUD002");
  EXPECT_EQ(lost[0].step, 1u);

  b.rule = "E-disown";
  b.disowned = 0;
  EXPECT_TRUE(audit_ownership({a, b}).empty());

  c.owners[0] = 2;
  auto twice = audit_ownership({c});
  ASSERT_EQ(twice.size(), 1u);
  EXPECT_EQ(twice[0].code, "AUD001");

  OwnershipSnapshot plain = a;
  plain.assets.clear();
  b.rule = "E-let";
  b.disowned.reset();
  EXPECT_TRUE(audit_ownership({plain, b}).empty()) << "non-assets may be dropped";
}

TEST(Metatheory, VerifiedRunOfDisownCoin) {
  VerifiedRun v = verified_run(load("disown_coin"), 100, false);
  EXPECT_TRUE(v.ok()) << v.halted;
  ASSERT_EQ(v.disowns.size(), 1u);
  EXPECT_EQ(v.disowns[0].step, 3u);
  EXPECT_EQ(v.disowns[0].object, 0u);
  EXPECT_EQ(v.verdicts.size(), v.report.steps);
  EXPECT_EQ(verdict_line(v.verdicts.at(0)), "VERIFY step=1 rule=E-new verdict=pass");
}

TEST(Metatheory, VerifiedRunStopsAtFirstFailure) {
  Faults f;
  f.keep_lock_at_box_exit = true;
  VerifiedRun v = verified_run(load("policy"), 10000, false, f);
  EXPECT_FALSE(v.ok());
  ASSERT_FALSE(v.verdicts.empty());
  EXPECT_EQ(v.verdicts.back().verdict, "VER001");
  for (std::size_t i = 0; i + 1 < v.verdicts.size(); ++i) EXPECT_TRUE(v.verdicts[i].pass());
}

TEST(Metatheory, AliasSourceNames) {
  EXPECT_STREQ(alias_source_name(AliasSource::HeapField), "heapField");
  EXPECT_STREQ(alias_source_name(AliasSource::IndirectRef), "indirectRef");
  EXPECT_STREQ(alias_source_name(AliasSource::ContextBinding), "contextBinding");
}
