#include <gtest/gtest.h>

#include "silica/checker.hpp"
#include "silica/judgments.hpp"
#include "support/universe.hpp"

using namespace silica;
using silica::testing::make_universe;

namespace {

Type A(Mode m) { return Type::ref(ContractRef::concrete("A"), std::move(m)); }
Type I(Mode m) { return Type::ref(ContractRef::concrete("I"), std::move(m)); }

}  // namespace

TEST(Judgments, Subpermission) {
  auto u = make_universe(0);
  Judgments j(*u.decls, {});
  Mode s1 = Mode::state("A1"), both = Mode::of_states({"A1", "A2"});
  EXPECT_TRUE(j.subpermission(s1, both));
  EXPECT_FALSE(j.subpermission(both, s1));
  EXPECT_TRUE(j.subpermission(s1, Mode::owned()));
  EXPECT_TRUE(j.subpermission(s1, Mode::shared()));
  EXPECT_FALSE(j.subpermission(Mode::owned(), s1));
  EXPECT_TRUE(j.subpermission(Mode::owned(), Mode::shared()));
  EXPECT_TRUE(j.subpermission(Mode::shared(), Mode::unowned()));
  EXPECT_FALSE(j.subpermission(Mode::shared(), Mode::owned()));
  EXPECT_FALSE(j.subpermission(Mode::unowned(), Mode::shared()));
  EXPECT_THROW(j.subpermission(Mode::var("nope"), Mode::owned()), CheckFailure);
}

TEST(Judgments, PermissionVariables) {
  auto u = make_universe(0);
  GenericContext g = {GenericParam{false, "X", "p", ContractRef::concrete("I"), Mode::shared(), {}}};
  Judgments j(*u.decls, g);
  EXPECT_TRUE(j.subpermission(Mode::var("p"), Mode::shared()));
  EXPECT_FALSE(j.subpermission(Mode::var("p"), Mode::owned()));
  EXPECT_TRUE(j.subpermission(Mode::owned(), Mode::var("p")));
  EXPECT_FALSE(j.subpermission(Mode::shared(), Mode::var("p")));
  EXPECT_TRUE(j.maybe_owned(Type::ref(ContractRef::decl_var("X"), Mode::var("p"))));
  EXPECT_EQ(j.bound(Type::ref(ContractRef::decl_var("X"), Mode::var("p"))), I(Mode::shared()));
}

TEST(Judgments, StateBoundedVariableIsNotAboveOwned) {
  auto u = make_universe(0);
  GenericContext g = {GenericParam{false, "X", "p", ContractRef::concrete("I"), Mode::state("A1"), {}}};
  Judgments j(*u.decls, g);
  EXPECT_TRUE(j.subpermission(Mode::var("p"), Mode::state("A1")));
  EXPECT_FALSE(j.subpermission(Mode::owned(), Mode::var("p")));
  EXPECT_FALSE(j.subpermission(Mode::owned(), Mode::state("A1")));
  EXPECT_TRUE(j.subpermission(Mode::var("p"), Mode::var("p")));
}

TEST(Judgments, Classification) {
  auto u = make_universe(1);  // A1 is an asset state
  Judgments j(*u.decls, {});
  EXPECT_TRUE(j.is_asset(A(Mode::state("A1"))));
  EXPECT_FALSE(j.is_asset(A(Mode::state("A2"))));
  EXPECT_TRUE(j.is_asset(A(Mode::owned())));
  EXPECT_TRUE(j.is_asset(A(Mode::unowned())));
  EXPECT_FALSE(j.disposable(A(Mode::owned())));
  EXPECT_TRUE(j.disposable(A(Mode::shared())));
  EXPECT_TRUE(j.disposable(A(Mode::state("A2"))));
  EXPECT_TRUE(j.disposable(Type::make_unit()));
}

TEST(Judgments, Split) {
  auto u = make_universe(1);
  Judgments j(*u.decls, {});
  auto all = j.split(A(Mode::owned()), SplitDemand::transfer_all());
  EXPECT_EQ(all.taken, A(Mode::owned()));
  EXPECT_EQ(all.residual, A(Mode::unowned()));
  auto sh = j.split(A(Mode::shared()), SplitDemand::transfer_all());
  EXPECT_EQ(sh.residual, A(Mode::shared()));
  // A2 is not an asset, so an owned A2 reference can become two Shared ones.
  auto share = j.split(A(Mode::state("A2")), SplitDemand::satisfy(A(Mode::shared())));
  EXPECT_EQ(share.taken, A(Mode::shared()));
  EXPECT_EQ(share.residual, A(Mode::shared()));
  auto keep = j.split(A(Mode::owned()), SplitDemand::satisfy(A(Mode::unowned())));
  EXPECT_EQ(keep.residual, A(Mode::unowned()));
  EXPECT_THROW(j.split(A(Mode::shared()), SplitDemand::satisfy(A(Mode::owned()))), CheckFailure);
  EXPECT_THROW(j.split(Type::make_unit(), SplitDemand::satisfy(A(Mode::owned()))), CheckFailure);
}

TEST(Judgments, JoinTable) {
  auto u = make_universe(0);
  Judgments j(*u.decls, {});
  EXPECT_EQ(j.join(A(Mode::owned()), A(Mode::state("A1"))), A(Mode::owned()));
  EXPECT_EQ(j.join(A(Mode::shared()), A(Mode::unowned())), A(Mode::unowned()));
  EXPECT_EQ(j.join(A(Mode::state("A1")), A(Mode::state("A2"))), A(Mode::of_states({"A1", "A2"})));
  EXPECT_EQ(j.join(A(Mode::state("A1")), I(Mode::state("A2"))), I(Mode::of_states({"A1", "A2"})));
  EXPECT_FALSE(j.join(A(Mode::owned()), A(Mode::shared())));
  EXPECT_FALSE(j.join(A(Mode::owned()), A(Mode::unowned())));
  EXPECT_FALSE(j.join(A(Mode::owned()), Type::make_unit()));
}

TEST(Judgments, MergeCodes) {
  auto u = make_universe(3);
  Judgments j(*u.decls, {});
  TypingContext a, b;
  a.set(Binding::var("x"), A(Mode::owned()));
  try {
    j.merge(a, b);
    FAIL() << "owned asset present in one branch merged";
  } catch (const CheckFailure& f) {
    EXPECT_EQ(f.diagnostic().code, "MRG001");
  }
  b.set(Binding::var("x"), A(Mode::unowned()));
  try {
    j.merge(a, b);
    FAIL() << "Owned and Unowned merged";
  } catch (const CheckFailure& f) {
    EXPECT_EQ(f.diagnostic().code, "MRG002");
  }
  TypingContext c;
  c.set(Binding::var("y"), A(Mode::shared()));
  EXPECT_TRUE(j.merge(c, TypingContext{}).empty());
}

TEST(Judgments, FuncArg) {
  auto u = make_universe(0);
  Judgments j(*u.decls, {});
  auto owned_to_unowned = j.func_arg(A(Mode::owned()), Mode::unowned(), Mode::unowned());
  EXPECT_EQ(owned_to_unowned.caller_after, A(Mode::owned()));
  auto transfer = j.func_arg(A(Mode::owned()), Mode::owned(), Mode::unowned());
  EXPECT_EQ(transfer.caller_after, A(Mode::unowned()));
  EXPECT_EQ(transfer.residual, A(Mode::unowned()));
  auto state_change = j.func_arg(A(Mode::state("A1")), Mode::state("A1"), Mode::state("A2"));
  EXPECT_EQ(state_change.caller_after, A(Mode::state("A2")));
}

TEST(Judgments, SubtypeThroughInterface) {
  auto u = make_universe(0);
  Judgments j(*u.decls, {});
  EXPECT_TRUE(j.subtype(A(Mode::state("A1")), I(Mode::owned())));
  EXPECT_FALSE(j.subtype(I(Mode::owned()), A(Mode::owned())));
  EXPECT_TRUE(j.same_ownership(A(Mode::state("A1")), I(Mode::owned())));
  EXPECT_FALSE(j.same_ownership(A(Mode::owned()), A(Mode::shared())));
}

TEST(Judgments, SubstitutionIsSequential) {
  std::vector<GenericParam> ps = {GenericParam{false, "X", "p", ContractRef::concrete("I"), Mode::owned(), {}}};
  Type field = Type::ref(ContractRef::decl_var("X"), Mode::var("p"));
  Type got = subst_type(field, ps, {A(Mode::state("A1"))});
  EXPECT_EQ(got, A(Mode::state("A1")));
}
