#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "silica/cli.hpp"
#include "silica/parser.hpp"

namespace fs = std::filesystem;
using namespace silica;

namespace {

std::vector<fs::path> corpus_programs() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(SILICA_CORPUS_DIR))
    if (e.path().extension() == ".silica") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Types of depth <= 3 over C (two states) and a one-parameter G.
std::vector<Type> types_up_to(int depth) {
  std::vector<Mode> modes = {Mode::owned(),         Mode::unowned(),        Mode::shared(),
                             Mode::symbol("S"),     Mode::symbol("p"),      Mode::of_states({"S", "T"})};
  std::vector<Type> out = {Type::make_unit()};
  for (const auto& m : modes) out.push_back(Type::ref(ContractRef::concrete("C"), m));
  if (depth <= 1) return out;
  std::vector<Type> inner = types_up_to(depth - 1);
  for (const auto& a : inner) {
    if (a.unit) continue;
    for (const auto& m : {Mode::owned(), Mode::symbol("S")})
      out.push_back(Type::ref(ContractRef::concrete("G", {a}), m));
  }
  return out;
}

}  // namespace

TEST(Parser, CorpusRoundTrips) {
  auto files = corpus_programs();
  ASSERT_GE(files.size(), 15u);
  for (const auto& f : files) {
    ParseResult a = parse_program(read_file(f).value(), f.string());
    ASSERT_TRUE(a.ok()) << f;
    std::string printed = render_program(*a.program);
    ParseResult b = parse_program(printed, "printed");
    ASSERT_TRUE(b.ok()) << f << "\n" << printed;
    EXPECT_EQ(render_program(*b.program), printed) << f;
    EXPECT_TRUE(same_expr(a.program->main, b.program->main)) << f;
  }
}

TEST(Parser, TypeRoundTripsToDepthThree) {
  auto all = types_up_to(3);
  EXPECT_GT(all.size(), 40u);
  for (const auto& t : all) {
    std::string text = render_type(t);
    TypeParseResult p = parse_type(text);
    ASSERT_TRUE(p.type) << text;
    EXPECT_TRUE(*p.type == t) << text << " reparsed as " << render_type(*p.type);
  }
}

TEST(Parser, RejectsWithSpannedDiagnostic) {
  const std::vector<std::string> bad = {
      "contract C { state S; }\nmain\n  let x: C@Owned = new C.S( in ()\n",
      "contract C { state S }\nmain\n  ()\n",
      "contract C { state S; }\n",
      "contract C { state S; }\nmain\n  let x: C@(S|S) = new C.S() in ()\n",
      "contract C { state S; }\nmain\n  let caf\xc3\xa9: unit = () in ()\n",
      "contract let { state S; }\nmain\n  ()\n",
  };
  for (const auto& src : bad) {
    ParseResult r = parse_program(src, "bad.silica");
    EXPECT_FALSE(r.ok()) << src;
    ASSERT_FALSE(r.diagnostics.empty()) << src;
    for (const auto& d : r.diagnostics) {
      EXPECT_GT(d.span.line, 0) << src;
      EXPECT_GT(d.span.col, 0) << src;
      EXPECT_EQ(d.span.file, "bad.silica");
    }
  }
}

TEST(Parser, CommentsAndPositions) {
  ParseResult r = parse_program("# leading\ncontract C { state S; } # trailing\nmain\n  # inner\n  y\n", "c.silica");
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.program->main->span.line, 5);
  EXPECT_EQ(r.program->main->span.col, 3);
}

TEST(Parser, ContractFieldsMoveToEveryState) {
  ParseResult r = parse_program(
      "contract C { unit shared; state S { unit own; } state T; }\nmain\n  ()\n", "f.silica");
  ASSERT_TRUE(r.ok());
  Program d = desugar(*r.program);
  const ContractDecl& c = d.contracts.at(0);
  ASSERT_EQ(c.states.size(), 2u);
  ASSERT_EQ(c.states[0].fields.size(), 2u);
  EXPECT_EQ(c.states[0].fields[0].name, "shared");
  EXPECT_EQ(c.states[0].fields[1].name, "own");
  ASSERT_EQ(c.states[1].fields.size(), 1u);
  EXPECT_EQ(c.states[1].fields[0].name, "shared");
}

TEST(Parser, ModeForms) {
  auto t = parse_type("C@(T|S)");
  ASSERT_TRUE(t.type);
  EXPECT_TRUE(t.type->mode.is_states());
  EXPECT_EQ(t.type->mode.states, (std::vector<std::string>{"S", "T"}));
  auto s = parse_type("C@S");
  ASSERT_TRUE(s.type);
  EXPECT_EQ(s.type->mode.kind, Mode::Kind::Name);
  EXPECT_TRUE(parse_type("unit").type->unit);
  EXPECT_THROW(Mode::of_states({"S", "S"}), std::invalid_argument);
  EXPECT_THROW(Mode::of_states({}), std::invalid_argument);
}

TEST(Parser, ExpressionForms) {
  for (const char* src : {"x.f := y", "x->S(a, b)", "[x @ Owned]", "disown x", "pack", "x.t<C@Owned>(y)",
                          "if x in (S|T) { () } else { x }", "let a: unit = () in a"}) {
    ExprParseResult r = parse_expression(src);
    EXPECT_TRUE(r.ok()) << src;
    if (r.ok()) EXPECT_TRUE(same_expr(parse_expression(render_expr(r.expr)).expr, r.expr)) << src;
  }
}

TEST(Parser, Keywords) {
  for (const char* k : {"contract", "asset", "disown", "pack", "main", "where", "returns", "this", "unit"})
    EXPECT_TRUE(is_keyword(k)) << k;
  EXPECT_FALSE(is_keyword("Owned"));
}
