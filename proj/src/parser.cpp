#include "silica/parser.hpp"

#include <algorithm>
#include <set>

namespace silica {

namespace {

const std::set<std::string>& keywords() {
  static const std::set<std::string> k = {
      "contract", "interface", "asset", "state",      "transaction", "private",
      "let",      "in",        "new",   "if",         "else",        "disown",
      "pack",     "main",      "implements", "where", "returns",     "this",
      "unit"};
  return k;
}

struct Token {
  enum class Kind { Ident, Sym, End };
  Kind kind = Kind::End;
  std::string text;
  int line = 0, col = 0, end_line = 0, end_col = 0;
};

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(Diagnostic d) : std::runtime_error(d.message), diag(std::move(d)) {}
  Diagnostic diag;
};

Diagnostic syntax(const std::string& code, const SourceSpan& span, const std::string& msg) {
  return Diagnostic{Diagnostic::Severity::Error, code, span, "syntax", msg};
}

std::vector<Token> lex(const std::string& src, const std::string& file, std::vector<Diagnostic>& diags) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto adv = [&]() {
    if (src[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++i;
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      adv();
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') adv();
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha(static_cast<unsigned char>(c)) && static_cast<unsigned char>(c) < 128 || c == '_') {
      t.kind = Token::Kind::Ident;
      while (i < src.size()) {
        unsigned char d = static_cast<unsigned char>(src[i]);
        if (d < 128 && (std::isalnum(d) || d == '_')) {
          t.text += src[i];
          adv();
        } else {
          break;
        }
      }
    } else if ((c == '-' || c == ':') && i + 1 < src.size() &&
               ((c == '-' && src[i + 1] == '>') || (c == ':' && src[i + 1] == '='))) {
      t.kind = Token::Kind::Sym;
      t.text = src.substr(i, 2);
      adv();
      adv();
    } else if (std::string("{}()<>[],;:.@|=").find(c) != std::string::npos) {
      t.kind = Token::Kind::Sym;
      t.text = std::string(1, c);
      adv();
    } else {
      SourceSpan sp{file, line, col, line, col};
      diags.push_back(syntax("SYN001", sp, "unexpected character"));
      adv();
      continue;
    }
    t.end_line = line;
    t.end_col = col;
    out.push_back(t);
  }
  Token end;
  end.kind = Token::Kind::End;
  end.line = end.end_line = line;
  end.col = end.end_col = col;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string file) : toks_(std::move(toks)), file_(std::move(file)) {}

  Program program(std::vector<Diagnostic>& diags) {
    Program p;
    std::set<std::string> names;
    bool saw_main = false;
    while (!at_end()) {
      try {
        if (is_word("contract")) {
          ContractDecl c = contract();
          if (!names.insert(c.name).second)
            diags.push_back(syntax("SYN003", c.span, "duplicate declaration name '" + c.name + "'"));
          p.contracts.push_back(std::move(c));
        } else if (is_word("interface")) {
          InterfaceDecl d = interface_decl();
          if (!names.insert(d.name).second)
            diags.push_back(syntax("SYN003", d.span, "duplicate declaration name '" + d.name + "'"));
          p.interfaces.push_back(std::move(d));
        } else if (is_word("main")) {
          next();
          p.main = expr();
          saw_main = true;
          if (!at_end()) fail("SYN001", peek(), "unexpected '" + peek().text + "' after main expression");
        } else {
          fail("SYN001", peek(), "expected 'contract', 'interface' or 'main'");
        }
      } catch (const ParseError& e) {
        diags.push_back(e.diag);
        resync();
      }
    }
    if (!saw_main && diags.empty())
      diags.push_back(syntax("SYN001", span_of(peek()), "missing 'main' expression"));
    return p;
  }

  ExprPtr whole_expression() {
    ExprPtr e = expr();
    if (!at_end()) fail("SYN001", peek(), "unexpected '" + peek().text + "'");
    return e;
  }

  Type whole_type() {
    Type t = type();
    if (!at_end()) fail("SYN001", peek(), "unexpected '" + peek().text + "'");
    return t;
  }

 private:
  std::vector<Token> toks_;
  std::string file_;
  std::size_t pos_ = 0;

  const Token& peek(std::size_t k = 0) const {
    std::size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == Token::Kind::End; }
  bool is_sym(const std::string& s, std::size_t k = 0) const {
    return peek(k).kind == Token::Kind::Sym && peek(k).text == s;
  }
  bool is_word(const std::string& w, std::size_t k = 0) const {
    return peek(k).kind == Token::Kind::Ident && peek(k).text == w;
  }
  // `>>` is two adjacent `>` tokens so that nested generic arguments close cleanly.
  bool is_shift() const {
    return is_sym(">") && is_sym(">", 1) && peek(1).line == peek().line && peek(1).col == peek().col + 1;
  }

  SourceSpan span_of(const Token& t) const { return {file_, t.line, t.col, t.end_line, t.end_col}; }
  SourceSpan from(const Token& start) const {
    const Token& last = toks_[pos_ == 0 ? 0 : pos_ - 1];
    return {file_, start.line, start.col, last.end_line, last.end_col};
  }

  [[noreturn]] void fail(const std::string& code, const Token& t, const std::string& msg) const {
    throw ParseError(syntax(code, span_of(t), msg));
  }

  void expect_sym(const std::string& s) {
    if (!is_sym(s)) fail("SYN001", peek(), "expected '" + s + "' but found '" + describe(peek()) + "'");
    next();
  }
  void expect_word(const std::string& w) {
    if (!is_word(w)) fail("SYN001", peek(), "expected '" + w + "' but found '" + describe(peek()) + "'");
    next();
  }
  void expect_shift() {
    if (!is_shift()) fail("SYN001", peek(), "expected '>>' but found '" + describe(peek()) + "'");
    next();
    next();
  }
  static std::string describe(const Token& t) { return t.kind == Token::Kind::End ? "end of input" : t.text; }

  std::string ident() {
    const Token& t = peek();
    if (t.kind != Token::Kind::Ident) fail("SYN001", t, "expected identifier but found '" + describe(t) + "'");
    if (keywords().count(t.text)) fail("SYN001", t, "keyword '" + t.text + "' used as identifier");
    next();
    return t.text;
  }

  void resync() {
    if (!at_end()) next();
    while (!at_end() && !is_word("contract") && !is_word("interface") && !is_word("main")) next();
  }

  // ---- declarations ----

  ContractDecl contract() {
    const Token& start = peek();
    expect_word("contract");
    ContractDecl c;
    c.name = ident();
    if (is_sym("<")) c.generics = generic_params();
    if (is_word("implements")) {
      next();
      c.implements = contract_ref();
    }
    expect_sym("{");
    std::set<std::string> states, txns;
    while (!is_sym("}")) {
      if (at_end()) fail("SYN001", peek(), "unterminated contract body");
      if (is_word("state") || (is_word("asset") && is_word("state", 1))) {
        StateDecl st = state_decl();
        if (!states.insert(st.name).second)
          fail("SYN003", start, "duplicate state '" + st.name + "' in " + c.name);
        c.states.push_back(std::move(st));
      } else if (is_word("transaction") || is_word("private")) {
        Transaction t;
        t.sig = signature(c.name);
        if (!txns.insert(t.sig.name).second)
          fail("SYN003", start, "duplicate transaction '" + t.sig.name + "' in " + c.name);
        expect_sym("{");
        t.body = expr();
        expect_sym("}");
        c.transactions.push_back(std::move(t));
      } else {
        c.contract_fields.push_back(field_decl());
      }
    }
    next();
    c.span = from(start);
    return c;
  }

  InterfaceDecl interface_decl() {
    const Token& start = peek();
    expect_word("interface");
    InterfaceDecl d;
    d.name = ident();
    if (is_sym("<")) d.generics = generic_params();
    expect_sym("{");
    std::set<std::string> states, txns;
    while (!is_sym("}")) {
      if (at_end()) fail("SYN001", peek(), "unterminated interface body");
      if (is_word("state") || (is_word("asset") && is_word("state", 1))) {
        StateDecl st = state_decl();
        if (!states.insert(st.name).second)
          fail("SYN003", start, "duplicate state '" + st.name + "' in " + d.name);
        d.states.push_back(std::move(st));
      } else {
        TransactionSig s = signature(d.name);
        if (!txns.insert(s.name).second)
          fail("SYN003", start, "duplicate transaction '" + s.name + "' in " + d.name);
        expect_sym(";");
        d.signatures.push_back(std::move(s));
      }
    }
    next();
    d.span = from(start);
    return d;
  }

  std::vector<GenericParam> generic_params() {
    expect_sym("<");
    std::vector<GenericParam> out;
    do {
      const Token& start = peek();
      GenericParam g;
      if (is_word("asset")) {
        next();
        g.asset = true;
      }
      g.decl_var = ident();
      expect_sym("@");
      g.perm_var = ident();
      expect_word("where");
      g.bound_iface = contract_ref();
      expect_sym("@");
      g.bound_mode = mode();
      g.span = from(start);
      out.push_back(std::move(g));
    } while (is_sym(",") && (next(), true));
    expect_sym(">");
    return out;
  }

  StateDecl state_decl() {
    const Token& start = peek();
    StateDecl st;
    if (is_word("asset")) {
      next();
      st.asset = true;
    }
    expect_word("state");
    st.name = ident();
    if (is_sym(";")) {
      next();
    } else {
      expect_sym("{");
      while (!is_sym("}")) {
        if (at_end()) fail("SYN001", peek(), "unterminated state body");
        st.fields.push_back(field_decl());
      }
      next();
    }
    st.span = from(start);
    return st;
  }

  FieldDecl field_decl() {
    const Token& start = peek();
    FieldDecl f;
    f.type = type();
    f.name = ident();
    expect_sym(";");
    f.span = from(start);
    return f;
  }

  TransactionSig signature(const std::string& owner) {
    const Token& start = peek();
    TransactionSig s;
    if (is_word("private")) {
      next();
      s.is_private = true;
      if (is_sym("[")) {
        next();
        if (!is_sym("]")) {
          do {
            FieldSpec fs;
            fs.field = ident();
            expect_sym(":");
            fs.pre = mode();
            expect_shift();
            fs.post = mode();
            s.field_specs.push_back(std::move(fs));
          } while (is_sym(",") && (next(), true));
        }
        expect_sym("]");
      }
    }
    expect_word("transaction");
    s.name = ident();
    if (is_sym("<")) s.generics = generic_params();
    expect_sym("(");
    const Token& recv = peek();
    std::string recv_name = ident();
    if (recv_name != owner) fail("SYN001", recv, "receiver type must name the enclosing declaration '" + owner + "'");
    expect_sym("@");
    s.this_pre = mode();
    s.this_post = s.this_pre;
    if (is_shift()) {
      expect_shift();
      s.this_post = mode();
    }
    expect_word("this");
    while (is_sym(",")) {
      next();
      Param p;
      p.type = type();
      p.post = p.type.mode;
      if (is_shift()) {
        expect_shift();
        p.post = mode();
      }
      p.name = ident();
      s.params.push_back(std::move(p));
    }
    expect_sym(")");
    if (is_word("returns")) {
      next();
      s.ret = type();
    }
    s.span = from(start);
    return s;
  }

  // ---- types ----

  ContractRef contract_ref() {
    ContractRef c;
    c.name = ident();
    if (is_sym("<")) {
      next();
      do {
        c.args.push_back(type());
      } while (is_sym(",") && (next(), true));
      expect_sym(">");
    }
    return c;
  }

  Type type() {
    if (is_word("unit")) {
      next();
      return Type::make_unit();
    }
    ContractRef c = contract_ref();
    expect_sym("@");
    return Type::ref(std::move(c), mode());
  }

  Mode mode() {
    if (is_sym("(")) {
      const Token& start = next();
      std::vector<std::string> names;
      do {
        names.push_back(ident());
      } while (is_sym("|") && (next(), true));
      expect_sym(")");
      std::vector<std::string> sorted = names;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        fail("SYN001", start, "duplicate state in state set");
      return Mode::of_states(std::move(names));
    }
    const Token& t = peek();
    std::string n = ident();
    if (n == "Owned") return Mode::owned();
    if (n == "Unowned") return Mode::unowned();
    if (n == "Shared") return Mode::shared();
    (void)t;
    return Mode::symbol(std::move(n));
  }

  // ---- expressions ----

  Binding simple() {
    if (is_word("this")) {
      next();
      return Binding::this_var();
    }
    return Binding::var(ident());
  }

  bool starts_simple() const {
    return peek().kind == Token::Kind::Ident && (peek().text == "this" || !keywords().count(peek().text));
  }

  bool starts_expression() const {
    if (starts_simple()) return true;
    static const std::set<std::string> heads = {"let", "if", "new", "disown", "pack"};
    if (peek().kind == Token::Kind::Ident && heads.count(peek().text)) return true;
    return is_sym("(") || is_sym("[");
  }

  Binding argument() {
    const Token& start = peek();
    if (starts_simple()) {
      Binding b = simple();
      if (!is_sym(",") && !is_sym(")"))
        fail("SYN002", start, "argument must be a simple variable (A-normal form)");
      return b;
    }
    if (starts_expression()) fail("SYN002", start, "argument must be a simple variable (A-normal form)");
    fail("SYN001", start, "expected argument but found '" + describe(start) + "'");
  }

  std::vector<Binding> arguments() {
    expect_sym("(");
    std::vector<Binding> out;
    if (!is_sym(")")) {
      do {
        out.push_back(argument());
      } while (is_sym(",") && (next(), true));
    }
    expect_sym(")");
    return out;
  }

  ExprPtr expr() {
    const Token& start = peek();
    if (is_word("let")) {
      next();
      ex::Let l;
      l.var = ident();
      expect_sym(":");
      l.type = type();
      expect_sym("=");
      l.bound = expr();
      expect_word("in");
      l.body = expr();
      return mk(std::move(l), from(start));
    }
    if (is_word("if")) {
      next();
      ex::DynCheck d;
      d.b = simple();
      expect_word("in");
      d.mode = mode();
      expect_sym("{");
      d.then_e = expr();
      expect_sym("}");
      expect_word("else");
      expect_sym("{");
      d.else_e = expr();
      expect_sym("}");
      return mk(std::move(d), from(start));
    }
    if (is_word("disown")) {
      next();
      ex::Disown d{simple()};
      return mk(std::move(d), from(start));
    }
    if (is_word("pack")) {
      next();
      return mk(ex::Pack{}, from(start));
    }
    if (is_word("new")) {
      next();
      ex::New n;
      n.contract = contract_ref();
      expect_sym(".");
      n.state = ident();
      n.args = arguments();
      return mk(std::move(n), from(start));
    }
    if (is_sym("[")) {
      next();
      ex::StaticAssert a;
      a.b = simple();
      expect_sym("@");
      a.mode = mode();
      expect_sym("]");
      return mk(std::move(a), from(start));
    }
    if (is_sym("(")) {
      next();
      expect_sym(")");
      return mk(ex::UnitLit{}, from(start));
    }
    if (!starts_simple()) fail("SYN001", start, "expected expression but found '" + describe(start) + "'");
    Binding s = simple();
    if (is_sym("->")) {
      next();
      ex::Transition t;
      t.recv = s;
      t.state = ident();
      t.args = arguments();
      return mk(std::move(t), from(start));
    }
    if (is_sym(".")) {
      next();
      std::string name = ident();
      if (is_sym(":=")) {
        next();
        const Token& src_tok = peek();
        if (!starts_simple()) {
          if (starts_expression()) fail("SYN002", src_tok, "assigned value must be a simple variable (A-normal form)");
          fail("SYN001", src_tok, "expected variable but found '" + describe(src_tok) + "'");
        }
        ex::FieldWrite w{s, name, simple()};
        if (is_sym(".") || is_sym("(") || is_sym("->"))
          fail("SYN002", src_tok, "assigned value must be a simple variable (A-normal form)");
        return mk(std::move(w), from(start));
      }
      if (is_sym("<") || is_sym("(")) {
        ex::Invoke inv;
        inv.recv = s;
        inv.name = name;
        if (is_sym("<")) {
          next();
          do {
            inv.targs.push_back(type());
          } while (is_sym(",") && (next(), true));
          expect_sym(">");
        }
        inv.args = arguments();
        return mk(std::move(inv), from(start));
      }
      return mk(ex::FieldRead{s, name}, from(start));
    }
    return mk(ex::Simple{s}, from(start));
  }
};

}  // namespace

bool is_keyword(const std::string& word) { return keywords().count(word) > 0; }

ParseResult parse_program(const std::string& source, const std::string& file) {
  ParseResult r;
  auto toks = lex(source, file, r.diagnostics);
  Parser p(std::move(toks), file);
  Program prog = p.program(r.diagnostics);
  if (r.diagnostics.empty()) r.program = std::move(prog);
  return r;
}

ExprParseResult parse_expression(const std::string& source, const std::string& file) {
  ExprParseResult r;
  auto toks = lex(source, file, r.diagnostics);
  if (!r.diagnostics.empty()) return r;
  Parser p(std::move(toks), file);
  try {
    r.expr = p.whole_expression();
  } catch (const ParseError& e) {
    r.diagnostics.push_back(e.diag);
  }
  return r;
}

TypeParseResult parse_type(const std::string& source) {
  TypeParseResult r;
  auto toks = lex(source, "<type>", r.diagnostics);
  if (!r.diagnostics.empty()) return r;
  Parser p(std::move(toks), "<type>");
  try {
    r.type = p.whole_type();
  } catch (const ParseError& e) {
    r.diagnostics.push_back(e.diag);
  }
  return r;
}

}  // namespace silica
