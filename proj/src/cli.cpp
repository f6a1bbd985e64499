#include "silica/cli.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "silica/interpreter.hpp"
#include "silica/metatheory.hpp"
#include "silica/parser.hpp"

namespace silica {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

Diagnostic make_diag(std::string code, std::string file, std::string rule, std::string msg, SourceSpan span = {}) {
  Diagnostic d;
  d.code = std::move(code);
  d.span = std::move(span);
  if (d.span.file.empty()) d.span.file = std::move(file);
  d.rule = std::move(rule);
  d.message = std::move(msg);
  return d;
}

// InternalError messages carry their code as a prefix.
std::string strip_code(const std::string& what) {
  return what.rfind("INT001 ", 0) == 0 ? what.substr(7) : what;
}

const std::set<std::string> kStuckKinds = {"reentrancy", "bad-transition", "nested-state-check"};

}  // namespace

std::optional<std::string> read_file(const fs::path& p) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return std::nullopt;
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Analysis analyze(const std::string& source, const std::string& file) {
  Analysis a;
  ParseResult pr = parse_program(source, file);
  if (!pr.ok()) {
    a.diagnostics = pr.diagnostics;
    return a;
  }
  CheckedProgram cp = check_program(*pr.program);
  if (!cp.ok()) {
    a.diagnostics = cp.diagnostics;
    return a;
  }
  a.program = std::move(cp);
  return a;
}

int cmd_check(const std::string& path, std::ostream& out, bool color) {
  auto src = read_file(path);
  if (!src) {
    out << format_diagnostic(make_diag("IO001", path, "-", "cannot read file"), color) << "\n";
    return kExitIo;
  }
  try {
    Analysis a = analyze(*src, path);
    for (const auto& d : a.diagnostics) out << format_diagnostic(d, color) << "\n";
    if (!a.program) return kExitDiagnostics;
    out << "OK " << path << " : " << render_type(a.program->main_type) << "\n";
    return kExitOk;
  } catch (const InternalError& e) {
    out << format_diagnostic(make_diag("INT001", path, "-", strip_code(e.what())), color) << "\n";
    return kExitInternal;
  }
}

int cmd_run(const std::string& path, const RunOptions& opts, std::ostream& out, bool color) {
  auto src = read_file(path);
  if (!src) {
    out << format_diagnostic(make_diag("IO001", path, "-", "cannot read file"), color) << "\n";
    return kExitIo;
  }
  try {
    Analysis a = analyze(*src, path);
    for (const auto& d : a.diagnostics) out << format_diagnostic(d, color) << "\n";
    if (!a.program) return kExitDiagnostics;

    if (!opts.verify) {
      EvalReport r = evaluate(*a.program, opts.fuel, opts.trace);
      for (const auto& t : r.trace) out << "STEP " << t.n << " " << t.rule << " " << t.summary << "\n";
      out << outcome_line(r) << "\n";
      return kExitOk;
    }

    VerifiedRun v = verified_run(*a.program, opts.fuel, opts.trace);
    std::size_t shown = 0;
    for (const auto& t : v.report.trace) {
      out << "STEP " << t.n << " " << t.rule << " " << t.summary << "\n";
      if (shown < v.verdicts.size() && v.verdicts[shown].step == t.n) out << verdict_line(v.verdicts[shown++]) << "\n";
    }
    for (; shown < v.verdicts.size(); ++shown) out << verdict_line(v.verdicts[shown]) << "\n";
    for (const auto& d : v.disowns) out << "DISOWN step=" << d.step << " object=" << d.object << "\n";
    bool bad = false;
    for (const auto& vd : v.verdicts)
      if (!vd.pass()) {
        out << format_diagnostic(make_diag(vd.verdict, path, vd.rule, vd.detail, vd.span), color) << "\n";
        bad = true;
      }
    if (!bad && !v.halted.empty()) {
      std::string code = v.halted.substr(0, v.halted.find(' '));
      out << format_diagnostic(make_diag(code, path, "-", v.halted.substr(code.size() + 1)), color) << "\n";
      bad = true;
    }
    for (const auto& f : v.findings) {
      out << format_diagnostic(make_diag(f.code, path, "audit", f.detail, f.span), color) << "\n";
      bad = true;
    }
    if (bad) return kExitInternal;
    out << outcome_line(v.report) << "\n";
    return kExitOk;
  } catch (const InternalError& e) {
    out << format_diagnostic(make_diag("INT001", path, "-", strip_code(e.what())), color) << "\n";
    return kExitInternal;
  }
}

std::vector<CorpusCase> load_manifest(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw ManifestError("IO001", "cannot read directory " + dir.string());
  fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath, ec)) {
    if (fs::directory_iterator(dir, ec) == fs::directory_iterator()) return {};
    throw ManifestError("MAN001", "missing manifest.json in " + dir.string());
  }
  auto text = read_file(mpath);
  if (!text) throw ManifestError("IO001", "cannot read " + mpath.string());
  json m = json::parse(*text, nullptr, false);
  if (m.is_discarded()) throw ManifestError("MAN001", "manifest.json is not valid JSON");
  if (!m.is_object() || !m.contains("cases") || !m["cases"].is_array())
    throw ManifestError("MAN001", "manifest must be an object with a \"cases\" array");

  std::vector<CorpusCase> cases;
  std::set<std::string> names;
  for (const auto& c : m["cases"]) {
    auto fail = [&](const std::string& why) {
      throw ManifestError("MAN001", "case " + (c.is_object() ? c.value("program", std::string("?")) : "?") + ": " + why);
    };
    if (!c.is_object() || !c.contains("program") || !c["program"].is_string()) fail("needs a \"program\" string");
    if (!c.contains("expect") || !c["expect"].is_string()) fail("needs an \"expect\" string");
    CorpusCase cc;
    std::string prog = c["program"];
    cc.program = dir / prog;
    cc.name = fs::path(prog).stem().string();
    if (!names.insert(cc.name).second) fail("duplicate case");
    std::string kind = c["expect"];
    if (kind == "accept") {
      cc.kind = CorpusCase::Kind::Accept;
    } else if (kind == "reject") {
      cc.kind = CorpusCase::Kind::Reject;
      if (!c.contains("codes") || !c["codes"].is_array() || c["codes"].empty()) fail("reject needs a \"codes\" list");
      for (const auto& code : c["codes"]) {
        if (!code.is_string() || !known_code(code.get<std::string>())) fail("unknown diagnostic code " + code.dump());
        cc.codes.push_back(code);
      }
    } else if (kind == "eval") {
      cc.kind = CorpusCase::Kind::Eval;
      if (!c.contains("outcome") || !c["outcome"].is_string()) fail("eval needs an \"outcome\" string");
      cc.outcome = c["outcome"];
      if (cc.outcome.rfind("FINISHED ", 0) != 0 && cc.outcome != "FUEL") fail("eval outcome must be FINISHED or FUEL");
    } else if (kind == "stuck") {
      cc.kind = CorpusCase::Kind::Stuck;
      if (!c.contains("stuck") || !c["stuck"].is_string() || !kStuckKinds.count(c["stuck"].get<std::string>()))
        fail("stuck needs one of reentrancy, bad-transition, nested-state-check");
      cc.stuck = c["stuck"];
    } else {
      fail("unknown expectation \"" + kind + "\"");
    }
    if (c.contains("fuel")) {
      if (!c["fuel"].is_number_unsigned()) fail("fuel must be a non-negative integer");
      cc.fuel = c["fuel"];
    }
    if (c.contains("verify")) {
      if (!c["verify"].is_boolean()) fail("verify must be a boolean");
      cc.verify = c["verify"];
    }
    cases.push_back(std::move(cc));
  }
  return cases;
}

CaseResult run_case(const CorpusCase& c) {
  CaseResult r;
  switch (c.kind) {
    case CorpusCase::Kind::Accept: r.expected = "accept"; break;
    case CorpusCase::Kind::Reject: {
      r.expected = "reject";
      for (const auto& code : c.codes) r.expected += " " + code;
      break;
    }
    case CorpusCase::Kind::Eval: r.expected = c.outcome; break;
    case CorpusCase::Kind::Stuck: r.expected = "STUCK " + c.stuck; break;
  }
  auto src = read_file(c.program);
  if (!src) {
    r.got = "IO001";
    return r;
  }
  try {
    Analysis a = analyze(*src, c.program.string());
    if (!a.program) {
      std::vector<std::string> codes;
      for (const auto& d : a.diagnostics) codes.push_back(d.code);
      r.got = "reject";
      for (const auto& code : codes) r.got += " " + code;
      r.pass = c.kind == CorpusCase::Kind::Reject && codes == c.codes;
      return r;
    }
    if (c.kind == CorpusCase::Kind::Accept || c.kind == CorpusCase::Kind::Reject) {
      r.got = "accept";
      r.pass = c.kind == CorpusCase::Kind::Accept;
      return r;
    }
    std::string line;
    if (c.verify) {
      VerifiedRun v = verified_run(*a.program, c.fuel, false);
      if (!v.ok()) {
        std::string why = v.halted;
        if (why.empty() && !v.findings.empty()) why = v.findings.front().code + " " + v.findings.front().detail;
        r.got = why;
        return r;
      }
      line = outcome_line(v.report);
    } else {
      line = outcome_line(evaluate(*a.program, c.fuel, false));
    }
    r.got = line;
    r.pass = line == r.expected;
  } catch (const InternalError& e) {
    r.got = e.what();
  }
  return r;
}

int cmd_test(const std::string& dir, std::ostream& out, bool color) {
  std::vector<CorpusCase> cases;
  try {
    cases = load_manifest(dir);
  } catch (const ManifestError& e) {
    out << format_diagnostic(make_diag(e.code(), (fs::path(dir) / "manifest.json").string(), "-", e.what()), color)
        << "\n";
    return kExitIo;
  }
  std::size_t passed = 0;
  for (const auto& c : cases) {
    CaseResult r = run_case(c);
    if (r.pass) {
      ++passed;
      out << "PASS " << c.name << " " << r.got << "\n";
    } else {
      out << "FAIL " << c.name << " expected: " << r.expected << " got: " << r.got << "\n";
    }
  }
  if (cases.empty()) {
    out << "0 cases\n";
    return kExitOk;
  }
  out << cases.size() << " cases, " << passed << " passed, " << cases.size() - passed << " failed\n";
  return passed == cases.size() ? kExitOk : kExitDiagnostics;
}

}  // namespace silica
