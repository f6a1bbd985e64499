// Prints one PASS/FAIL line per acceptance check; exits 1 if any fails.

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "silica/cli.hpp"
#include "silica/interpreter.hpp"
#include "silica/metatheory.hpp"
#include "support/mutations.hpp"
#include "support/properties.hpp"

namespace fs = std::filesystem;
using namespace silica;

namespace {

const fs::path kCorpus = SILICA_CORPUS_DIR;

struct Line {
  bool pass = true;
  std::ostringstream note;
  void require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      note.str("");
      note << why;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string source(const std::string& stem) { return read_file(kCorpus / (stem + ".silica")).value_or(""); }

std::vector<std::string> codes_of(const std::string& src, const std::string& file) {
  std::vector<std::string> out;
  for (const auto& d : analyze(src, file).diagnostics) out.push_back(d.code);
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s.empty() ? "none" : s;
}

void flagship(Line& l) {
  auto t0 = std::chrono::steady_clock::now();
  auto ok = codes_of(source("tiny_vending_machine"), "tiny_vending_machine.silica");
  auto bad = codes_of(source("vending_no_deposit"), "vending_no_deposit.silica");
  double s = seconds_since(t0);
  l.require(ok.empty(), "vending machine rejected: " + join(ok));
  l.require(bad == std::vector<std::string>{"ASSET001"}, "no-deposit variant gave " + join(bad));
  l.require(s < 1.0, "took " + std::to_string(s) + " s");
  if (l.pass) l.note << "vending machine accepted; no-deposit variant gives exactly ASSET001 (" << s << " s)";
}

void typestate_gating(Line& l) {
  auto t0 = std::chrono::steady_clock::now();
  std::string base = source("tiny_vending_machine");
  std::string in_order =
      "let r: unit = m.restock(candy) in\n  let coin: Coin@Owned = new Coin.Minted() in\n"
      "  let got: Candy@Owned = m.buy(coin) in";
  std::string empty_first =
      "let coin: Coin@Owned = new Coin.Minted() in\n  let got: Candy@Owned = m.buy(coin) in\n"
      "  let r: unit = m.restock(candy) in";
  std::string empty = base;
  auto at = empty.find(in_order);
  l.require(at != std::string::npos, "vending main changed shape");
  if (!l.pass) return;
  empty.replace(at, in_order.size(), empty_first);

  std::string shared = base;
  shared.replace(shared.find("main\n"), 5,
                 "contract Buyer {\n  state Ready;\n\n"
                 "  transaction visit(Buyer@Owned this, TinyVendingMachine@Shared m, Coin@Owned >> Unowned c)"
                 " returns Candy@Owned {\n    m.buy(c)\n  }\n}\n\nmain\n");

  auto e = codes_of(empty, "buy_on_empty.silica");
  auto s = codes_of(shared, "buy_on_shared.silica");
  double secs = seconds_since(t0);
  l.require(e == std::vector<std::string>{"STATE001"}, "buy on @Empty gave " + join(e));
  l.require(s == std::vector<std::string>{"STATE001"}, "buy on @Shared gave " + join(s));
  l.require(secs < 1.0, "took " + std::to_string(secs) + " s");
  if (l.pass) l.note << "buy on @Empty and on @Shared receivers both give STATE001";
}

void stuck_cases(Line& l) {
  const std::vector<std::pair<std::string, std::string>> cases = {{"reentrancy_trap", "STUCK reentrancy"},
                                                                   {"shared_lock_trap", "STUCK bad-transition"},
                                                                   {"nested_dsc_trap", "STUCK nested-state-check"}};
  for (const auto& [stem, want] : cases) {
    auto t0 = std::chrono::steady_clock::now();
    Analysis a = analyze(source(stem), stem + ".silica");
    l.require(a.program.has_value(), stem + " rejected");
    if (!a.program) return;
    EvalReport r = evaluate(*a.program, 200, false);
    double secs = seconds_since(t0);
    l.require(outcome_line(r) == want, stem + " gave " + outcome_line(r));
    l.require(secs < 1.0, stem + " took " + std::to_string(secs) + " s");
    if (l.pass) l.note << stem << "=" << want.substr(6) << "@" << r.steps << " ";
  }
}

struct CorpusRuns {
  std::vector<std::pair<std::string, VerifiedRun>> runs;
  double seconds = 0;
  std::string error;
};

CorpusRuns verify_corpus() {
  CorpusRuns out;
  auto t0 = std::chrono::steady_clock::now();
  try {
    for (const auto& c : load_manifest(kCorpus)) {
      if (c.kind != CorpusCase::Kind::Eval && c.kind != CorpusCase::Kind::Stuck) continue;
      Analysis a = analyze(read_file(c.program).value_or(""), c.program.string());
      if (!a.program) {
        out.error = c.name + " rejected";
        continue;
      }
      out.runs.emplace_back(c.name, verified_run(*a.program, c.fuel, false));
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.seconds = seconds_since(t0);
  return out;
}

void preservation(Line& l, const CorpusRuns& cr) {
  l.require(cr.error.empty(), cr.error);
  std::size_t steps = 0;
  for (const auto& [name, v] : cr.runs) {
    for (const auto& vd : v.verdicts) {
      ++steps;
      l.require(vd.pass(), name + " step " + std::to_string(vd.step) + " " + vd.rule + ": " + vd.verdict + " " +
                               vd.detail);
    }
    l.require(v.halted.empty(), name + " halted: " + v.halted);
  }
  l.require(cr.seconds < 10.0, "suite took " + std::to_string(cr.seconds) + " s");
  if (l.pass)
    l.note << cr.runs.size() << " runs, " << steps << " verified steps, zero VER001/VER002 (" << cr.seconds << " s)";
}

void unicity(Line& l, const CorpusRuns& cr) {
  l.require(cr.error.empty(), cr.error);
  std::size_t points = 0;
  for (const auto& [name, v] : cr.runs) {
    points += v.ownership.size();
    for (const auto& f : v.findings) l.require(false, name + ": " + f.code + " " + f.detail);
    if (name != "disown_coin") continue;
    l.require(v.disowns.size() == 1, "disown_coin logged " + std::to_string(v.disowns.size()) + " disowns");
    if (v.disowns.size() != 1) continue;
    const DisownEvent& d = v.disowns.front();
    bool dropped = false;
    for (std::size_t i = 1; i < v.ownership.size(); ++i) {
      const auto& before = v.ownership[i - 1];
      const auto& after = v.ownership[i];
      auto b = before.owners.find(d.object);
      auto a = after.owners.find(d.object);
      int nb = b == before.owners.end() ? 0 : b->second;
      int na = a == after.owners.end() ? 0 : a->second;
      if (nb > 0 && na == 0) {
        dropped = true;
        l.require(after.step == d.step && after.disowned == d.object,
                  "owner count of o" + std::to_string(d.object) + " dropped at step " + std::to_string(after.step) +
                      ", disown logged at step " + std::to_string(d.step));
      }
    }
    l.require(dropped, "owner count of the disowned coin never dropped to zero");
  }
  if (l.pass) l.note << points << " trace points, zero AUD001/AUD002; disown_coin has one disown at the owner drop";
}

void properties(Line& l) {
  auto t0 = std::chrono::steady_clock::now();
  auto results = testing::judgment_algebra_suite();
  double secs = seconds_since(t0);
  std::ostringstream sizes;
  for (const auto& r : results) {
    l.require(r.ok(), r.name + ": " + std::to_string(r.failures) + " failures, first: " + r.first_failure);
    l.require(r.instances >= 1000, r.name + ": only " + std::to_string(r.instances) + " instances");
    sizes << r.name << "=" << r.instances << " ";
  }
  l.require(secs < 5.0, "suite took " + std::to_string(secs) + " s");
  if (l.pass) l.note << sizes.str() << "(" << secs << " s)";
}

void mutations(Line& l) {
  auto results = testing::run_all_mutations(kCorpus);
  std::size_t caught = 0;
  for (const auto& r : results) {
    l.require(r.detected, "survivor: " + r.name + " (" + r.how + ")");
    caught += r.detected;
  }
  l.require(testing::source_mutations().size() >= 10, "fewer than 10 source mutations");
  if (l.pass) l.note << caught << "/" << results.size() << " mutants rejected or detected";
}

}  // namespace

int main() {
  CorpusRuns cr = verify_corpus();
  const std::vector<std::pair<std::string, std::function<void(Line&)>>> checks = {
      {"flagship vending machine", flagship},
      {"typestate gating of buy", typestate_gating},
      {"stuck configurations", stuck_cases},
      {"preservation over the corpus", [&](Line& l) { preservation(l, cr); }},
      {"unicity and asset retention", [&](Line& l) { unicity(l, cr); }},
      {"judgment-algebra properties", properties},
      {"mutation robustness", mutations},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, fn] : checks) {
    Line l;
    try {
      fn(l);
    } catch (const std::exception& e) {
      l.require(false, std::string("exception: ") + e.what());
    }
    std::cout << (l.pass ? "PASS " : "FAIL ") << ++n << " " << name << ": " << l.note.str() << "\n";
    failed += !l.pass;
  }
  return failed ? 1 : 0;
}
