#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "silica/ast.hpp"
#include "silica/checker.hpp"
#include "silica/judgments.hpp"

namespace silica {

enum class StepKind { Stepped, Finished, StuckBadTransition, StuckReentrancy, StuckNestedStateCheck };

struct StepOutcome {
  StepKind kind = StepKind::Finished;
  std::string rule;             // Stepped: E-rule name
  const Expr* redex = nullptr;  // node of the pre-step expression that was reduced
  ExprPtr next;                 // Stepped: successor expression
  Value value;                  // Finished, or the value produced by E-lookup/E-new/E-field
  ObjId object = 0;             // stuck: offending object
  std::string detail;           // stuck: attempted state or transaction name
  std::optional<RefId> fresh;   // E-let: new indirect reference
  std::vector<RefId> fresh_args;                // E-inv: l1' then l2'
  std::shared_ptr<const CallFrame> frame;       // E-inv / E-privInv
  bool stuck() const {
    return kind == StepKind::StuckBadTransition || kind == StepKind::StuckReentrancy ||
           kind == StepKind::StuckNestedStateCheck;
  }
};

// Deliberate defects, used only by the mutation harness.
struct Faults {
  bool keep_lock_at_box_exit = false;  // E-box-phi leaves the object in phi
  bool drop_transition_field = false;  // transitions store unit in the first object field
  bool skip_state_update = false;      // owned transitions replace the fields but keep the old state
  bool confuse_state_check = false;    // owned state tests always take the then branch
  bool ignore_state_lock = false;      // shared transitions ignore phi
  bool skip_reentrancy_check = false;  // public invocations ignore psi
  bool any() const {
    return keep_lock_at_box_exit || drop_transition_field || skip_state_update || confuse_state_check ||
           ignore_state_lock || skip_reentrancy_check;
  }
};

class Interpreter {
 public:
  explicit Interpreter(std::shared_ptr<const Decls> decls, Faults faults = {});

  // One small step. On Stepped, `sigma` is updated in place.
  StepOutcome step(RuntimeConfig& sigma, const ExprPtr& e) const;

  // Names of every rule whose premises hold for the redex of `e`. Used to
  // test determinism; step() fails with INT001 if more than one matches.
  std::vector<std::string> applicable_rules(const RuntimeConfig& sigma, const ExprPtr& e) const;

  // lookup over xi: variables resolve through the permission environment.
  static Mode resolve_mode(const RuntimeConfig& sigma, const Mode& m);

  const Decls& decls() const { return *decls_; }

 private:
  std::shared_ptr<const Decls> decls_;
  Judgments j_;
  Faults faults_;

  StepOutcome reduce(RuntimeConfig& sigma, const ExprPtr& e, bool dry) const;
  StepOutcome invoke(RuntimeConfig& sigma, const ExprPtr& e, bool dry) const;
  StepOutcome dyn_check(RuntimeConfig& sigma, const ExprPtr& e, bool dry, std::vector<std::string>* rules) const;
};

struct TraceEntry {
  std::size_t n = 0;
  std::string rule;
  std::string summary;
};

struct EvalReport {
  StepOutcome outcome;  // terminal outcome; meaningless when fuel_exhausted
  bool fuel_exhausted = false;
  std::size_t steps = 0;
  std::vector<TraceEntry> trace;
  RuntimeConfig final_config;
};

EvalReport evaluate(const CheckedProgram& program, std::size_t fuel, bool trace, Faults faults = {});

// One-line rendering of an expression, at most `width` characters.
std::string summarize(const ExprPtr& e, std::size_t width = 80);

// `FINISHED unit`, `FINISHED object <id> <Contract>.<State>`, `STUCK <kind>` or `FUEL`.
std::string outcome_line(const EvalReport& r);

}  // namespace silica
