#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace silica::testing {

struct PropertyResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t failures = 0;
  std::string first_failure;
  bool ok() const { return failures == 0; }
};

PropertyResult prop_split_non_disposability();
PropertyResult prop_merge_symmetry();
PropertyResult prop_merge_idempotence();
PropertyResult prop_merge_subtyping();
PropertyResult prop_subpermission_closure();
PropertyResult prop_compatibility_closure();
PropertyResult prop_classification();
PropertyResult prop_subtype_order();
PropertyResult prop_l_stronger_reflexive();

// The judgment-algebra suite: split, merge (three laws), subpermission and
// compatibility.
std::vector<PropertyResult> judgment_algebra_suite();

}  // namespace silica::testing
