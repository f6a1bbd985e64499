#include "support/universe.hpp"

#include <algorithm>
#include <stdexcept>

#include "silica/cli.hpp"

namespace silica::testing {

namespace {

std::string state_line(bool asset, const std::string& name) {
  return std::string("  ") + (asset ? "asset " : "") + "state " + name + ";\n";
}

std::string universe_source(unsigned mask) {
  bool a1 = mask & 1u, a2 = mask & 2u, b1 = mask & 4u, b2 = mask & 8u;
  return "interface I {\n" + state_line(a1, "A1") + state_line(a2, "A2") + "}\n" +
         "contract A implements I {\n" + state_line(a1, "A1") + state_line(a2, "A2") + "}\n" +
         "contract B<X@p where I@Owned> {\n" + state_line(b1, "B1") + state_line(b2, "B2") + "}\n" +
         "main\n  ()\n";
}

}  // namespace

std::vector<std::string> Universe::states_of(const ContractRef& head) const {
  if (head.name == "B") return {"B1", "B2"};
  return {"A1", "A2"};
}

bool Universe::state_asset(const ContractRef& head, const std::string& s) const {
  unsigned bit = 0;
  if (head.name == "B") bit = s == "B1" ? 4u : 8u;
  else bit = s == "A1" ? 1u : 2u;
  return asset_mask & bit;
}

std::vector<Mode> concrete_modes(const std::vector<std::string>& states) {
  std::vector<Mode> out = {Mode::owned(), Mode::unowned(), Mode::shared()};
  for (unsigned bits = 1; bits < (1u << states.size()); ++bits) {
    std::vector<std::string> pick;
    for (std::size_t i = 0; i < states.size(); ++i)
      if (bits & (1u << i)) pick.push_back(states[i]);
    out.push_back(Mode::of_states(pick));
  }
  return out;
}

Universe make_universe(unsigned asset_mask) {
  Analysis a = analyze(universe_source(asset_mask), "<universe>");
  if (!a.program) throw std::runtime_error("universe program rejected: " + a.diagnostics.front().message);
  Universe u;
  u.asset_mask = asset_mask;
  u.decls = a.program->decls;
  ContractRef ca = ContractRef::concrete("A");
  u.heads = {ca, ContractRef::concrete("I"), ContractRef::concrete("B", {Type::ref(ca, Mode::owned())}),
             ContractRef::concrete("B", {Type::ref(ca, Mode::shared())})};
  u.types.push_back(Type::make_unit());
  for (const auto& h : u.heads)
    for (const auto& m : concrete_modes(u.states_of(h))) u.types.push_back(Type::ref(h, m));
  return u;
}

const std::vector<Universe>& all_universes() {
  static const std::vector<Universe> all = [] {
    std::vector<Universe> v;
    for (unsigned m = 0; m < 16; ++m) v.push_back(make_universe(m));
    return v;
  }();
  return all;
}

bool brute_asset(const Universe& u, const Type& t) {
  if (t.unit) return false;
  std::vector<std::string> states = t.mode.is_states() ? t.mode.states : u.states_of(t.contract);
  return std::any_of(states.begin(), states.end(), [&](const std::string& s) { return u.state_asset(t.contract, s); });
}

bool brute_maybe_owned(const Type& t) {
  return !t.unit && (t.mode.is_perm(Permission::Owned) || t.mode.is_states());
}

std::set<std::pair<std::size_t, std::size_t>> subperm_closure(const std::vector<Mode>& modes,
                                                               const std::vector<PermVar>& vars) {
  const std::size_t n = modes.size();
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  auto index_of = [&](const Mode& m) {
    for (std::size_t i = 0; i < n; ++i)
      if (modes[i] == m) return i;
    throw std::logic_error("bound outside the enumerated modes");
  };
  auto state_bounded = [&](const Mode& m) {
    const Mode* cur = &m;
    for (std::size_t hops = 0; cur->is_var() && hops <= vars.size(); ++hops) {
      const Mode* next = nullptr;
      for (const auto& v : vars)
        if (v.name == cur->name) next = &v.bound;
      if (!next) return false;
      cur = next;
    }
    return cur->is_states();
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Mode& a = modes[i];
    r[i][i] = true;
    if (a.is_var())
      for (const auto& v : vars)
        if (v.name == a.name) r[i][index_of(v.bound)] = true;
    for (std::size_t j = 0; j < n; ++j) {
      const Mode& b = modes[j];
      if (a.is_states() && b.is_states() &&
          std::includes(b.states.begin(), b.states.end(), a.states.begin(), a.states.end()))
        r[i][j] = true;
      if (a.is_states() && b.is_perm(Permission::Owned)) r[i][j] = true;
      if (a.is_perm(Permission::Owned) && !b.is_states() && !state_bounded(b)) r[i][j] = true;
      if (b.is_perm(Permission::Unowned)) r[i][j] = true;
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (r[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (r[k][j]) r[i][j] = true;
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (r[i][j]) out.insert({i, j});
  return out;
}

std::set<std::pair<std::size_t, std::size_t>> compat_closure(const std::vector<Type>& types) {
  const std::size_t n = types.size();
  std::set<std::pair<std::size_t, std::size_t>> rel;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const Type& a = types[i];
      const Type& b = types[j];
      if (a.unit || b.unit || !(a.contract == b.contract)) continue;
      if (a.mode.is_perm(Permission::Unowned)) rel.insert({i, j});
      if (a.mode.is_perm(Permission::Shared) && b.mode.is_perm(Permission::Shared)) rel.insert({i, j});
    }
  auto find = [&](const ContractRef& c, const Mode& m) -> std::optional<std::size_t> {
    for (std::size_t k = 0; k < n; ++k)
      if (!types[k].unit && types[k].contract == c && types[k].mode == m) return k;
    return std::nullopt;
  };
  const ContractRef iface = ContractRef::concrete("I");
  for (bool grew = true; grew;) {
    grew = false;
    std::vector<std::pair<std::size_t, std::size_t>> add;
    for (const auto& [i, j] : rel) {
      add.push_back({j, i});
      const Type& a = types[i];
      const Type& b = types[j];
      if (!(a.contract == b.contract)) continue;
      if (a.contract.name == "A")
        if (auto k = find(iface, b.mode)) add.push_back({i, *k});
      for (std::size_t k = 0; k < n; ++k)
        if (!types[k].unit && types[k].contract.name == a.contract.name && types[k].mode == b.mode)
          add.push_back({i, k});
    }
    for (const auto& p : add) grew |= rel.insert(p).second;
  }
  return rel;
}

std::vector<std::pair<Type, Type>> split_relation(const Universe& u, const Type& t) {
  if (t.unit) return {{t, t}};
  std::vector<std::pair<Type, Type>> out = {{t, t.with_mode(Mode::unowned())}};
  if (t.mode.is_perm(Permission::Shared)) out.push_back({t, t});
  if (!brute_asset(u, t) && brute_maybe_owned(t)) {
    Type sh = t.with_mode(Mode::shared());
    out.push_back({sh, sh});
  }
  return out;
}

}  // namespace silica::testing
