#pragma once

// Elementary continuous and hybrid systems, the abstraction strategies for
// v = Gamma(x) constraints and the construction of polynomial abstractions.

#include "ehs/diff.hpp"
#include "ehs/interval.hpp"
#include "ehs/polynomialize.hpp"
#include "ehs/predicate.hpp"
#include "ehs/simulation_check.hpp"
#include "ehs/taylor.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehs {

class StrategyInapplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidModel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string primed(const std::string& v) { return v + "'"; }

struct Assignment {
  std::string variable;
  Expr value;
};

// x' := e for the assigned variables, anything for the havocked ones, and
// the relation over pre-state and primed post-state has to hold. Variables
// not mentioned keep their value.
struct Reset {
  std::vector<Assignment> assignments;
  std::vector<std::string> havoc;
  Predicate relation = Predicate::truth();

  bool deterministic() const { return havoc.empty() && relation.is_true(); }

  const Expr* value_of(const std::string& v) const {
    for (const auto& a : assignments) {
      if (a.variable == v) return &a.value;
    }
    return nullptr;
  }
  bool havocs(const std::string& v) const { return std::find(havoc.begin(), havoc.end(), v) != havoc.end(); }

  // Whether the post-state value of v may differ from its pre-state value.
  bool touches(const std::string& v) const {
    if (const Expr* e = value_of(v)) return !(e->is_var() && e->name() == v);
    return havocs(v) || variables(relation).count(primed(v)) != 0;
  }
  bool constrains_nondeterministically(const std::string& v) const {
    return havocs(v) || variables(relation).count(primed(v)) != 0;
  }
};

struct Mode {
  std::string name;
  OdeSystem field;
  Predicate init = Predicate::falsity();
  Predicate domain = Predicate::truth();
  Predicate unsafe = Predicate::falsity();
};

struct Transition {
  std::string name;
  std::string source;
  std::string target;
  Predicate guard = Predicate::truth();
  Reset reset;
};

struct HybridSystem {
  std::vector<std::string> vars;  // continuous state shared by all modes
  std::vector<Mode> modes;
  std::vector<Transition> transitions;
  std::string fresh_prefix = "v";

  const Mode* mode(const std::string& name) const {
    for (const auto& m : modes) {
      if (m.name == name) return &m;
    }
    return nullptr;
  }
  Mode* mode(const std::string& name) {
    for (auto& m : modes) {
      if (m.name == name) return &m;
    }
    return nullptr;
  }
  const Transition* transition(const std::string& name) const {
    for (const auto& t : transitions) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }
  std::vector<const Transition*> outgoing(const std::string& mode_name) const {
    std::vector<const Transition*> out;
    for (const auto& t : transitions) {
      if (t.source == mode_name) out.push_back(&t);
    }
    return out;
  }

  void validate() const {
    std::set<std::string> declared;
    for (const auto& v : vars) {
      if (v.empty() || !declared.insert(v).second) throw InvalidModel("duplicate or empty variable '" + v + "'");
    }
    if (modes.empty()) throw InvalidModel("no modes");
    std::set<std::string> names;
    auto check_vars = [&](const std::set<std::string>& used, const std::string& where, bool allow_primed) {
      for (const auto& u : used) {
        std::string base = u;
        if (allow_primed && !base.empty() && base.back() == '\'') base.pop_back();
        if (declared.count(base) == 0) throw InvalidModel("undeclared variable '" + u + "' in " + where);
      }
    };
    for (const auto& m : modes) {
      if (!names.insert(m.name).second) throw InvalidModel("duplicate mode '" + m.name + "'");
      if (m.field.vars.size() != vars.size()) {
        throw InvalidModel("mode " + m.name + " needs exactly one flow equation per variable");
      }
      for (const auto& v : vars) {
        if (m.field.index_of(v) < 0) throw InvalidModel("mode " + m.name + " has no flow for " + v);
      }
      for (const auto& e : m.field.rhs) check_vars(variables(e), "flow of " + m.name, false);
      check_vars(variables(m.init), "init of " + m.name, false);
      check_vars(variables(m.domain), "domain of " + m.name, false);
      check_vars(variables(m.unsafe), "unsafe of " + m.name, false);
    }
    std::set<std::string> tnames;
    for (const auto& t : transitions) {
      if (!tnames.insert(t.name).second) throw InvalidModel("duplicate transition '" + t.name + "'");
      if (mode(t.source) == nullptr || mode(t.target) == nullptr) {
        throw InvalidModel("transition " + t.name + " connects undeclared modes");
      }
      check_vars(variables(t.guard), "guard of " + t.name, false);
      std::set<std::string> assigned;
      for (const auto& a : t.reset.assignments) {
        if (declared.count(a.variable) == 0) throw InvalidModel("reset of " + t.name + " assigns undeclared " + a.variable);
        if (!assigned.insert(a.variable).second) throw InvalidModel("reset of " + t.name + " assigns " + a.variable + " twice");
        check_vars(variables(a.value), "reset of " + t.name, false);
      }
      for (const auto& v : t.reset.havoc) {
        if (declared.count(v) == 0) throw InvalidModel("reset of " + t.name + " havocs undeclared " + v);
        if (!assigned.insert(v).second) throw InvalidModel("reset of " + t.name + " assigns " + v + " twice");
      }
      check_vars(variables(t.reset.relation), "reset relation of " + t.name, true);
    }
  }
};

// A single-mode system without transitions.
struct ContinuousSystem {
  std::vector<std::string> vars;
  Predicate init = Predicate::falsity();
  OdeSystem field;
  Predicate domain = Predicate::truth();
  Predicate unsafe = Predicate::falsity();
  std::string name = "q";
  std::string fresh_prefix = "v";

  HybridSystem as_hybrid() const {
    HybridSystem h;
    h.vars = vars;
    h.fresh_prefix = fresh_prefix;
    h.modes.push_back(Mode{name, field, init, domain, unsafe});
    return h;
  }
};

// ---------------------------------------------------------------------------
// Strategies

enum class StrategyKind { Auto, W1, W2, W3, W4 };

struct Strategy {
  StrategyKind kind = StrategyKind::Auto;
  unsigned degree = 5;  // W2 only

  static Strategy parse(const std::string& text) {
    std::string t;
    for (char c : text) {
      if (c != ' ') t += c;
    }
    if (t == "auto") return {StrategyKind::Auto, 5};
    if (t == "W1") return {StrategyKind::W1, 5};
    if (t == "W3") return {StrategyKind::W3, 5};
    if (t == "W4") return {StrategyKind::W4, 5};
    if (t == "W2") return {StrategyKind::W2, 5};
    if (t.size() > 4 && t.rfind("W2(", 0) == 0 && t.back() == ')') {
      std::string digits = t.substr(3, t.size() - 4);
      if (!digits.empty() && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
        unsigned d = static_cast<unsigned>(std::stoul(digits));
        if (d >= 1 && d <= 32) return {StrategyKind::W2, d};
      }
    }
    throw std::invalid_argument("unknown strategy '" + text + "'");
  }

  std::string str() const {
    switch (kind) {
      case StrategyKind::Auto: return "auto";
      case StrategyKind::W1: return "W1";
      case StrategyKind::W2: return "W2(" + std::to_string(degree) + ")";
      case StrategyKind::W3: return "W3";
      case StrategyKind::W4: return "W4";
    }
    return "?";
  }

  // Coarseness order W1 < W2 < W3 < W4.
  int rank() const { return static_cast<int>(kind); }
};

inline bool operator==(const Strategy& a, const Strategy& b) {
  return a.kind == b.kind && (a.kind != StrategyKind::W2 || a.degree == b.degree);
}

enum class Site { Init, Domain, Guard, Reset, Unsafe };

inline const char* site_name(Site s) {
  switch (s) {
    case Site::Init: return "init";
    case Site::Domain: return "domain";
    case Site::Guard: return "guard";
    case Site::Reset: return "reset";
    case Site::Unsafe: return "unsafe";
  }
  return "?";
}

inline Site parse_site(const std::string& s) {
  if (s == "init") return Site::Init;
  if (s == "domain") return Site::Domain;
  if (s == "guard") return Site::Guard;
  if (s == "reset") return Site::Reset;
  if (s == "unsafe") return Site::Unsafe;
  throw std::invalid_argument("unknown constraint site '" + s + "'");
}

// Site keys are "mode.init", "mode.domain", "mode.unsafe", "transition.guard"
// and "transition.reset"; appending ".v" narrows to one fresh variable.
// Box keys are a mode name (the mode box) or a site key.
struct AbstractionStrategy {
  Strategy global;
  std::map<Site, Strategy> by_kind;
  std::map<std::string, Strategy> by_site;
  std::map<std::string, Box> boxes;

  Strategy resolve(Site site, const std::string& site_key, const std::string& variable) const {
    if (auto it = by_site.find(site_key + "." + variable); it != by_site.end()) return it->second;
    if (auto it = by_site.find(site_key); it != by_site.end()) return it->second;
    if (auto it = by_kind.find(site); it != by_kind.end()) return it->second;
    return global;
  }

  static AbstractionStrategy uniform(Strategy s) {
    AbstractionStrategy a;
    a.global = s;
    return a;
  }
};

inline bool has_exact_rewrite(ReplacementKind k) {
  return k == ReplacementKind::Reciprocal || k == ReplacementKind::Root;
}

// Auto: W1 where an exact rewrite exists, else W4 for init, unsafe and
// reset, W3 for domain and guard.
inline Strategy concrete_strategy(Strategy s, Site site, ReplacementKind kind) {
  if (s.kind != StrategyKind::Auto) return s;
  if (has_exact_rewrite(kind)) return {StrategyKind::W1, s.degree};
  if (site == Site::Domain || site == Site::Guard) return {StrategyKind::W3, s.degree};
  return {StrategyKind::W4, s.degree};
}

// ---------------------------------------------------------------------------
// Boxes from interval bounds

namespace detail {

inline void tighten(Box& box, const std::string& v, const Interval& bound) {
  auto it = box.find(v);
  if (it == box.end()) {
    box[v] = bound;
    return;
  }
  Interval& cur = it->second;
  Interval next = cur;
  if (bound.lo > cur.lo || (bound.lo == cur.lo && bound.lo_open)) {
    next.lo = bound.lo;
    next.lo_open = bound.lo_open;
  }
  if (bound.hi < cur.hi || (bound.hi == cur.hi && bound.hi_open)) {
    next.hi = bound.hi;
    next.hi_open = bound.hi_open;
  }
  if (next.lo > next.hi) return;  // empty region; keep the previous bound
  cur = next;
}

inline void box_from_atom(const Atom& a, Box& box) {
  if (!is_polynomial(a.lhs)) return;
  Poly p = to_canonical_poly(a.lhs);
  auto support = p.support();
  if (support.size() != 1 || p.total_degree() != 1) return;
  const std::string v = *support.begin();
  Rational slope = p.derivative(v).constant_term();
  Rational bound = -p.constant_term() / slope;
  Rel rel = a.rel;
  if (slope < 0) {
    // a x + b <= 0 with a < 0 is x >= -b/a
    switch (rel) {
      case Rel::Le: rel = Rel::Ge; break;
      case Rel::Lt: rel = Rel::Gt; break;
      case Rel::Ge: rel = Rel::Le; break;
      case Rel::Gt: rel = Rel::Lt; break;
      default: break;
    }
  }
  constexpr double inf = Interval::inf;
  switch (rel) {
    case Rel::Le: tighten(box, v, Interval(-inf, round_up(bound))); break;
    case Rel::Lt: tighten(box, v, Interval(-inf, round_up(bound), false, true)); break;
    case Rel::Ge: tighten(box, v, Interval(round_down(bound), inf)); break;
    case Rel::Gt: tighten(box, v, Interval(round_down(bound), inf, true, false)); break;
    case Rel::Eq: tighten(box, v, Interval::point(bound)); break;
    case Rel::Ne: break;
  }
}

inline Box derive_box_nnf(const Predicate& p) {
  switch (p.kind()) {
    case Predicate::Kind::Atom: {
      Box b;
      box_from_atom(p.atom(), b);
      return b;
    }
    case Predicate::Kind::And: {
      Box b;
      for (const auto& c : p.children()) {
        for (const auto& [v, i] : derive_box_nnf(c)) tighten(b, v, i);
      }
      return b;
    }
    case Predicate::Kind::Or: {
      std::optional<Box> acc;
      for (const auto& c : p.children()) {
        Box b = derive_box_nnf(c);
        if (!acc) {
          acc = b;
          continue;
        }
        Box merged;
        for (const auto& [v, i] : *acc) {
          auto it = b.find(v);
          if (it != b.end()) merged[v] = hull(i, it->second);
        }
        acc = merged;
      }
      return acc ? *acc : Box{};
    }
    default: return {};
  }
}

}  // namespace detail

// Enclosing box of the interval bounds in a predicate; variables without
// bounds are absent.
inline Box derive_box(const Predicate& region) { return detail::derive_box_nnf(negation_normal_form(region)); }

// The later box wins per variable.
inline Box overlay(Box base, const Box& over) {
  for (const auto& [v, i] : over) base[v] = i;
  return base;
}

// Per-variable intersection; a variable whose bounds are disjoint keeps a's.
inline Box intersect(Box a, const Box& b) {
  for (const auto& [v, i] : b) detail::tighten(a, v, i);
  return a;
}

// ---------------------------------------------------------------------------
// Abstraction of one replacement constraint

struct AuditRecord {
  std::string site;      // site key
  std::string variable;  // fresh variable
  Strategy strategy;
  std::string note;
};

// The exact, non-polynomial constraint v = Gamma(x).
inline Predicate exact_constraint(const LedgerEntry& e) {
  return Predicate::compare(var(e.name), Rel::Eq, e.definition);
}

namespace detail {

inline Predicate range_predicate(const std::string& v, const Interval& r) {
  auto shifted = [&](const Rational& c) { return (Poly::variable(v) - Poly::constant(c)).to_expr(); };
  std::vector<Predicate> parts;
  if (std::isfinite(r.lo)) parts.push_back(Predicate::atom(shifted(outward_decimal(r.lo, true)), r.lo_open ? Rel::Gt : Rel::Ge));
  if (std::isfinite(r.hi)) parts.push_back(Predicate::atom(shifted(outward_decimal(r.hi, false)), r.hi_open ? Rel::Lt : Rel::Le));
  return Predicate::conjunction(std::move(parts));
}

inline Predicate w3(const LedgerEntry& e, const Box& box, std::string& note) {
  // Exact value on a point box.
  std::map<std::string, Rational> point;
  bool all_points = true;
  for (const auto& x : variables(e.definition)) {
    auto it = box.find(x);
    if (it == box.end() || !it->second.is_point()) {
      all_points = false;
      break;
    }
    point[x] = from_double(it->second.lo);
  }
  if (all_points) {
    try {
      Rational value = evaluate_exact(e.definition, point);
      return Predicate::atom((Poly::variable(e.name) - Poly::constant(value)).to_expr(), Rel::Eq);
    } catch (const NotExact&) {
    } catch (const std::domain_error&) {
    }
  }
  try {
    Interval r = interval_eval(e.definition, box);
    if (!std::isfinite(r.lo) && !std::isfinite(r.hi)) note = "range unbounded";
    return range_predicate(e.name, r);
  } catch (const DomainViolation& ex) {
    note = std::string("range undefined on box: ") + ex.what();
    return Predicate::truth();
  }
}

inline Predicate w1(const LedgerEntry& e, const std::vector<std::string>& order) {
  Poly v = Poly::variable(e.name);
  switch (e.kind) {
    case ReplacementKind::Reciprocal:
      return Predicate::atom(poly_expr(v * e.argument - Poly::constant(1), order), Rel::Eq);
    case ReplacementKind::Root: {
      Predicate eq = Predicate::atom(poly_expr(v.pow(e.root) - e.argument, order), Rel::Eq);
      if (e.root % 2 == 1) return eq;
      return eq && Predicate::compare(var(e.name), Rel::Ge, constant(0));
    }
    default: break;
  }
  throw StrategyInapplicable(std::string("W1 has no exact rewrite for ") + kind_name(e.kind) + " (" + e.name +
                             " = " + e.definition.str() + ")");
}

}  // namespace detail

// Polynomial predicate over (x, v) implied by v = Gamma(x) on the box.
inline Predicate abstract_replacement(const LedgerEntry& e, Site site, Strategy requested, const Box& box,
                                      const std::vector<std::string>& order, AuditRecord* audit = nullptr) {
  Strategy s = concrete_strategy(requested, site, e.kind);
  std::string note;
  Predicate out = Predicate::truth();
  switch (s.kind) {
    case StrategyKind::W4: break;
    case StrategyKind::W1: out = detail::w1(e, order); break;
    case StrategyKind::W3: out = detail::w3(e, box, note); break;
    case StrategyKind::W2: {
      auto vars = variables(e.definition);
      if (vars.size() != 1) {
        note = "definition not univariate, used W3";
        out = detail::w3(e, box, note);
        break;
      }
      const std::string x = *vars.begin();
      auto it = box.find(x);
      if (it == box.end() || !it->second.bounded()) {
        throw StrategyInapplicable("W2 for " + e.name + " needs a bounded box for " + x);
      }
      std::string range_note;
      Predicate range = detail::w3(e, box, range_note);
      try {
        auto t = taylor_enclose(e.definition, it->second, s.degree);
        out = enclosure_to_predicate(t, x, e.name) && range;
        std::ostringstream os;
        os << "remainder " << t.remainder.str() << " on " << x << " in " << it->second.str();
        note = os.str();
      } catch (const DomainViolation& ex) {
        note = std::string("no Taylor enclosure, used W3: ") + ex.what();
        out = range;
      }
      break;
    }
    case StrategyKind::Auto: break;
  }
  if (audit != nullptr) *audit = AuditRecord{"", e.name, s, note};
  return out;
}

// Conjunction over all ledger entries at one site; boxes derived from the
// region, overridden by the supplied box.
inline Predicate abstract_replacement(const ReplacementLedger& ledger, Site site, const Predicate& region,
                                      Strategy strategy, const Box& supplied = {}) {
  Box box = overlay(derive_box(region), supplied);
  std::vector<Predicate> parts;
  for (const auto& e : ledger.entries()) {
    parts.push_back(abstract_replacement(e, site, strategy, box, ledger.all_variables()));
  }
  return Predicate::conjunction(std::move(parts));
}

// ---------------------------------------------------------------------------
// Abstraction of whole systems

struct AbstractionResult {
  HybridSystem original;
  HybridSystem system;  // polynomial, over x followed by the fresh variables
  ReplacementLedger ledger;
  std::map<std::string, std::set<std::string>> used;  // fresh variables each mode depends on
  std::map<std::string, SimulationMap> theta;         // per mode
  std::vector<AuditRecord> audit;
  std::vector<std::string> warnings;

  const SimulationMap& theta_of(const std::string& mode) const { return theta.at(mode); }

  // Ledger entries a mode depends on.
  std::vector<LedgerEntry> mode_entries(const std::string& mode) const {
    std::vector<LedgerEntry> out;
    const auto& u = used.at(mode);
    for (const auto& e : ledger.entries()) {
      if (u.count(e.name) != 0) out.push_back(e);
    }
    return out;
  }

  // Single-mode view.
  const Mode& only_mode() const { return system.modes.front(); }
};

// Theta_q: identity on x, Gamma on the used fresh variables and 0 on the rest.
inline SimulationMap mode_theta(const ReplacementLedger& ledger, const std::set<std::string>& used) {
  SimulationMap m = identity_map(ledger.originals());
  for (const auto& e : ledger.entries()) {
    m.fresh.push_back(e.name);
    m.components.push_back(used.count(e.name) != 0 ? e.definition : constant(0));
  }
  return m;
}

namespace detail {

inline void collect_fresh(const Expr& e, const ReplacementLedger& ledger, std::set<std::string>& out) {
  for (const auto& v : variables(e)) {
    if (ledger.find_name(v) != nullptr) out.insert(v);
  }
}
inline void collect_fresh(const Predicate& p, const ReplacementLedger& ledger, std::set<std::string>& out) {
  for (const auto& v : variables(p)) {
    if (ledger.find_name(v) != nullptr) out.insert(v);
  }
}
inline void collect_fresh(const Poly& p, const ReplacementLedger& ledger, std::set<std::string>& out) {
  for (const auto& v : p.support()) {
    if (ledger.find_name(v) != nullptr) out.insert(v);
  }
}

inline Predicate rename_primed(const Predicate& p, const std::vector<std::string>& names) {
  std::map<std::string, Expr> map;
  for (const auto& n : names) map[n] = var(primed(n));
  return map_atoms(p, [&](const Expr& e) { return substitute(e, map); });
}

inline void require_polynomial(const Predicate& p, const std::string& where) {
  visit_atoms(p, [&](const Atom& a) {
    if (!is_polynomial(a.lhs)) throw StrategyInapplicable("non-polynomial reset relation in " + where);
  });
}

}  // namespace detail

inline AbstractionResult abstract_ehs(const HybridSystem& h, const AbstractionStrategy& strategy) {
  h.validate();
  AbstractionResult result;
  result.original = h;
  ReplacementLedger ledger(h.vars, h.fresh_prefix);
  for (const auto& v : h.vars) ledger.reserve(v);

  struct ModeWork {
    Predicate init, domain, unsafe;
    std::vector<Poly> rhs_x;
    std::set<std::string> refs;
  };
  struct TransitionWork {
    Predicate guard;
    std::vector<Assignment> assignments;
  };
  std::map<std::string, ModeWork> work;
  std::map<std::string, TransitionWork> twork;

  // S1: replace non-polynomial terms, site by site.
  for (const auto& m : h.modes) {
    ModeWork& w = work[m.name];
    w.init = vt(m.init, ledger);
    w.domain = vt(m.domain, ledger);
    for (const Transition* t : h.outgoing(m.name)) {
      TransitionWork& tw = twork[t->name];
      tw.guard = vt(t->guard, ledger);
      for (const auto& a : t->reset.assignments) tw.assignments.push_back({a.variable, vt(a.value, ledger)});
      detail::require_polynomial(t->reset.relation, t->name);
    }
    w.unsafe = vt(m.unsafe, ledger);
    for (const auto& e : m.field.rhs) w.rhs_x.push_back(detail::vt_poly(e, ledger));
  }

  // S2-S3: close the ledger under every mode's field.
  std::map<std::string, std::map<std::string, Poly>> deriv;
  for (;;) {
    std::size_t before = ledger.size();
    for (const auto& m : h.modes) deriv[m.name] = close_ledger_poly(m.field.vars, work[m.name].rhs_x, ledger);
    if (ledger.size() == before) break;
  }

  // Fresh variables each mode depends on.
  for (const auto& m : h.modes) {
    ModeWork& w = work[m.name];
    std::set<std::string> u;
    detail::collect_fresh(w.init, ledger, u);
    detail::collect_fresh(w.domain, ledger, u);
    detail::collect_fresh(w.unsafe, ledger, u);
    for (const auto& p : w.rhs_x) detail::collect_fresh(p, ledger, u);
    for (const Transition* t : h.outgoing(m.name)) {
      const TransitionWork& tw = twork[t->name];
      detail::collect_fresh(tw.guard, ledger, u);
      for (const auto& a : tw.assignments) detail::collect_fresh(a.value, ledger, u);
    }
    std::vector<std::string> queue(u.begin(), u.end());
    while (!queue.empty()) {
      std::string v = queue.back();
      queue.pop_back();
      std::set<std::string> more;
      detail::collect_fresh(ledger.find_name(v)->argument, ledger, more);
      detail::collect_fresh(deriv[m.name].at(v), ledger, more);
      for (const auto& n : more) {
        if (u.insert(n).second) queue.push_back(n);
      }
    }
    result.used[m.name] = u;
    result.theta[m.name] = mode_theta(ledger, u);
  }

  const std::vector<std::string> order = ledger.all_variables();
  auto mode_box = [&](const std::string& mode) {
    auto it = strategy.boxes.find(mode);
    return it == strategy.boxes.end() ? Box{} : it->second;
  };
  auto site_box = [&](const std::string& key) {
    auto it = strategy.boxes.find(key);
    return it == strategy.boxes.end() ? Box{} : it->second;
  };
  auto constrain = [&](Site site, const std::string& key, const std::set<std::string>& entries, const Box& box) {
    std::vector<Predicate> parts;
    for (const auto& e : ledger.entries()) {
      if (entries.count(e.name) == 0) continue;
      AuditRecord rec;
      parts.push_back(
          abstract_replacement(e, site, strategy.resolve(site, key, e.name), box, order, &rec));
      rec.site = key;
      result.audit.push_back(rec);
    }
    return Predicate::conjunction(std::move(parts));
  };

  HybridSystem out;
  out.vars = order;
  out.fresh_prefix = h.fresh_prefix;

  // S4: fields and constraint sites per mode.
  for (const auto& m : h.modes) {
    const ModeWork& w = work[m.name];
    const auto& u = result.used[m.name];
    Mode y;
    y.name = m.name;
    y.field.vars = order;
    for (const auto& v : order) {
      bool live = ledger.find_name(v) == nullptr || u.count(v) != 0;
      y.field.rhs.push_back(live ? poly_expr(deriv[m.name].at(v), order) : constant(0));
    }
    y.field.open_domain = m.field.open_domain;
    for (const auto& e : ledger.entries()) {
      if (u.count(e.name) == 0) continue;
      auto c = domain_conditions(e);
      y.field.open_domain.insert(y.field.open_domain.end(), c.begin(), c.end());
    }

    Box mbox = mode_box(m.name);
    y.init = w.init && constrain(Site::Init, m.name + ".init", u,
                                  overlay(intersect(mbox, derive_box(m.init)), site_box(m.name + ".init")));
    y.domain = w.domain && constrain(Site::Domain, m.name + ".domain", u,
                                      overlay(intersect(mbox, derive_box(m.domain)), site_box(m.name + ".domain")));
    y.unsafe = w.unsafe.is_false()
                   ? w.unsafe
                   : w.unsafe && constrain(Site::Unsafe, m.name + ".unsafe", u,
                                           overlay(intersect(mbox, derive_box(m.unsafe)), site_box(m.name + ".unsafe")));
    out.modes.push_back(y);

    // Initial states outside the abstracted domain are allowed but flagged.
    if (!m.init.is_false()) {
      for (const auto& v : u) {
        int ri = concrete_strategy(strategy.resolve(Site::Init, m.name + ".init", v), Site::Init,
                                   ledger.find_name(v)->kind)
                     .rank();
        int rd = concrete_strategy(strategy.resolve(Site::Domain, m.name + ".domain", v), Site::Domain,
                                   ledger.find_name(v)->kind)
                     .rank();
        if (ri > rd) {
          result.warnings.push_back("mode " + m.name + ": abstracted initial set not ensured inside the domain (" +
                                    v + " is coarser at init than at domain)");
          break;
        }
      }
    }
  }

  // Guards and resets.
  for (const auto& t : h.transitions) {
    const TransitionWork& tw = twork[t.name];
    const auto& us = result.used[t.source];
    const auto& ut = result.used[t.target];
    Transition y;
    y.name = t.name;
    y.source = t.source;
    y.target = t.target;

    Predicate region = t.guard && h.mode(t.source)->domain;
    Box gbox = overlay(intersect(mode_box(t.source), derive_box(region)), site_box(t.name + ".guard"));
    y.guard = tw.guard && constrain(Site::Guard, t.name + ".guard", us, gbox);

    y.reset.assignments = tw.assignments;
    y.reset.havoc = t.reset.havoc;
    std::vector<Predicate> relation{t.reset.relation};

    // Box of the post-state x'.
    Box post = mode_box(t.target);
    for (const auto& x : h.vars) {
      Interval image = Interval::entire();
      if (const Expr* e = t.reset.value_of(x)) {
        try {
          image = interval_eval(*e, gbox);
        } catch (const DomainViolation&) {
        }
      } else if (!t.reset.touches(x)) {
        if (auto it = gbox.find(x); it != gbox.end()) image = it->second;
      }
      if (image.bounded() || post.count(x) == 0) post[x] = image;
    }
    post = overlay(post, site_box(t.name + ".reset"));

    const std::string key = t.name + ".reset";
    for (const auto& e : ledger.entries()) {
      if (ut.count(e.name) == 0) {
        y.reset.assignments.push_back({e.name, constant(0)});
        result.audit.push_back({key, e.name, Strategy{StrategyKind::W4, 5}, "unused in target mode, reset to 0"});
        continue;
      }
      auto deps = variables(e.definition);
      bool moved = std::any_of(deps.begin(), deps.end(), [&](const std::string& x) { return t.reset.touches(x); });
      if (us.count(e.name) != 0 && !moved) {
        result.audit.push_back({key, e.name, Strategy{StrategyKind::W1, 5}, "identity"});
        continue;
      }
      bool nondet = std::any_of(deps.begin(), deps.end(),
                                [&](const std::string& x) { return t.reset.constrains_nondeterministically(x); });
      Strategy requested = strategy.resolve(Site::Reset, key, e.name);
      Strategy s = concrete_strategy(requested, Site::Reset, e.kind);
      if (nondet && s.kind != StrategyKind::W4) {
        if (requested.kind != StrategyKind::Auto) {
          throw StrategyInapplicable("non-deterministic reset of " + t.name + " supports only W4 for " + e.name);
        }
        s = Strategy{StrategyKind::W4, s.degree};
      }
      y.reset.havoc.push_back(e.name);
      AuditRecord rec;
      Predicate c = abstract_replacement(e, Site::Reset, s, post, order, &rec);
      rec.site = key;
      if (rec.note.empty()) rec.note = "constrains post-state";
      result.audit.push_back(rec);
      relation.push_back(detail::rename_primed(c, order));
    }
    y.reset.relation = Predicate::conjunction(std::move(relation));
    out.transitions.push_back(y);
  }

  result.system = std::move(out);
  result.ledger = std::move(ledger);
  return result;
}

inline AbstractionResult abstract_eds(const ContinuousSystem& c, const AbstractionStrategy& strategy) {
  return abstract_ehs(c.as_hybrid(), strategy);
}

// Per-mode simulation checks of f_y(Theta_q(x)) = J f_x(x).
inline std::map<std::string, SimulationCheckReport> check_modes(const AbstractionResult& r) {
  std::map<std::string, SimulationCheckReport> out;
  for (std::size_t i = 0; i < r.original.modes.size(); ++i) {
    const auto& m = r.original.modes[i];
    out[m.name] = simulation_condition_check(m.field, r.system.modes[i].field, r.theta.at(m.name));
  }
  return out;
}

inline bool all_modes_pass(const std::map<std::string, SimulationCheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const auto& kv) { return kv.second.passed(); });
}

// Unsafe sets in the abstract state space, one per mode.
inline std::map<std::string, Predicate> map_unsafe(const std::map<std::string, Predicate>& unsafe,
                                                   const AbstractionResult& result,
                                                   const AbstractionStrategy& strategy) {
  std::map<std::string, Predicate> out;
  for (const auto& [mode, p] : unsafe) {
    if (result.used.count(mode) == 0) throw InvalidModel("unknown mode " + mode);
    if (p.is_false()) {
      out[mode] = p;
      continue;
    }
    ReplacementLedger scratch = result.ledger;
    Predicate replaced = vt(p, scratch);
    if (scratch.size() != result.ledger.size()) {
      throw StrategyInapplicable("unsafe set of " + mode + " has terms outside the abstraction");
    }
    std::set<std::string> refs = result.used.at(mode);
    detail::collect_fresh(replaced, result.ledger, refs);
    Box box = derive_box(p);
    if (auto it = strategy.boxes.find(mode); it != strategy.boxes.end()) box = intersect(it->second, box);
    if (auto it = strategy.boxes.find(mode + ".unsafe"); it != strategy.boxes.end()) box = overlay(box, it->second);
    std::vector<Predicate> parts{replaced};
    for (const auto& e : result.ledger.entries()) {
      if (refs.count(e.name) == 0) continue;
      parts.push_back(abstract_replacement(e, Site::Unsafe, strategy.resolve(Site::Unsafe, mode + ".unsafe", e.name), box,
                                           result.ledger.all_variables()));
    }
    out[mode] = Predicate::conjunction(std::move(parts));
  }
  return out;
}

}  // namespace ehs
