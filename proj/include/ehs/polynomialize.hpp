#pragma once

// Fresh-variable recasting of elementary ODEs into polynomial ODEs.
//
// vt() replaces each non-polynomial subterm g by a fresh variable v = g,
// innermost first. close_ledger() then adds v' = grad(g) . f for each entry,
// introducing the partner variables that differentiation demands
// (cos for sin, sin for cos, 1/g for ln g, 1/v for a root v).

#include "ehs/diff.hpp"
#include "ehs/expr.hpp"
#include "ehs/poly.hpp"
#include "ehs/predicate.hpp"

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehs {

enum class ReplacementKind { Reciprocal, Root, Exp, Ln, Sin, Cos };

inline const char* kind_name(ReplacementKind k) {
  switch (k) {
    case ReplacementKind::Reciprocal: return "recip";
    case ReplacementKind::Root: return "root";
    case ReplacementKind::Exp: return "exp";
    case ReplacementKind::Ln: return "ln";
    case ReplacementKind::Sin: return "sin";
    case ReplacementKind::Cos: return "cos";
  }
  return "?";
}

struct LedgerEntry {
  std::string name;
  Expr definition;  // over the original variables
  ReplacementKind kind = ReplacementKind::Exp;
  unsigned root = 0;  // q for v = g^(1/q)
  Poly argument;      // g after replacement, polynomial in (x, v)
  Expr argument_x;    // g over the original variables
};

class ReplacementLedger {
 public:
  ReplacementLedger() = default;
  explicit ReplacementLedger(std::vector<std::string> originals, std::string prefix = "v")
      : originals_(std::move(originals)), prefix_(std::move(prefix)) {}

  const std::vector<std::string>& originals() const { return originals_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  const LedgerEntry& operator[](std::size_t i) const { return entries_.at(i); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::string& prefix() const { return prefix_; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
  }

  // x followed by the fresh variables in ledger order.
  std::vector<std::string> all_variables() const {
    auto out = originals_;
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
  }

  const LedgerEntry* find_name(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }

  std::map<std::string, Expr> definitions() const {
    std::map<std::string, Expr> out;
    for (const auto& e : entries_) out[e.name] = e.definition;
    return out;
  }

  static std::string memo_key(ReplacementKind kind, unsigned root, const Poly& argument) {
    std::string k = kind_name(kind);
    if (kind == ReplacementKind::Root) k += std::to_string(root);
    return k + "[" + argument.key() + "]";
  }

  // Returns the variable for kind(argument), creating it if needed.
  std::string intern(ReplacementKind kind, unsigned root, const Poly& argument, const Expr& argument_x) {
    std::string key = memo_key(kind, root, argument);
    auto it = memo_.find(key);
    if (it != memo_.end()) return entries_[it->second].name;
    LedgerEntry e;
    e.name = fresh_name();
    e.kind = kind;
    e.root = root;
    e.argument = argument;
    e.argument_x = simplify(argument_x);
    e.definition = build_definition(kind, root, e.argument_x);
    memo_[key] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back().name;
  }

  // Makes a name unavailable for fresh variables.
  void reserve(const std::string& name) { reserved_.insert(name); }

  static Expr build_definition(ReplacementKind kind, unsigned root, const Expr& g) {
    switch (kind) {
      case ReplacementKind::Reciprocal: return quot(constant(1), g);
      case ReplacementKind::Root: return pow(g, Rational(Integer(1), Integer(root)));
      case ReplacementKind::Exp: return exp(g);
      case ReplacementKind::Ln: return ln(g);
      case ReplacementKind::Sin: return sin(g);
      case ReplacementKind::Cos: return cos(g);
    }
    return g;
  }

  // Restores an entry read back from a file.
  void restore(LedgerEntry e) {
    memo_[memo_key(e.kind, e.root, e.argument)] = entries_.size();
    entries_.push_back(std::move(e));
    ++counter_;
  }

 private:
  std::string fresh_name() {
    for (;;) {
      std::string n = prefix_ + std::to_string(++counter_);
      bool taken = reserved_.count(n) != 0 ||
                   std::find(originals_.begin(), originals_.end(), n) != originals_.end();
      if (!taken) return n;
    }
  }

  std::vector<std::string> originals_;
  std::string prefix_ = "v";
  std::vector<LedgerEntry> entries_;
  std::map<std::string, std::size_t> memo_;
  std::set<std::string> reserved_;
  unsigned counter_ = 0;
};

// Open-domain side condition such as g != 0 or g > 0.
struct DomainCondition {
  Atom atom;
  std::string reason;
};

struct OdeSystem {
  std::vector<std::string> vars;
  std::vector<Expr> rhs;
  std::vector<DomainCondition> open_domain;

  std::size_t size() const { return vars.size(); }

  long index_of(const std::string& v) const {
    auto it = std::find(vars.begin(), vars.end(), v);
    return it == vars.end() ? -1 : static_cast<long>(it - vars.begin());
  }

  const Expr& rhs_of(const std::string& v) const {
    long i = index_of(v);
    if (i < 0) throw std::out_of_range("no equation for " + v);
    return rhs[static_cast<std::size_t>(i)];
  }

  bool is_polynomial() const {
    return std::all_of(rhs.begin(), rhs.end(), [](const Expr& e) { return ehs::is_polynomial(e); });
  }

  std::string str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < vars.size(); ++i) os << vars[i] << "' = " << rhs[i] << "\n";
    return os.str();
  }
};

inline OdeSystem make_odes(const std::vector<std::pair<std::string, Expr>>& equations) {
  OdeSystem s;
  for (const auto& [v, e] : equations) {
    s.vars.push_back(v);
    s.rhs.push_back(e);
  }
  return s;
}

struct SimulationMap {
  std::vector<std::string> originals;
  std::vector<std::string> fresh;
  std::vector<Expr> components;  // size originals + fresh

  std::vector<std::string> target_variables() const {
    auto out = originals;
    out.insert(out.end(), fresh.begin(), fresh.end());
    return out;
  }

  std::vector<double> apply(const Valuation& x) const {
    std::vector<double> out;
    out.reserve(components.size());
    for (const auto& c : components) out.push_back(evaluate(c, x));
    return out;
  }

  Valuation apply_named(const Valuation& x) const {
    Valuation out;
    auto names = target_variables();
    for (std::size_t i = 0; i < components.size(); ++i) out[names[i]] = evaluate(components[i], x);
    return out;
  }
};

inline SimulationMap identity_map(const std::vector<std::string>& vars) {
  SimulationMap m;
  m.originals = vars;
  for (const auto& v : vars) m.components.push_back(var(v));
  return m;
}

inline SimulationMap simulation_map(const ReplacementLedger& ledger) {
  SimulationMap m = identity_map(ledger.originals());
  for (const auto& e : ledger.entries()) {
    m.fresh.push_back(e.name);
    m.components.push_back(e.definition);
  }
  return m;
}

// Expression tree of a polynomial, ordered over the ledger's variables.
inline Expr poly_expr(const Poly& p, const std::vector<std::string>& order) {
  std::vector<std::string> vars = order;
  for (const auto& v : p.support()) {
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
  }
  return p.aligned(vars).to_expr();
}

namespace detail {

inline Poly vt_poly(const Expr& e, ReplacementLedger& ledger);

inline Poly vt_reciprocal(const Expr& denominator, ReplacementLedger& ledger) {
  Poly g = vt_poly(denominator, ledger);
  if (g.is_constant()) {
    Rational c = g.constant_term();
    if (c == 0) throw std::domain_error("division by zero in " + denominator.str());
    return Poly::constant(Rational(1) / c);
  }
  return Poly::variable(ledger.intern(ReplacementKind::Reciprocal, 0, g, denominator));
}

inline Poly vt_poly(const Expr& e, ReplacementLedger& ledger) {
  switch (e.op()) {
    case Op::Const: return Poly::constant(e.value());
    case Op::Var: return Poly::variable(e.name());
    case Op::Add: return vt_poly(e.lhs(), ledger) + vt_poly(e.rhs(), ledger);
    case Op::Sub: return vt_poly(e.lhs(), ledger) - vt_poly(e.rhs(), ledger);
    case Op::Mul: return vt_poly(e.lhs(), ledger) * vt_poly(e.rhs(), ledger);
    case Op::Div: {
      Poly f = vt_poly(e.lhs(), ledger);
      return f * vt_reciprocal(e.rhs(), ledger);
    }
    case Op::Pow: {
      const Rational& a = e.exponent();
      if (a < 0) return vt_reciprocal(Expr::power(e.lhs(), -a), ledger);
      if (is_integer(a)) return vt_poly(e.lhs(), ledger).pow(numerator(a).convert_to<unsigned>());
      auto n1 = numerator(a).convert_to<unsigned>();
      auto n2 = denominator(a).convert_to<unsigned>();
      Poly g = vt_poly(e.lhs(), ledger);
      if (g.is_constant()) {
        if (auto r = exact_root(g.constant_term(), n2)) return Poly::constant(*r).pow(n1);
      }
      Expr base_x = g.is_constant() ? constant(g.constant_term()) : e.lhs();
      Poly v = Poly::variable(ledger.intern(ReplacementKind::Root, n2, g, base_x));
      return v.pow(n1);
    }
    case Op::Exp:
    case Op::Ln:
    case Op::Sin:
    case Op::Cos: {
      Poly g = vt_poly(e.arg(), ledger);
      if (g.is_constant()) {
        Expr c = apply_function(e.op(), constant(g.constant_term()));
        if (c.is_const()) return Poly::constant(c.value());
      }
      ReplacementKind kind = e.op() == Op::Exp   ? ReplacementKind::Exp
                             : e.op() == Op::Ln  ? ReplacementKind::Ln
                             : e.op() == Op::Sin ? ReplacementKind::Sin
                                                 : ReplacementKind::Cos;
      Expr arg_x = g.is_constant() ? constant(g.constant_term()) : e.arg();
      return Poly::variable(ledger.intern(kind, 0, g, arg_x));
    }
  }
  throw std::logic_error("vt: unknown node");
}

}  // namespace detail

// Polynomial replacement of e; the ledger records every fresh variable made.
inline Poly vt_to_poly(const Expr& e, ReplacementLedger& ledger) { return detail::vt_poly(e, ledger); }

inline Expr vt(const Expr& e, ReplacementLedger& ledger) {
  Poly p = detail::vt_poly(e, ledger);
  return poly_expr(p, ledger.all_variables());
}

inline Predicate vt(const Predicate& p, ReplacementLedger& ledger) {
  return map_atoms(p, [&](const Expr& e) { return vt(e, ledger); });
}

// Lie derivative of a polynomial in y along polynomial right-hand sides.
inline Poly lie_derivative_poly(const Poly& g, const std::map<std::string, Poly>& rhs) {
  Poly out;
  for (const auto& v : g.support()) {
    auto it = rhs.find(v);
    if (it == rhs.end()) throw std::logic_error("no derivative known for " + v);
    out += g.derivative(v) * it->second;
  }
  return out;
}

inline Expr lie_derivative(const Expr& gamma, const OdeSystem& odes) {
  Expr out = constant(0);
  for (std::size_t i = 0; i < odes.vars.size(); ++i) {
    Expr d = differentiate(gamma, odes.vars[i]);
    if (d.is_const(0)) continue;
    out = add(out, mul(d, odes.rhs[i]));
  }
  return out;
}

namespace detail {

// Right-hand side of one ledger entry; may intern partner entries.
inline Poly entry_derivative(std::size_t index, ReplacementLedger& ledger, const std::map<std::string, Poly>& rhs) {
  const LedgerEntry entry = ledger[index];
  Poly d = lie_derivative_poly(entry.argument, rhs);
  if (d.is_zero()) return Poly();
  Poly v = Poly::variable(entry.name);
  switch (entry.kind) {
    case ReplacementKind::Reciprocal: return -(v * v * d);
    case ReplacementKind::Exp: return v * d;
    case ReplacementKind::Ln: {
      auto u = ledger.intern(ReplacementKind::Reciprocal, 0, entry.argument, entry.argument_x);
      return Poly::variable(u) * d;
    }
    case ReplacementKind::Sin: {
      auto c = ledger.intern(ReplacementKind::Cos, 0, entry.argument, entry.argument_x);
      return Poly::variable(c) * d;
    }
    case ReplacementKind::Cos: {
      auto s = ledger.intern(ReplacementKind::Sin, 0, entry.argument, entry.argument_x);
      return -(Poly::variable(s) * d);
    }
    case ReplacementKind::Root: {
      // v = g^(1/q): v' = (1/q) v^(1-q) g'. Powers of v in g' cancel first.
      unsigned q = entry.root;
      unsigned k = std::min(d.min_degree_in(entry.name), q - 1);
      Poly reduced = d.divide_by_power(entry.name, k) * Rational(Integer(1), Integer(q));
      unsigned rest = q - 1 - k;
      if (rest == 0) return reduced;
      auto w = ledger.intern(ReplacementKind::Reciprocal, 0, v, pow(entry.argument_x, Rational(Integer(1), Integer(q))));
      return reduced * Poly::variable(w).pow(rest);
    }
  }
  throw std::logic_error("close_ledger: unknown kind");
}

}  // namespace detail

// Polynomial right-hand sides for x (already replaced) and every ledger entry.
inline std::map<std::string, Poly> close_ledger_poly(const std::vector<std::string>& vars,
                                                     const std::vector<Poly>& rhs_x, ReplacementLedger& ledger) {
  std::map<std::string, Poly> rhs;
  for (std::size_t i = 0; i < vars.size(); ++i) rhs[vars[i]] = rhs_x[i];
  // Entries only reference earlier entries in their arguments, so one pass in
  // index order reaches the fixed point; partners append to the queue.
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    rhs[ledger[i].name] = detail::entry_derivative(i, ledger, rhs);
  }
  return rhs;
}

inline std::vector<DomainCondition> domain_conditions(const LedgerEntry& e) {
  std::vector<DomainCondition> out;
  switch (e.kind) {
    case ReplacementKind::Reciprocal: out.push_back({Atom{e.argument_x, Rel::Ne}, e.name + " = " + e.definition.str()}); break;
    case ReplacementKind::Ln: out.push_back({Atom{e.argument_x, Rel::Gt}, e.name + " = " + e.definition.str()}); break;
    case ReplacementKind::Root:
      if (e.root % 2 == 0) {
        out.push_back({Atom{e.argument_x, Rel::Ge}, e.name + " = " + e.definition.str()});
        out.push_back({Atom{var(e.name), Rel::Ge}, "principal root " + e.name});
      }
      break;
    default: break;
  }
  return out;
}

inline std::vector<DomainCondition> domain_conditions(const ReplacementLedger& ledger) {
  std::vector<DomainCondition> out;
  for (const auto& e : ledger.entries()) {
    auto c = domain_conditions(e);
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

// x-components replaced, fresh components closed.
inline std::pair<OdeSystem, ReplacementLedger> close_ledger(const OdeSystem& odes, ReplacementLedger ledger) {
  std::vector<Poly> rhs_x;
  for (const auto& e : odes.rhs) rhs_x.push_back(to_canonical_poly(e));
  auto rhs = close_ledger_poly(odes.vars, rhs_x, ledger);
  OdeSystem out;
  out.vars = odes.vars;
  for (const auto& e : ledger.entries()) out.vars.push_back(e.name);
  for (const auto& v : out.vars) out.rhs.push_back(poly_expr(rhs.at(v), out.vars));
  out.open_domain = odes.open_domain;
  auto extra = domain_conditions(ledger);
  out.open_domain.insert(out.open_domain.end(), extra.begin(), extra.end());
  return {out, ledger};
}

struct Polynomialization {
  OdeSystem system;
  ReplacementLedger ledger;
  SimulationMap theta;
};

inline Polynomialization trans_eodes(const OdeSystem& odes, const std::string& prefix = "v") {
  ReplacementLedger ledger(odes.vars, prefix);
  OdeSystem replaced;
  replaced.vars = odes.vars;
  replaced.open_domain = odes.open_domain;
  for (const auto& e : odes.rhs) replaced.rhs.push_back(vt(e, ledger));
  auto [system, closed] = close_ledger(replaced, ledger);
  SimulationMap theta = simulation_map(closed);
  return {system, closed, theta};
}

// Structural count of non-polynomial subterms, each distinct tree counted once.
inline std::size_t distinct_nonpolynomial_subterms(const std::vector<Expr>& exprs) {
  std::set<Expr, ExprLess> seen;
  for (const auto& e : exprs) {
    visit(e, [&](const Expr& s) {
      switch (s.op()) {
        case Op::Div:
          if (!simplify(s.rhs()).is_const()) seen.insert(s);
          break;
        case Op::Pow:
          if (!is_integer(s.exponent()) || s.exponent() < 0) seen.insert(s);
          break;
        case Op::Exp:
        case Op::Ln:
        case Op::Sin:
        case Op::Cos: seen.insert(s); break;
        default: break;
      }
    });
  }
  return seen.size();
}

}  // namespace ehs
