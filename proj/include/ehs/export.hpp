#pragma once

// Downstream documents: the invariant-synthesis constraint problem for a
// parametric template, plus interchange forms of a polynomial hybrid system.

#include "ehs/hybrid.hpp"
#include "ehs/model_file.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace ehs {

class NonPolynomialInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every construct the target format cannot express, with its location.
class UnsupportedConstruct : public std::runtime_error {
 public:
  explicit UnsupportedConstruct(std::vector<std::string> items)
      : std::runtime_error(join(items)), items_(std::move(items)) {}
  const std::vector<std::string>& items() const { return items_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "unsupported constructs:";
    for (const auto& i : items) out += "\n  " + i;
    return out;
  }
  std::vector<std::string> items_;
};

enum class TemplateScope { Originals, OriginalsPlusFresh };

inline TemplateScope parse_scope(const std::string& s) {
  if (s == "originals" || s == "originals-only") return TemplateScope::Originals;
  if (s == "originals-plus-fresh" || s == "all") return TemplateScope::OriginalsPlusFresh;
  throw std::invalid_argument("unknown template scope '" + s + "'");
}

inline const char* scope_name(TemplateScope s) {
  return s == TemplateScope::Originals ? "originals" : "originals-plus-fresh";
}

struct TemplateSpec {
  unsigned degree = 2;
  TemplateScope scope = TemplateScope::Originals;
  std::string prefix = "u";
};

// Exponent vectors of total degree <= d over n variables, graded and
// lexicographically descending inside each degree.
inline std::vector<Poly::Monomial> monomials_up_to(std::size_t n, unsigned d) {
  std::vector<Poly::Monomial> out;
  Poly::Monomial m(n, 0);
  std::function<void(std::size_t, unsigned)> fill = [&](std::size_t i, unsigned left) {
    if (i + 1 == n) {
      m[i] = left;
      out.push_back(m);
      return;
    }
    for (unsigned k = left + 1; k-- > 0;) {
      m[i] = k;
      fill(i + 1, left - k);
    }
    m[i] = 0;
  };
  for (unsigned deg = 0; deg <= d; ++deg) {
    if (n == 0) {
      if (deg == 0) out.push_back(m);
      continue;
    }
    fill(0, deg);
  }
  return out;
}

inline Poly monomial_poly(const Poly::Monomial& m, const std::vector<std::string>& vars) {
  Poly p = Poly::constant(1, vars);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] != 0) p *= Poly::variable(vars[i], vars).pow(m[i]);
  }
  return p;
}

namespace detail {

// SMT-LIB style printing. Powers become repeated products.

inline std::string smt_symbol(const std::string& s) {
  bool plain = !s.empty() && !std::isdigit(static_cast<unsigned char>(s[0]));
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) plain = false;
  }
  return plain ? s : "|" + s + "|";
}

inline std::string smt_rational(const Rational& r) {
  Integer n = numerator(r);
  Integer d = denominator(r);
  Integer m = n < 0 ? Integer(-n) : n;
  std::string body = d == 1 ? m.str() : "(/ " + m.str() + " " + d.str() + ")";
  return n < 0 ? "(- " + body + ")" : body;
}

inline void require_polynomial_expr(const Expr& e, const std::string& where, std::vector<std::string>& bad) {
  visit(e, [&](const Expr& s) {
    if (is_function(s.op()) || s.op() == Op::Div || (s.op() == Op::Pow && (!is_integer(s.exponent()) || s.exponent() < 0))) {
      bad.push_back(where + ": " + s.str());
    }
  });
}

inline std::string smt_expr(const Expr& e) {
  switch (e.op()) {
    case Op::Const: return smt_rational(e.value());
    case Op::Var: return smt_symbol(e.name());
    case Op::Add: return "(+ " + smt_expr(e.lhs()) + " " + smt_expr(e.rhs()) + ")";
    case Op::Sub: return "(- " + smt_expr(e.lhs()) + " " + smt_expr(e.rhs()) + ")";
    case Op::Mul: return "(* " + smt_expr(e.lhs()) + " " + smt_expr(e.rhs()) + ")";
    case Op::Div: return "(/ " + smt_expr(e.lhs()) + " " + smt_expr(e.rhs()) + ")";
    case Op::Pow: {
      long k = numerator(e.exponent()).convert_to<long>();
      if (k == 0) return "1";
      std::string base = smt_expr(e.lhs());
      if (k == 1) return base;
      std::string out = "(*";
      for (long i = 0; i < k; ++i) out += " " + base;
      return out + ")";
    }
    default: return "(" + std::string(function_name(e.op())) + " " + smt_expr(e.arg()) + ")";
  }
}

inline std::string smt_atom(const Atom& a) {
  std::string l = smt_expr(a.lhs);
  switch (a.rel) {
    case Rel::Le: return "(<= " + l + " 0)";
    case Rel::Lt: return "(< " + l + " 0)";
    case Rel::Eq: return "(= " + l + " 0)";
    case Rel::Ne: return "(not (= " + l + " 0))";
    case Rel::Ge: return "(>= " + l + " 0)";
    case Rel::Gt: return "(> " + l + " 0)";
  }
  return "?";
}

inline std::string smt_predicate(const Predicate& p) {
  switch (p.kind()) {
    case Predicate::Kind::True: return "true";
    case Predicate::Kind::False: return "false";
    case Predicate::Kind::Atom: return smt_atom(p.atom());
    case Predicate::Kind::Not: return "(not " + smt_predicate(p.children().front()) + ")";
    case Predicate::Kind::And:
    case Predicate::Kind::Or: {
      std::string out = p.kind() == Predicate::Kind::And ? "(and" : "(or";
      for (const auto& c : p.children()) out += " " + smt_predicate(c);
      return out + ")";
    }
  }
  return "?";
}

inline void require_polynomial(const Predicate& p, const std::string& where, std::vector<std::string>& bad) {
  visit_atoms(p, [&](const Atom& a) { require_polynomial_expr(a.lhs, where, bad); });
}

inline std::string smt_sorted(const std::vector<std::string>& vars) {
  std::string out = "(";
  for (std::size_t i = 0; i < vars.size(); ++i) out += (i ? " (" : "(") + smt_symbol(vars[i]) + " Real)";
  return out + ")";
}

inline std::string smt_call(const std::string& fn, const std::vector<std::string>& args) {
  if (args.empty()) return smt_symbol(fn);
  std::string out = "(" + smt_symbol(fn);
  for (const auto& a : args) out += " " + smt_symbol(a);
  return out + ")";
}

inline std::vector<std::string> ordered_subset(const std::vector<std::string>& order, const std::set<std::string>& s) {
  std::vector<std::string> out;
  for (const auto& v : order) {
    if (s.count(v) != 0) out.push_back(v);
  }
  for (const auto& v : s) {
    if (std::find(order.begin(), order.end(), v) == order.end()) out.push_back(v);
  }
  return out;
}

inline std::string forall(const std::vector<std::string>& vars, const std::string& body) {
  if (vars.empty()) return body;
  return "(forall " + smt_sorted(vars) + " " + body + ")";
}

inline std::vector<Predicate> conjuncts(const Predicate& p) {
  if (p.kind() == Predicate::Kind::And) return p.children();
  if (p.is_true()) return {};
  return {p};
}

}  // namespace detail

struct ModeTemplate {
  std::string mode;
  std::vector<std::string> variables;   // template scope
  std::vector<std::string> parameters;  // one per monomial
  std::vector<Poly::Monomial> monomials;
  Expr polynomial;  // sum of parameter * monomial
  Expr lie_derivative;
};

struct ConstraintDocument {
  TemplateSpec spec;
  std::vector<ModeTemplate> templates;
  std::vector<AuditRecord> audit;  // pruning of domain conjuncts
  std::string text;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : templates) n += t.parameters.size();
    return n;
  }
};

// Domain conjuncts that share no variable with the consequent, directly or
// through other kept conjuncts, do not constrain it and are dropped.
inline Predicate prune_domain(const Predicate& domain, const std::set<std::string>& consequent_vars,
                              std::vector<Predicate>* dropped = nullptr) {
  auto parts = detail::conjuncts(domain);
  std::set<std::string> reach = consequent_vars;
  std::vector<bool> keep(parts.size(), false);
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (keep[i]) continue;
      auto vs = variables(parts[i]);
      bool touches = std::any_of(vs.begin(), vs.end(), [&](const std::string& v) { return reach.count(v) != 0; });
      if (touches) {
        keep[i] = true;
        reach.insert(vs.begin(), vs.end());
        grew = true;
      }
    }
  }
  std::vector<Predicate> kept;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (keep[i]) {
      kept.push_back(parts[i]);
    } else if (dropped != nullptr) {
      dropped->push_back(parts[i]);
    }
  }
  return Predicate::conjunction(kept);
}

// (C1) init => p <= 0, (C2) domain => Lie derivative <= 0 and
// (C3) p <= 0 => not unsafe, per mode; plus one consecution constraint per
// transition. Unsafe sets default to the modes' own.
inline ConstraintDocument emit_constraints(const AbstractionResult& r, const std::map<std::string, Predicate>& unsafe,
                                           const TemplateSpec& tmpl) {
  if (tmpl.degree < 1) throw std::invalid_argument("template degree must be at least 1");
  const HybridSystem& h = r.system;
  {
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < h.modes.size(); ++i) {
      const auto& m = h.modes[i];
      for (std::size_t k = 0; k < m.field.vars.size(); ++k) {
        detail::require_polynomial_expr(m.field.rhs[k], m.name + " flow " + m.field.vars[k], bad);
      }
      detail::require_polynomial(m.init, m.name + ".init", bad);
      detail::require_polynomial(m.domain, m.name + ".domain", bad);
      auto u = unsafe.find(m.name);
      detail::require_polynomial(u == unsafe.end() ? m.unsafe : u->second, m.name + ".unsafe", bad);
    }
    for (const auto& t : h.transitions) {
      detail::require_polynomial(t.guard, t.name + ".guard", bad);
      for (const auto& a : t.reset.assignments) detail::require_polynomial_expr(a.value, t.name + ".reset " + a.variable, bad);
      detail::require_polynomial(t.reset.relation, t.name + ".relation", bad);
    }
    if (!bad.empty()) {
      std::string msg = "constraint emission needs a polynomial system:";
      for (const auto& b : bad) msg += "\n  " + b;
      throw NonPolynomialInput(msg);
    }
  }

  ConstraintDocument doc;
  doc.spec = tmpl;
  const auto& originals = r.ledger.originals().empty() ? h.vars : r.ledger.originals();
  std::vector<std::string> scope_vars = tmpl.scope == TemplateScope::Originals ? originals : h.vars;
  bool single = h.modes.size() == 1;

  for (const auto& m : h.modes) {
    ModeTemplate t;
    t.mode = m.name;
    t.variables = scope_vars;
    t.monomials = monomials_up_to(scope_vars.size(), tmpl.degree);
    std::map<std::string, Poly> rhs;
    for (std::size_t k = 0; k < m.field.vars.size(); ++k) {
      const auto& v = m.field.vars[k];
      if (std::find(scope_vars.begin(), scope_vars.end(), v) == scope_vars.end()) continue;
      rhs[v] = to_canonical_poly(m.field.rhs[k], h.vars);
    }
    Expr p = constant(0);
    Expr lp = constant(0);
    for (std::size_t i = 0; i < t.monomials.size(); ++i) {
      std::string name = single ? tmpl.prefix + std::to_string(i) : tmpl.prefix + "_" + m.name + "_" + std::to_string(i);
      if (std::find(h.vars.begin(), h.vars.end(), name) != h.vars.end()) {
        throw std::invalid_argument("template parameter " + name + " collides with a state variable; choose another prefix");
      }
      t.parameters.push_back(name);
      Poly mono = monomial_poly(t.monomials[i], scope_vars);
      Expr me = mono.to_expr();
      p = add(p, me.is_const(1) ? var(name) : mul(var(name), me));
      Poly lm = lie_derivative_poly(mono, rhs);
      if (!lm.is_zero()) lp = add(lp, mul(var(name), poly_expr(lm, h.vars)));
    }
    t.polynomial = p;
    t.lie_derivative = lp;
    doc.templates.push_back(std::move(t));
  }

  auto tmpl_of = [&](const std::string& mode) -> const ModeTemplate& {
    for (const auto& t : doc.templates) {
      if (t.mode == mode) return t;
    }
    throw InvalidModel("unknown mode " + mode);
  };
  auto quantified = [&](const std::set<std::string>& vs) { return detail::ordered_subset(h.vars, vs); };

  std::ostringstream os;
  os << "; invariant synthesis problem\n";
  os << "; template degree " << tmpl.degree << ", scope " << scope_name(tmpl.scope) << ", variables";
  for (const auto& v : scope_vars) os << " " << v;
  os << "\n";
  os << "; parameters " << doc.parameter_count() << "\n";
  for (const auto& t : doc.templates) {
    for (std::size_t i = 0; i < t.parameters.size(); ++i) {
      os << "(declare-const " << detail::smt_symbol(t.parameters[i]) << " Real) ; "
         << monomial_poly(t.monomials[i], t.variables).to_expr() << "\n";
    }
  }
  for (const auto& t : doc.templates) {
    os << "(define-fun " << detail::smt_symbol("p_" + t.mode) << " " << detail::smt_sorted(t.variables) << " Real "
       << detail::smt_expr(t.polynomial) << ")\n";
  }

  for (const auto& m : h.modes) {
    const auto& t = tmpl_of(m.name);
    std::string pcall = detail::smt_call("p_" + m.name, t.variables);
    std::set<std::string> tv(t.variables.begin(), t.variables.end());
    os << "; mode " << m.name << "\n";

    {
      auto vs = variables(m.init);
      vs.insert(tv.begin(), tv.end());
      os << "(assert (! " << detail::forall(quantified(vs), "(=> " + detail::smt_predicate(m.init) + " (<= " + pcall + " 0))")
         << " :named " << detail::smt_symbol(m.name + ".C1") << "))\n";
    }
    {
      auto lvars = variables(t.lie_derivative);
      for (const auto& u : t.parameters) lvars.erase(u);
      std::vector<Predicate> dropped;
      Predicate d = prune_domain(m.domain, lvars, &dropped);
      for (const auto& x : dropped) {
        auto vs = variables(x);
        doc.audit.push_back({m.name + ".domain", vs.empty() ? std::string("-") : *vs.begin(), Strategy{StrategyKind::W4},
                             "pruned from C2: " + x.str()});
      }
      auto vs = variables(d);
      vs.insert(lvars.begin(), lvars.end());
      os << "(assert (! "
         << detail::forall(quantified(vs), "(=> " + detail::smt_predicate(d) + " (<= " + detail::smt_expr(t.lie_derivative) + " 0))")
         << " :named " << detail::smt_symbol(m.name + ".C2") << "))\n";
    }
    {
      auto u = unsafe.find(m.name);
      const Predicate& bad = u == unsafe.end() ? m.unsafe : u->second;
      auto vs = variables(bad);
      vs.insert(tv.begin(), tv.end());
      std::string rhs = bad.is_false() ? "true" : "(not " + detail::smt_predicate(bad) + ")";
      os << "(assert (! " << detail::forall(quantified(vs), "(=> (<= " + pcall + " 0) " + rhs + ")") << " :named "
         << detail::smt_symbol(m.name + ".C3") << "))\n";
    }
  }

  for (const auto& tr : h.transitions) {
    const auto& src = tmpl_of(tr.source);
    const auto& dst = tmpl_of(tr.target);
    // Post-state arguments: assigned values, primed variables for havoc,
    // the variable itself otherwise.
    std::vector<std::string> primed_used;
    std::vector<std::string> args;
    for (const auto& v : dst.variables) {
      if (const Expr* e = tr.reset.value_of(v)) {
        args.push_back(detail::smt_expr(*e));
      } else if (tr.reset.havocs(v)) {
        args.push_back(detail::smt_symbol(primed(v)));
        primed_used.push_back(primed(v));
      } else {
        args.push_back(detail::smt_symbol(v));
      }
    }
    std::string post = detail::smt_symbol("p_" + tr.target);
    if (!args.empty()) {
      post = "(" + post;
      for (const auto& a : args) post += " " + a;
      post += ")";
    }

    std::set<std::string> vs = variables(tr.guard);
    vs.insert(src.variables.begin(), src.variables.end());
    for (const auto& a : tr.reset.assignments) {
      if (std::find(dst.variables.begin(), dst.variables.end(), a.variable) == dst.variables.end()) continue;
      auto av = variables(a.value);
      vs.insert(av.begin(), av.end());
    }
    for (const auto& v : dst.variables) vs.insert(v);
    auto rv = variables(tr.reset.relation);
    for (const auto& v : rv) {
      if (v.empty() || v.back() != '\'') vs.insert(v);
    }
    std::vector<std::string> q = quantified(vs);
    for (const auto& v : rv) {
      if (!v.empty() && v.back() == '\'' && std::find(primed_used.begin(), primed_used.end(), v) == primed_used.end()) {
        primed_used.push_back(v);
      }
    }
    q.insert(q.end(), primed_used.begin(), primed_used.end());
    std::string hyp = "(and (<= " + detail::smt_call("p_" + tr.source, src.variables) + " 0) " + detail::smt_predicate(tr.guard);
    if (!tr.reset.relation.is_true()) hyp += " " + detail::smt_predicate(tr.reset.relation);
    hyp += ")";
    os << "; transition " << tr.name << ": " << tr.source << " -> " << tr.target << "\n";
    os << "(assert (! " << detail::forall(q, "(=> " + hyp + " (<= " + post + " 0))") << " :named "
       << detail::smt_symbol(tr.name + ".jump") << "))\n";
  }
  doc.text = os.str();
  return doc;
}

inline ConstraintDocument emit_constraints(const AbstractionResult& r, const TemplateSpec& tmpl) {
  return emit_constraints(r, {}, tmpl);
}

enum class ExportFormat { Native, Smt, ModelChecker };

inline ExportFormat parse_format(const std::string& s) {
  if (s == "native") return ExportFormat::Native;
  if (s == "smt" || s == "smt-like") return ExportFormat::Smt;
  if (s == "flowstar" || s == "model-checker") return ExportFormat::ModelChecker;
  throw std::invalid_argument("unknown export format '" + s + "'");
}

struct ReachSettings {
  double step = 0.01;
  double time = 2.0;
  unsigned order = 6;
  unsigned jumps = 2;
};

namespace detail {

inline std::string smt_system(const HybridSystem& h) {
  std::vector<std::string> bad;
  for (const auto& m : h.modes) {
    for (std::size_t k = 0; k < m.field.vars.size(); ++k) require_polynomial_expr(m.field.rhs[k], m.name + " flow " + m.field.vars[k], bad);
    require_polynomial(m.init, m.name + ".init", bad);
    require_polynomial(m.domain, m.name + ".domain", bad);
    require_polynomial(m.unsafe, m.name + ".unsafe", bad);
  }
  for (const auto& t : h.transitions) {
    require_polynomial(t.guard, t.name + ".guard", bad);
    for (const auto& a : t.reset.assignments) require_polynomial_expr(a.value, t.name + ".reset " + a.variable, bad);
    require_polynomial(t.reset.relation, t.name + ".relation", bad);
  }
  if (!bad.empty()) throw UnsupportedConstruct(bad);

  std::vector<std::string> post;
  for (const auto& v : h.vars) post.push_back(primed(v));
  std::vector<std::string> both = h.vars;
  both.insert(both.end(), post.begin(), post.end());
  std::string sorted = smt_sorted(h.vars);

  std::ostringstream os;
  os << "; polynomial hybrid system over";
  for (const auto& v : h.vars) os << " " << v;
  os << "\n(set-logic NRA)\n";
  for (const auto& m : h.modes) {
    os << "; mode " << m.name << "\n";
    for (std::size_t k = 0; k < m.field.vars.size(); ++k) {
      os << "(define-fun " << smt_symbol(m.name + ".flow." + m.field.vars[k]) << " " << sorted << " Real "
         << smt_expr(m.field.rhs[k]) << ")\n";
    }
    os << "(define-fun " << smt_symbol(m.name + ".init") << " " << sorted << " Bool " << smt_predicate(m.init) << ")\n";
    os << "(define-fun " << smt_symbol(m.name + ".domain") << " " << sorted << " Bool " << smt_predicate(m.domain) << ")\n";
    os << "(define-fun " << smt_symbol(m.name + ".unsafe") << " " << sorted << " Bool " << smt_predicate(m.unsafe) << ")\n";
  }
  for (const auto& t : h.transitions) {
    os << "; transition " << t.name << ": " << t.source << " -> " << t.target << "\n";
    os << "(define-fun " << smt_symbol(t.name + ".guard") << " " << sorted << " Bool " << smt_predicate(t.guard) << ")\n";
    std::vector<std::string> parts;
    for (const auto& v : h.vars) {
      if (const Expr* e = t.reset.value_of(v)) {
        parts.push_back("(= " + smt_symbol(primed(v)) + " " + smt_expr(*e) + ")");
      } else if (!t.reset.havocs(v)) {
        parts.push_back("(= " + smt_symbol(primed(v)) + " " + smt_symbol(v) + ")");
      }
    }
    if (!t.reset.relation.is_true()) parts.push_back(smt_predicate(t.reset.relation));
    std::string body = parts.empty() ? "true" : parts.size() == 1 ? parts.front() : "(and";
    if (parts.size() > 1) {
      for (const auto& p : parts) body += " " + p;
      body += ")";
    }
    os << "(define-fun " << smt_symbol(t.name + ".reset") << " " << smt_sorted(both) << " Bool " << body << ")\n";
    // Every guard state has a successor.
    std::string ex = post.empty() ? body : "(exists " + smt_sorted(post) + " " + smt_call(t.name + ".reset", both) + ")";
    os << "(assert (! " << forall(h.vars, "(=> " + smt_call(t.name + ".guard", h.vars) + " " + ex + ")") << " :named "
       << smt_symbol(t.name + ".total") << "))\n";
  }
  return os.str();
}

inline std::string fs_number(const Rational& r) {
  Integer n = numerator(r);
  Integer d = denominator(r);
  return d == 1 ? n.str() : "(" + n.str() + "/" + d.str() + ")";
}

inline std::string fs_expr(const Expr& e) {
  // Flow* reads infix with ^ for integer powers.
  switch (e.op()) {
    case Op::Const: return fs_number(e.value());
    case Op::Var: return e.name();
    case Op::Add: return "(" + fs_expr(e.lhs()) + " + " + fs_expr(e.rhs()) + ")";
    case Op::Sub: return "(" + fs_expr(e.lhs()) + " - " + fs_expr(e.rhs()) + ")";
    case Op::Mul: return fs_expr(e.lhs()) + " * " + fs_expr(e.rhs());
    case Op::Pow: return fs_expr(e.lhs()) + "^" + numerator(e.exponent()).str();
    default: return e.str();
  }
}

inline void fs_constraints(std::ostream& os, const Predicate& p, const std::string& where, const std::string& indent,
                           std::vector<std::string>& bad) {
  for (const auto& c : conjuncts(p)) {
    if (c.is_false()) {
      bad.push_back(where + ": false");
      continue;
    }
    if (c.kind() != Predicate::Kind::Atom) {
      bad.push_back(where + ": " + c.str());
      continue;
    }
    const Atom& a = c.atom();
    std::string e = fs_expr(a.lhs);
    switch (a.rel) {
      case Rel::Le:
      case Rel::Lt: os << indent << e << " <= 0\n"; break;
      case Rel::Ge:
      case Rel::Gt: os << indent << e << " >= 0\n"; break;
      case Rel::Eq: os << indent << e << " = 0\n"; break;
      case Rel::Ne: bad.push_back(where + ": " + c.str()); break;
    }
  }
}

inline std::string flowstar_system(const HybridSystem& h, const ReachSettings& s, const ReplacementLedger* ledger) {
  std::vector<std::string> bad;
  for (const auto& m : h.modes) {
    for (std::size_t k = 0; k < m.field.vars.size(); ++k) require_polynomial_expr(m.field.rhs[k], m.name + " flow " + m.field.vars[k], bad);
    require_polynomial(m.domain, m.name + ".domain", bad);
  }
  for (const auto& t : h.transitions) {
    require_polynomial(t.guard, t.name + ".guard", bad);
    for (const auto& a : t.reset.assignments) require_polynomial_expr(a.value, t.name + ".reset " + a.variable, bad);
    for (const auto& v : t.reset.havoc) bad.push_back(t.name + ".reset: havoc " + v);
    if (!t.reset.relation.is_true()) bad.push_back(t.name + ".relation: " + t.reset.relation.str());
  }

  std::ostringstream os;
  os << "hybrid reachability\n{\n";
  os << "  state var ";
  for (std::size_t i = 0; i < h.vars.size(); ++i) os << (i ? ", " : "") << h.vars[i];
  os << "\n\n  setting\n  {\n";
  os << "    fixed steps " << s.step << "\n    time " << s.time << "\n";
  os << "    remainder estimation 1e-4\n    identity precondition\n";
  os << "    gnuplot octagon " << h.vars.front() << "," << (h.vars.size() > 1 ? h.vars[1] : h.vars.front()) << "\n";
  os << "    fixed orders " << s.order << "\n    cutoff 1e-12\n    precision 53\n";
  os << "    output " << h.modes.front().name << "\n    max jumps " << s.jumps << "\n    print on\n  }\n\n";
  os << "  modes\n  {\n";
  for (const auto& m : h.modes) {
    os << "    " << m.name << "\n    {\n      poly ode 1\n      {\n";
    for (std::size_t k = 0; k < m.field.vars.size(); ++k) os << "        " << m.field.vars[k] << "' = " << fs_expr(m.field.rhs[k]) << "\n";
    os << "      }\n      inv\n      {\n";
    fs_constraints(os, m.domain, m.name + ".domain", "        ", bad);
    os << "      }\n    }\n";
  }
  os << "  }\n\n  jumps\n  {\n";
  for (const auto& t : h.transitions) {
    os << "    " << t.source << " -> " << t.target << "\n    guard { ";
    std::ostringstream g;
    fs_constraints(g, t.guard, t.name + ".guard", "", bad);
    std::string gs = g.str();
    std::replace(gs.begin(), gs.end(), '\n', ' ');
    os << gs << "}\n    reset { ";
    for (const auto& a : t.reset.assignments) os << a.variable << "' := " << fs_expr(a.value) << " ";
    os << "}\n    parallelotope aggregation {}\n";
  }
  os << "  }\n\n  init\n  {\n";
  for (const auto& m : h.modes) {
    if (m.init.is_false()) continue;
    Box b = derive_box(m.init);
    // A fresh variable without its own bound takes the range of its
    // definition over the box of the originals.
    if (ledger != nullptr) {
      for (const auto& e : ledger->entries()) {
        auto it = b.find(e.name);
        if (it != b.end() && it->second.bounded()) continue;
        try {
          Interval r = interval_eval(e.definition, b);
          if (r.bounded()) b[e.name] = it == b.end() ? r : Interval(std::max(r.lo, it->second.lo), std::min(r.hi, it->second.hi));
        } catch (const DomainViolation&) {
        }
      }
    }
    os << "    " << m.name << "\n    {\n";
    for (const auto& v : h.vars) {
      auto it = b.find(v);
      if (it == b.end() || !it->second.bounded()) {
        bad.push_back(m.name + ".init: no finite bound on " + v);
        continue;
      }
      os << "      " << v << " in [" << shortest(it->second.lo) << ", " << shortest(it->second.hi) << "]\n";
    }
    os << "    }\n";
  }
  os << "  }\n}\n";
  if (!bad.empty()) throw UnsupportedConstruct(bad);
  return os.str();
}

}  // namespace detail

inline std::string export_system(const AbstractionResult& r, ExportFormat f, const ReachSettings& s = {}) {
  switch (f) {
    case ExportFormat::Native: return print_result(r);
    case ExportFormat::Smt: return detail::smt_system(r.system);
    case ExportFormat::ModelChecker: return detail::flowstar_system(r.system, s, &r.ledger);
  }
  return {};
}

inline std::string export_system(const HybridSystem& h, ExportFormat f, const ReachSettings& s = {}) {
  switch (f) {
    case ExportFormat::Native: return print_model(h);
    case ExportFormat::Smt: return detail::smt_system(h);
    case ExportFormat::ModelChecker: return detail::flowstar_system(h, s, nullptr);
  }
  return {};
}

}  // namespace ehs
