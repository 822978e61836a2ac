#pragma once

// Boolean combinations of atoms `e ~ 0` with ~ in {<=, <, =, !=, >=, >}.

#include "ehs/expr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace ehs {

enum class Rel { Le, Lt, Eq, Ne, Ge, Gt };

inline const char* rel_symbol(Rel r) {
  switch (r) {
    case Rel::Le: return "<=";
    case Rel::Lt: return "<";
    case Rel::Eq: return "=";
    case Rel::Ne: return "!=";
    case Rel::Ge: return ">=";
    case Rel::Gt: return ">";
  }
  return "?";
}

inline Rel negate(Rel r) {
  switch (r) {
    case Rel::Le: return Rel::Gt;
    case Rel::Lt: return Rel::Ge;
    case Rel::Eq: return Rel::Ne;
    case Rel::Ne: return Rel::Eq;
    case Rel::Ge: return Rel::Lt;
    case Rel::Gt: return Rel::Le;
  }
  return r;
}

struct Atom {
  Expr lhs;  // compared against zero
  Rel rel = Rel::Le;
};

class Predicate {
 public:
  enum class Kind { True, False, Atom, And, Or, Not };

  Predicate() : Predicate(Kind::True) {}

  static Predicate truth() { return Predicate(Kind::True); }
  static Predicate falsity() { return Predicate(Kind::False); }
  static Predicate atom(Expr lhs, Rel rel) {
    Predicate p(Kind::Atom);
    p.atom_ = Atom{std::move(lhs), rel};
    return p;
  }
  // a ~ b as (a - b) ~ 0
  static Predicate compare(const Expr& a, Rel rel, const Expr& b) { return atom(sub(a, b), rel); }
  static Predicate conjunction(std::vector<Predicate> parts);
  static Predicate disjunction(std::vector<Predicate> parts);
  static Predicate negation(Predicate p);

  Kind kind() const { return kind_; }
  bool is_true() const { return kind_ == Kind::True; }
  bool is_false() const { return kind_ == Kind::False; }
  const Atom& atom() const { return atom_; }
  const std::vector<Predicate>& children() const { return *children_; }

  std::string str() const;

 private:
  explicit Predicate(Kind k) : kind_(k), children_(std::make_shared<std::vector<Predicate>>()) {}
  Kind kind_;
  Atom atom_;
  std::shared_ptr<const std::vector<Predicate>> children_;
};

inline Predicate Predicate::conjunction(std::vector<Predicate> parts) {
  std::vector<Predicate> flat;
  for (auto& p : parts) {
    if (p.is_false()) return falsity();
    if (p.is_true()) continue;
    if (p.kind() == Kind::And) {
      for (const auto& c : p.children()) flat.push_back(c);
    } else {
      flat.push_back(std::move(p));
    }
  }
  if (flat.empty()) return truth();
  if (flat.size() == 1) return flat.front();
  Predicate out(Kind::And);
  out.children_ = std::make_shared<std::vector<Predicate>>(std::move(flat));
  return out;
}

inline Predicate Predicate::disjunction(std::vector<Predicate> parts) {
  std::vector<Predicate> flat;
  for (auto& p : parts) {
    if (p.is_true()) return truth();
    if (p.is_false()) continue;
    if (p.kind() == Kind::Or) {
      for (const auto& c : p.children()) flat.push_back(c);
    } else {
      flat.push_back(std::move(p));
    }
  }
  if (flat.empty()) return falsity();
  if (flat.size() == 1) return flat.front();
  Predicate out(Kind::Or);
  out.children_ = std::make_shared<std::vector<Predicate>>(std::move(flat));
  return out;
}

inline Predicate Predicate::negation(Predicate p) {
  if (p.is_true()) return falsity();
  if (p.is_false()) return truth();
  Predicate out(Kind::Not);
  out.children_ = std::make_shared<std::vector<Predicate>>(std::vector<Predicate>{std::move(p)});
  return out;
}

inline Predicate operator&&(const Predicate& a, const Predicate& b) { return Predicate::conjunction({a, b}); }
inline Predicate operator||(const Predicate& a, const Predicate& b) { return Predicate::disjunction({a, b}); }
inline Predicate operator!(const Predicate& a) { return Predicate::negation(a); }

inline bool operator==(const Predicate& a, const Predicate& b) {
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case Predicate::Kind::True:
    case Predicate::Kind::False: return true;
    case Predicate::Kind::Atom: return a.atom().rel == b.atom().rel && a.atom().lhs == b.atom().lhs;
    default:
      if (a.children().size() != b.children().size()) return false;
      for (std::size_t i = 0; i < a.children().size(); ++i) {
        if (!(a.children()[i] == b.children()[i])) return false;
      }
      return true;
  }
}

namespace detail {
inline void print_predicate(std::ostream& os, const Predicate& p, int level) {
  // level: 0 = or, 1 = and, 2 = unary
  switch (p.kind()) {
    case Predicate::Kind::True: os << "true"; return;
    case Predicate::Kind::False: os << "false"; return;
    case Predicate::Kind::Atom: os << p.atom().lhs << ' ' << rel_symbol(p.atom().rel) << " 0"; return;
    case Predicate::Kind::Not:
      os << '!';
      os << '(';
      print_predicate(os, p.children().front(), 0);
      os << ')';
      return;
    case Predicate::Kind::And:
    case Predicate::Kind::Or: {
      bool is_and = p.kind() == Predicate::Kind::And;
      int mine = is_and ? 1 : 0;
      bool paren = mine < level;
      if (paren) os << '(';
      for (std::size_t i = 0; i < p.children().size(); ++i) {
        if (i) os << (is_and ? " && " : " || ");
        // Nested connectives of the same kind are flattened on construction, so
        // a child of the same kind only arises from explicit parentheses.
        const auto& c = p.children()[i];
        bool same = c.kind() == p.kind();
        if (same) os << '(';
        print_predicate(os, c, mine + 1);
        if (same) os << ')';
      }
      if (paren) os << ')';
      return;
    }
  }
}
}  // namespace detail

inline std::string Predicate::str() const {
  std::ostringstream os;
  detail::print_predicate(os, *this, 0);
  return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const Predicate& p) { return os << p.str(); }

inline void visit_atoms(const Predicate& p, const std::function<void(const Atom&)>& fn) {
  if (p.kind() == Predicate::Kind::Atom) {
    fn(p.atom());
    return;
  }
  for (const auto& c : p.children()) visit_atoms(c, fn);
}

inline std::set<std::string> variables(const Predicate& p) {
  std::set<std::string> out;
  visit_atoms(p, [&](const Atom& a) {
    auto v = variables(a.lhs);
    out.insert(v.begin(), v.end());
  });
  return out;
}

// Rewrites every atom expression.
inline Predicate map_atoms(const Predicate& p, const std::function<Expr(const Expr&)>& fn) {
  switch (p.kind()) {
    case Predicate::Kind::True:
    case Predicate::Kind::False: return p;
    case Predicate::Kind::Atom: return Predicate::atom(fn(p.atom().lhs), p.atom().rel);
    case Predicate::Kind::Not: return Predicate::negation(map_atoms(p.children().front(), fn));
    case Predicate::Kind::And:
    case Predicate::Kind::Or: {
      std::vector<Predicate> parts;
      for (const auto& c : p.children()) parts.push_back(map_atoms(c, fn));
      return p.kind() == Predicate::Kind::And ? Predicate::conjunction(std::move(parts))
                                              : Predicate::disjunction(std::move(parts));
    }
  }
  return p;
}

// Negation-normal form: negations pushed into the atoms.
inline Predicate negation_normal_form(const Predicate& p, bool negated = false) {
  switch (p.kind()) {
    case Predicate::Kind::True: return negated ? Predicate::falsity() : p;
    case Predicate::Kind::False: return negated ? Predicate::truth() : p;
    case Predicate::Kind::Atom: return negated ? Predicate::atom(p.atom().lhs, negate(p.atom().rel)) : p;
    case Predicate::Kind::Not: return negation_normal_form(p.children().front(), !negated);
    case Predicate::Kind::And:
    case Predicate::Kind::Or: {
      std::vector<Predicate> parts;
      for (const auto& c : p.children()) parts.push_back(negation_normal_form(c, negated));
      bool conj = (p.kind() == Predicate::Kind::And) != negated;
      return conj ? Predicate::conjunction(std::move(parts)) : Predicate::disjunction(std::move(parts));
    }
  }
  return p;
}

inline bool holds(Rel rel, double v) {
  switch (rel) {
    case Rel::Le: return v <= 0;
    case Rel::Lt: return v < 0;
    case Rel::Eq: return v == 0;
    case Rel::Ne: return v != 0;
    case Rel::Ge: return v >= 0;
    case Rel::Gt: return v > 0;
  }
  return false;
}

// Signed satisfaction degree of an atom: positive when it holds strictly.
inline double robustness(Rel rel, double v) {
  switch (rel) {
    case Rel::Le:
    case Rel::Lt: return -v;
    case Rel::Ge:
    case Rel::Gt: return v;
    case Rel::Eq: return -std::fabs(v);
    case Rel::Ne: return std::fabs(v);
  }
  return 0.0;
}

template <class Eval>
bool evaluate_predicate_with(const Predicate& p, const Eval& eval, double eq_tolerance = 0.0) {
  switch (p.kind()) {
    case Predicate::Kind::True: return true;
    case Predicate::Kind::False: return false;
    case Predicate::Kind::Atom: {
      double v = eval(p.atom().lhs);
      if (std::isnan(v)) return false;
      if (eq_tolerance > 0) {
        if (p.atom().rel == Rel::Eq) return std::fabs(v) <= eq_tolerance;
        if (p.atom().rel == Rel::Ne) return std::fabs(v) > eq_tolerance;
        if (p.atom().rel == Rel::Le || p.atom().rel == Rel::Lt) return v <= eq_tolerance;
        return v >= -eq_tolerance;
      }
      return holds(p.atom().rel, v);
    }
    case Predicate::Kind::Not: return !evaluate_predicate_with(p.children().front(), eval, eq_tolerance);
    case Predicate::Kind::And:
      return std::all_of(p.children().begin(), p.children().end(),
                         [&](const Predicate& c) { return evaluate_predicate_with(c, eval, eq_tolerance); });
    case Predicate::Kind::Or:
      return std::any_of(p.children().begin(), p.children().end(),
                         [&](const Predicate& c) { return evaluate_predicate_with(c, eval, eq_tolerance); });
  }
  return false;
}

inline bool evaluate(const Predicate& p, const Valuation& env, double eq_tolerance = 0.0) {
  return evaluate_predicate_with(
      p, [&](const Expr& e) { return evaluate(e, env); }, eq_tolerance);
}

template <class Eval>
double robustness_with(const Predicate& p, const Eval& eval) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (p.kind()) {
    case Predicate::Kind::True: return inf;
    case Predicate::Kind::False: return -inf;
    case Predicate::Kind::Atom: return robustness(p.atom().rel, eval(p.atom().lhs));
    case Predicate::Kind::Not: return -robustness_with(p.children().front(), eval);
    case Predicate::Kind::And: {
      double r = inf;
      for (const auto& c : p.children()) r = std::min(r, robustness_with(c, eval));
      return r;
    }
    case Predicate::Kind::Or: {
      double r = -inf;
      for (const auto& c : p.children()) r = std::max(r, robustness_with(c, eval));
      return r;
    }
  }
  return 0.0;
}

inline double robustness(const Predicate& p, const Valuation& env) {
  return robustness_with(p, [&](const Expr& e) { return evaluate(e, env); });
}

}  // namespace ehs
