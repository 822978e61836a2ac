#pragma once

// Symbolic differentiation, substitution and subterm replacement.

#include "ehs/expr.hpp"

#include <map>
#include <string>

namespace ehs {

inline Expr differentiate(const Expr& e, const std::string& v) {
  switch (e.op()) {
    case Op::Const: return constant(0);
    case Op::Var: return constant(e.name() == v ? 1 : 0);
    case Op::Add: return add(differentiate(e.lhs(), v), differentiate(e.rhs(), v));
    case Op::Sub: return sub(differentiate(e.lhs(), v), differentiate(e.rhs(), v));
    case Op::Mul: {
      Expr f = e.lhs();
      Expr g = e.rhs();
      return add(mul(differentiate(f, v), g), mul(f, differentiate(g, v)));
    }
    case Op::Div: {
      Expr f = e.lhs();
      Expr g = e.rhs();
      Expr df = differentiate(f, v);
      Expr dg = differentiate(g, v);
      if (dg.is_const(0)) return quot(df, g);
      return quot(sub(mul(df, g), mul(f, dg)), pow(g, 2));
    }
    case Op::Pow: {
      Expr f = e.lhs();
      const Rational& a = e.exponent();
      return mul(mul(constant(a), pow(f, a - 1)), differentiate(f, v));
    }
    case Op::Exp: return mul(e, differentiate(e.arg(), v));
    case Op::Ln: return quot(differentiate(e.arg(), v), e.arg());
    case Op::Sin: return mul(cos(e.arg()), differentiate(e.arg(), v));
    case Op::Cos: return mul(neg(sin(e.arg())), differentiate(e.arg(), v));
  }
  return constant(0);
}

// Simultaneous replacement of variables; untouched subtrees are shared.
inline Expr substitute(const Expr& e, const std::map<std::string, Expr>& bindings) {
  if (bindings.empty()) return e;
  switch (e.op()) {
    case Op::Const: return e;
    case Op::Var: {
      auto it = bindings.find(e.name());
      return it == bindings.end() ? e : it->second;
    }
    case Op::Pow: {
      Expr base = substitute(e.lhs(), bindings);
      return base == e.lhs() ? e : Expr::power(base, e.exponent());
    }
    case Op::Exp:
    case Op::Ln:
    case Op::Sin:
    case Op::Cos: {
      Expr arg = substitute(e.arg(), bindings);
      return arg == e.arg() ? e : Expr::function(e.op(), arg);
    }
    default: {
      Expr l = substitute(e.lhs(), bindings);
      Expr r = substitute(e.rhs(), bindings);
      return (l == e.lhs() && r == e.rhs()) ? e : Expr::binary(e.op(), l, r);
    }
  }
}

// Replaces every occurrence of `target` by the variable `v`.
inline Expr replace_subterm(const Expr& e, const Expr& target, const std::string& v) {
  if (e == target) return Expr::variable(v);
  switch (e.op()) {
    case Op::Const:
    case Op::Var: return e;
    case Op::Pow: return Expr::power(replace_subterm(e.lhs(), target, v), e.exponent());
    case Op::Exp:
    case Op::Ln:
    case Op::Sin:
    case Op::Cos: return Expr::function(e.op(), replace_subterm(e.arg(), target, v));
    default: return Expr::binary(e.op(), replace_subterm(e.lhs(), target, v), replace_subterm(e.rhs(), target, v));
  }
}

inline std::size_t count_occurrences(const Expr& e, const Expr& target) {
  std::size_t n = 0;
  visit(e, [&](const Expr& s) {
    if (s == target) ++n;
  });
  return n;
}

}  // namespace ehs
