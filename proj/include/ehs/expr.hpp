#pragma once

// Immutable expression trees over the elementary-function grammar:
//   c | x | f+g | f-g | f*g | f/g | f^a | exp(f) | ln(f) | sin(f) | cos(f)
// with a rational exponent a.

#include "ehs/rational.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehs {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Exp, Ln, Sin, Cos };

inline bool is_binary(Op op) { return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div; }
inline bool is_function(Op op) { return op == Op::Exp || op == Op::Ln || op == Op::Sin || op == Op::Cos; }

inline const char* function_name(Op op) {
  switch (op) {
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    default: return "?";
  }
}

class Expr {
 public:
  // Zero constant.
  Expr();

  static Expr constant(Rational value);
  static Expr constant(std::int64_t value) { return constant(Rational(value)); }
  static Expr variable(std::string name);
  // Raw constructors: no simplification, used by the parser and tests.
  static Expr binary(Op op, Expr lhs, Expr rhs);
  static Expr power(Expr base, Rational exponent);
  static Expr function(Op op, Expr arg);

  Op op() const;
  const Rational& value() const;     // Const
  const Rational& exponent() const;  // Pow
  const std::string& name() const;   // Var
  Expr lhs() const;  // binary left, Pow base, function argument
  Expr rhs() const;  // binary right
  Expr arg() const { return lhs(); }

  bool is_const() const { return op() == Op::Const; }
  bool is_const(const Rational& v) const { return is_const() && value() == v; }
  bool is_var() const { return op() == Op::Var; }

  std::string str() const;

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Expr::Node {
  Op op = Op::Const;
  Rational number;   // constant value or exponent
  std::string name;  // variable name
  std::shared_ptr<const Node> left;
  std::shared_ptr<const Node> right;
};

inline Expr::Expr() {
  static const std::shared_ptr<const Node> zero = [] {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->number = 0;
    return std::shared_ptr<const Node>(n);
  }();
  node_ = zero;
}

inline Expr Expr::constant(Rational value) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->number = std::move(value);
  return Expr(std::move(n));
}

inline Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->name = std::move(name);
  return Expr(std::move(n));
}

inline Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
  if (!is_binary(op)) throw std::invalid_argument("Expr::binary with non-binary operator");
  auto n = std::make_shared<Node>();
  n->op = op;
  n->left = std::move(lhs.node_);
  n->right = std::move(rhs.node_);
  return Expr(std::move(n));
}

inline Expr Expr::power(Expr base, Rational exponent) {
  auto n = std::make_shared<Node>();
  n->op = Op::Pow;
  n->number = std::move(exponent);
  n->left = std::move(base.node_);
  return Expr(std::move(n));
}

inline Expr Expr::function(Op op, Expr arg) {
  if (!is_function(op)) throw std::invalid_argument("Expr::function with non-function operator");
  auto n = std::make_shared<Node>();
  n->op = op;
  n->left = std::move(arg.node_);
  return Expr(std::move(n));
}

inline Op Expr::op() const { return node_->op; }
inline const Rational& Expr::value() const { return node_->number; }
inline const Rational& Expr::exponent() const { return node_->number; }
inline const std::string& Expr::name() const { return node_->name; }
inline Expr Expr::lhs() const {
  if (!node_->left) throw std::logic_error("Expr::lhs on a leaf");
  return Expr(node_->left);
}
inline Expr Expr::rhs() const {
  if (!node_->right) throw std::logic_error("Expr::rhs on a non-binary node");
  return Expr(node_->right);
}

// ---------------------------------------------------------------------------
// Structural order and equality.

inline int compare(const Expr& a, const Expr& b) {
  if (a.op() != b.op()) return a.op() < b.op() ? -1 : 1;
  switch (a.op()) {
    case Op::Const:
      if (a.value() == b.value()) return 0;
      return a.value() < b.value() ? -1 : 1;
    case Op::Var:
      return a.name().compare(b.name()) < 0 ? -1 : (a.name() == b.name() ? 0 : 1);
    case Op::Pow:
      if (a.exponent() != b.exponent()) return a.exponent() < b.exponent() ? -1 : 1;
      return compare(a.lhs(), b.lhs());
    case Op::Exp:
    case Op::Ln:
    case Op::Sin:
    case Op::Cos:
      return compare(a.arg(), b.arg());
    default: {
      int c = compare(a.lhs(), b.lhs());
      return c != 0 ? c : compare(a.rhs(), b.rhs());
    }
  }
}

inline bool operator==(const Expr& a, const Expr& b) { return compare(a, b) == 0; }
inline bool operator!=(const Expr& a, const Expr& b) { return compare(a, b) != 0; }

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const { return compare(a, b) < 0; }
};

// ---------------------------------------------------------------------------
// Simplifying builders: constant folding and the 0/1 identities only.

inline Expr constant(Rational v) { return Expr::constant(std::move(v)); }
inline Expr var(std::string name) { return Expr::variable(std::move(name)); }

inline Expr add(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return constant(a.value() + b.value());
  if (a.is_const(0)) return b;
  if (b.is_const(0)) return a;
  return Expr::binary(Op::Add, a, b);
}

inline Expr mul(const Expr& a, const Expr& b);

inline Expr neg(const Expr& a) {
  if (a.is_const()) return constant(-a.value());
  // -(-e) = e
  if (a.op() == Op::Mul && a.lhs().is_const(-1)) return a.rhs();
  return Expr::binary(Op::Mul, constant(-1), a);
}

inline Expr sub(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return constant(a.value() - b.value());
  if (b.is_const(0)) return a;
  if (a.is_const(0)) return neg(b);
  return Expr::binary(Op::Sub, a, b);
}

inline Expr mul(const Expr& a, const Expr& b) {
  if (a.is_const() && b.is_const()) return constant(a.value() * b.value());
  if (a.is_const(0) || b.is_const(0)) return constant(0);
  if (a.is_const(1)) return b;
  if (b.is_const(1)) return a;
  if (a.is_const(-1)) return neg(b);
  if (b.is_const(-1)) return neg(a);
  return Expr::binary(Op::Mul, a, b);
}

inline Expr quot(const Expr& a, const Expr& b) {
  if (b.is_const(0)) throw std::domain_error("division by the constant zero");
  if (a.is_const() && b.is_const()) return constant(a.value() / b.value());
  if (b.is_const(1)) return a;
  if (a.is_const(0)) return constant(0);
  return Expr::binary(Op::Div, a, b);
}

inline Expr pow(const Expr& base, const Rational& exponent) {
  if (exponent == 0) return constant(1);
  if (exponent == 1) return base;
  if (base.is_const() && is_integer(exponent)) {
    if (base.value() == 0 && exponent < 0) throw std::domain_error("zero to a negative power");
    return constant(pow(base.value(), numerator(exponent).convert_to<long>()));
  }
  if (base.is_const(1)) return constant(1);
  return Expr::power(base, exponent);
}

inline Expr exp(const Expr& a) {
  if (a.is_const(0)) return constant(1);
  return Expr::function(Op::Exp, a);
}
inline Expr ln(const Expr& a) {
  if (a.is_const(1)) return constant(0);
  return Expr::function(Op::Ln, a);
}
inline Expr sin(const Expr& a) {
  if (a.is_const(0)) return constant(0);
  return Expr::function(Op::Sin, a);
}
inline Expr cos(const Expr& a) {
  if (a.is_const(0)) return constant(1);
  return Expr::function(Op::Cos, a);
}

inline Expr apply_function(Op op, const Expr& a) {
  switch (op) {
    case Op::Exp: return exp(a);
    case Op::Ln: return ln(a);
    case Op::Sin: return sin(a);
    case Op::Cos: return cos(a);
    default: throw std::invalid_argument("apply_function: not a function operator");
  }
}

inline Expr apply_binary(Op op, const Expr& a, const Expr& b) {
  switch (op) {
    case Op::Add: return add(a, b);
    case Op::Sub: return sub(a, b);
    case Op::Mul: return mul(a, b);
    case Op::Div: return quot(a, b);
    default: throw std::invalid_argument("apply_binary: not a binary operator");
  }
}

inline Expr operator+(const Expr& a, const Expr& b) { return add(a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return sub(a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return mul(a, b); }
inline Expr operator/(const Expr& a, const Expr& b) { return quot(a, b); }
inline Expr operator-(const Expr& a) { return neg(a); }

// Rebuilds a tree bottom-up through the simplifying builders.
inline Expr simplify(const Expr& e) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var: return e;
    case Op::Pow: return pow(simplify(e.lhs()), e.exponent());
    case Op::Exp:
    case Op::Ln:
    case Op::Sin:
    case Op::Cos: return apply_function(e.op(), simplify(e.arg()));
    default: return apply_binary(e.op(), simplify(e.lhs()), simplify(e.rhs()));
  }
}

// ---------------------------------------------------------------------------
// Printing. The output re-parses to the same tree.

namespace detail {

enum Prec { kAdditive = 1, kMultiplicative = 2, kUnary = 3, kPower = 4, kAtom = 5 };

inline bool is_negation(const Expr& e) {
  return e.op() == Op::Mul && e.lhs().is_const(-1) && !e.rhs().is_const();
}

inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Const:
      if (e.value() < 0) return is_integer(e.value()) ? kUnary : kMultiplicative;
      return is_integer(e.value()) ? kAtom : kMultiplicative;
    case Op::Var: return kAtom;
    case Op::Add:
    case Op::Sub: return kAdditive;
    case Op::Mul: return is_negation(e) ? kUnary : kMultiplicative;
    case Op::Div: return kMultiplicative;
    case Op::Pow: return kPower;
    default: return kAtom;
  }
}

inline bool is_integer_literal(const Expr& e) { return e.is_const() && is_integer(e.value()); }

inline void print(std::ostream& os, const Expr& e, int min_prec);

inline void print_operand(std::ostream& os, const Expr& e, int min_prec) {
  if (precedence(e) < min_prec) {
    os << '(';
    print(os, e, kAdditive);
    os << ')';
  } else {
    print(os, e, min_prec);
  }
}

inline void print(std::ostream& os, const Expr& e, int /*min_prec*/) {
  switch (e.op()) {
    case Op::Const: os << to_string(e.value()); return;
    case Op::Var: os << e.name(); return;
    case Op::Add:
    case Op::Sub:
      print_operand(os, e.lhs(), kAdditive);
      os << (e.op() == Op::Add ? " + " : " - ");
      print_operand(os, e.rhs(), kMultiplicative);
      return;
    case Op::Mul:
      if (is_negation(e)) {
        os << '-';
        print_operand(os, e.rhs(), kUnary);
        return;
      }
      [[fallthrough]];
    case Op::Div: {
      // "p/q" with two integer literals would re-read as one rational literal.
      bool guard_left = e.op() == Op::Div && is_integer_literal(e.lhs()) && is_integer_literal(e.rhs()) &&
                        e.rhs().value() >= 0;
      if (guard_left) {
        os << '(' << to_string(e.lhs().value()) << ')';
      } else {
        print_operand(os, e.lhs(), kMultiplicative);
      }
      os << (e.op() == Op::Mul ? "*" : "/");
      // Negative factors on the right read poorly without parentheses.
      int right_prec = precedence(e.rhs()) == kUnary ? kPower : kUnary;
      print_operand(os, e.rhs(), right_prec);
      return;
    }
    case Op::Pow: {
      const Expr base = e.lhs();
      if (base.is_var() && base.name() == "e") {
        os << "(e)";
      } else {
        print_operand(os, base, kAtom);
      }
      os << '^';
      if (is_integer(e.exponent()) && e.exponent() >= 0) {
        os << to_string(e.exponent());
      } else {
        os << '(' << to_string(e.exponent()) << ')';
      }
      return;
    }
    default:
      os << function_name(e.op()) << '(';
      print(os, e.arg(), kAdditive);
      os << ')';
      return;
  }
}

}  // namespace detail

inline std::string Expr::str() const {
  std::ostringstream os;
  detail::print(os, *this, detail::kAdditive);
  return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const Expr& e) { return os << e.str(); }

// ---------------------------------------------------------------------------
// Traversal helpers.

inline void visit(const Expr& e, const std::function<void(const Expr&)>& fn) {
  fn(e);
  switch (e.op()) {
    case Op::Const:
    case Op::Var: return;
    case Op::Pow:
    case Op::Exp:
    case Op::Ln:
    case Op::Sin:
    case Op::Cos: visit(e.lhs(), fn); return;
    default:
      visit(e.lhs(), fn);
      visit(e.rhs(), fn);
      return;
  }
}

inline std::set<std::string> variables(const Expr& e) {
  std::set<std::string> out;
  visit(e, [&](const Expr& n) {
    if (n.is_var()) out.insert(n.name());
  });
  return out;
}

inline bool mentions(const Expr& e, const std::string& name) {
  bool found = false;
  visit(e, [&](const Expr& n) {
    if (n.is_var() && n.name() == name) found = true;
  });
  return found;
}

inline std::size_t node_count(const Expr& e) {
  std::size_t n = 0;
  visit(e, [&](const Expr&) { ++n; });
  return n;
}

// ---------------------------------------------------------------------------
// Evaluation.

class UnboundVariable : public std::runtime_error {
 public:
  explicit UnboundVariable(const std::string& name) : std::runtime_error("unbound variable '" + name + "'") {}
};

template <class Lookup>
double evaluate_with(const Expr& e, const Lookup& lookup) {
  switch (e.op()) {
    case Op::Const: return to_double(e.value());
    case Op::Var: return lookup(e.name());
    case Op::Add: return evaluate_with(e.lhs(), lookup) + evaluate_with(e.rhs(), lookup);
    case Op::Sub: return evaluate_with(e.lhs(), lookup) - evaluate_with(e.rhs(), lookup);
    case Op::Mul: return evaluate_with(e.lhs(), lookup) * evaluate_with(e.rhs(), lookup);
    case Op::Div: return evaluate_with(e.lhs(), lookup) / evaluate_with(e.rhs(), lookup);
    case Op::Pow: {
      double b = evaluate_with(e.lhs(), lookup);
      const Rational& a = e.exponent();
      if (is_integer(a)) return std::pow(b, to_double(a));
      // Odd roots of negative numbers are real.
      long q = denominator(a).convert_to<long>();
      if (b < 0 && q % 2 == 1) {
        long p = numerator(a).convert_to<long>();
        double mag = std::pow(-b, to_double(a));
        return (p % 2 == 0) ? mag : -mag;
      }
      return std::pow(b, to_double(a));
    }
    case Op::Exp: return std::exp(evaluate_with(e.arg(), lookup));
    case Op::Ln: return std::log(evaluate_with(e.arg(), lookup));
    case Op::Sin: return std::sin(evaluate_with(e.arg(), lookup));
    case Op::Cos: return std::cos(evaluate_with(e.arg(), lookup));
  }
  return 0.0;
}

using Valuation = std::map<std::string, double>;

inline double evaluate(const Expr& e, const Valuation& env) {
  return evaluate_with(e, [&](const std::string& name) {
    auto it = env.find(name);
    if (it == env.end()) throw UnboundVariable(name);
    return it->second;
  });
}

class NotExact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact evaluation; transcendental functions and irrational roots throw NotExact.
inline Rational evaluate_exact(const Expr& e, const std::map<std::string, Rational>& env) {
  switch (e.op()) {
    case Op::Const: return e.value();
    case Op::Var: {
      auto it = env.find(e.name());
      if (it == env.end()) throw UnboundVariable(e.name());
      return it->second;
    }
    case Op::Add: return evaluate_exact(e.lhs(), env) + evaluate_exact(e.rhs(), env);
    case Op::Sub: return evaluate_exact(e.lhs(), env) - evaluate_exact(e.rhs(), env);
    case Op::Mul: return evaluate_exact(e.lhs(), env) * evaluate_exact(e.rhs(), env);
    case Op::Div: {
      Rational d = evaluate_exact(e.rhs(), env);
      if (d == 0) throw std::domain_error("division by zero");
      return evaluate_exact(e.lhs(), env) / d;
    }
    case Op::Pow: {
      Rational b = evaluate_exact(e.lhs(), env);
      const Rational& a = e.exponent();
      auto q = denominator(a).convert_to<unsigned>();
      auto root = exact_root(b, q);
      if (!root) throw NotExact("irrational root in exact evaluation");
      return pow(*root, numerator(a).convert_to<long>());
    }
    default: {
      // Only the rational points of the elementary functions are exact.
      Rational a = evaluate_exact(e.arg(), env);
      if (e.op() == Op::Exp && a == 0) return 1;
      if (e.op() == Op::Sin && a == 0) return 0;
      if (e.op() == Op::Cos && a == 0) return 1;
      if (e.op() == Op::Ln && a == 1) return 0;
      throw NotExact(std::string("transcendental function ") + function_name(e.op()) + " in exact evaluation");
    }
  }
}

}  // namespace ehs
