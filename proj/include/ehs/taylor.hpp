#pragma once

// Truncated Taylor series arithmetic and Taylor enclosures of univariate
// replacement functions: gamma(t) in p(t) + R for every t in the domain.

#include "ehs/expr.hpp"
#include "ehs/interval.hpp"
#include "ehs/poly.hpp"
#include "ehs/predicate.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehs {

class NotUnivariate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Coefficient rings. Rational is exact and refuses irrational values.

namespace series_ops {

inline Rational lift(const Rational& r, const Rational*) { return r; }
inline Interval lift(const Rational& r, const Interval*) { return Interval::point(r); }

inline Rational f_exp(const Rational& a, const std::string& where) {
  if (a == 0) return 1;
  throw NotExact("exp at a non-zero rational in " + where);
}
inline Rational f_ln(const Rational& a, const std::string& where) {
  if (a <= 0) throw DomainViolation("logarithm of a non-positive value", where);
  if (a == 1) return 0;
  throw NotExact("ln at a rational other than 1 in " + where);
}
inline Rational f_sin(const Rational& a, const std::string& where) {
  if (a == 0) return 0;
  throw NotExact("sin at a non-zero rational in " + where);
}
inline Rational f_cos(const Rational& a, const std::string& where) {
  if (a == 0) return 1;
  throw NotExact("cos at a non-zero rational in " + where);
}
inline Rational f_pow(const Rational& a, const Rational& r, const std::string& where) {
  auto q = denominator(r).convert_to<unsigned>();
  if (q % 2 == 0 && a < 0) throw DomainViolation("even root of a negative value", where);
  auto root = exact_root(a, q);
  if (!root) throw NotExact("irrational root in " + where);
  return pow(*root, numerator(r).convert_to<long>());
}
inline bool may_be_zero(const Rational& a) { return a == 0; }

inline Interval f_exp(const Interval& a, const std::string&) { return exp(a); }
inline Interval f_ln(const Interval& a, const std::string& where) { return ln(a, where); }
inline Interval f_sin(const Interval& a, const std::string&) { return sin(a); }
inline Interval f_cos(const Interval& a, const std::string&) { return cos(a); }
inline Interval f_pow(const Interval& a, const Rational& r, const std::string& where) { return pow(a, r, where); }
inline bool may_be_zero(const Interval& a) { return a.lo <= 0.0 && a.hi >= 0.0; }

}  // namespace series_ops

template <class T>
struct Series {
  std::vector<T> c;  // c[k] is the k-th Taylor coefficient

  static T lift(const Rational& r) { return series_ops::lift(r, static_cast<const T*>(nullptr)); }

  static Series constant(const T& v, std::size_t order) {
    Series s;
    s.c.assign(order + 1, lift(0));
    s.c[0] = v;
    return s;
  }
  static Series identity(const T& at, std::size_t order) {
    Series s = constant(at, order);
    if (order >= 1) s.c[1] = lift(1);
    return s;
  }
  std::size_t order() const { return c.size() - 1; }
};

template <class T>
Series<T> operator+(const Series<T>& a, const Series<T>& b) {
  Series<T> r = a;
  for (std::size_t k = 0; k < r.c.size(); ++k) r.c[k] = a.c[k] + b.c[k];
  return r;
}

template <class T>
Series<T> operator-(const Series<T>& a, const Series<T>& b) {
  Series<T> r = a;
  for (std::size_t k = 0; k < r.c.size(); ++k) r.c[k] = a.c[k] - b.c[k];
  return r;
}

template <class T>
Series<T> operator*(const Series<T>& a, const Series<T>& b) {
  Series<T> r = Series<T>::constant(Series<T>::lift(0), a.order());
  for (std::size_t k = 0; k < r.c.size(); ++k) {
    T s = Series<T>::lift(0);
    for (std::size_t j = 0; j <= k; ++j) s = s + a.c[j] * b.c[k - j];
    r.c[k] = s;
  }
  return r;
}

template <class T>
Series<T> divide(const Series<T>& a, const Series<T>& b, const std::string& where) {
  if (series_ops::may_be_zero(b.c[0])) throw DomainViolation("division by a series vanishing at the point", where);
  Series<T> q = a;
  for (std::size_t k = 0; k < q.c.size(); ++k) {
    T s = a.c[k];
    for (std::size_t j = 1; j <= k; ++j) s = s - b.c[j] * q.c[k - j];
    q.c[k] = s / b.c[0];
  }
  return q;
}

template <class T>
Series<T> series_exp(const Series<T>& a, const std::string& where) {
  Series<T> e = a;
  e.c[0] = series_ops::f_exp(a.c[0], where);
  for (std::size_t k = 1; k < e.c.size(); ++k) {
    T s = Series<T>::lift(0);
    for (std::size_t j = 1; j <= k; ++j) s = s + Series<T>::lift(Rational(j)) * a.c[j] * e.c[k - j];
    e.c[k] = s / Series<T>::lift(Rational(k));
  }
  return e;
}

template <class T>
Series<T> series_ln(const Series<T>& a, const std::string& where) {
  Series<T> l = a;
  l.c[0] = series_ops::f_ln(a.c[0], where);
  for (std::size_t k = 1; k < l.c.size(); ++k) {
    T s = Series<T>::lift(0);
    for (std::size_t j = 1; j < k; ++j) s = s + Series<T>::lift(Rational(j)) * l.c[j] * a.c[k - j];
    l.c[k] = (a.c[k] - s / Series<T>::lift(Rational(k))) / a.c[0];
  }
  return l;
}

template <class T>
std::pair<Series<T>, Series<T>> series_sin_cos(const Series<T>& a, const std::string& where) {
  Series<T> s = a;
  Series<T> c = a;
  s.c[0] = series_ops::f_sin(a.c[0], where);
  c.c[0] = series_ops::f_cos(a.c[0], where);
  for (std::size_t k = 1; k < a.c.size(); ++k) {
    T ss = Series<T>::lift(0);
    T cc = Series<T>::lift(0);
    for (std::size_t j = 1; j <= k; ++j) {
      T ja = Series<T>::lift(Rational(j)) * a.c[j];
      ss = ss + ja * c.c[k - j];
      cc = cc + ja * s.c[k - j];
    }
    s.c[k] = ss / Series<T>::lift(Rational(k));
    c.c[k] = Series<T>::lift(0) - cc / Series<T>::lift(Rational(k));
  }
  return {s, c};
}

template <class T>
Series<T> series_pow(const Series<T>& a, const Rational& r, const std::string& where) {
  if (is_integer(r)) {
    long n = numerator(r).convert_to<long>();
    if (n < 0) return divide(Series<T>::constant(Series<T>::lift(1), a.order()), series_pow(a, Rational(-n), where), where);
    Series<T> result = Series<T>::constant(Series<T>::lift(1), a.order());
    Series<T> base = a;
    auto e = static_cast<unsigned long>(n);
    while (e != 0) {
      if (e & 1UL) result = result * base;
      e >>= 1UL;
      if (e != 0) base = base * base;
    }
    // The constant term of a^n is a0^n; the product form overestimates for intervals.
    result.c[0] = pow(a.c[0], n);
    return result;
  }
  if (series_ops::may_be_zero(a.c[0])) throw DomainViolation("fractional power at a zero of its base", where);
  Series<T> p = a;
  p.c[0] = series_ops::f_pow(a.c[0], r, where);
  for (std::size_t k = 1; k < p.c.size(); ++k) {
    T s = Series<T>::lift(0);
    for (std::size_t j = 1; j <= k; ++j) {
      Rational w = (r + 1) * Rational(j) - Rational(k);
      s = s + Series<T>::lift(w) * a.c[j] * p.c[k - j];
    }
    p.c[k] = s / (Series<T>::lift(Rational(k)) * a.c[0]);
  }
  return p;
}

// Taylor series of e in `variable` about `at`, through `order`.
template <class T>
Series<T> series_of(const Expr& e, const std::string& variable, const T& at, std::size_t order) {
  switch (e.op()) {
    case Op::Const: return Series<T>::constant(Series<T>::lift(e.value()), order);
    case Op::Var:
      if (e.name() != variable) throw NotUnivariate("unexpected variable " + e.name());
      return Series<T>::identity(at, order);
    case Op::Add: return series_of(e.lhs(), variable, at, order) + series_of(e.rhs(), variable, at, order);
    case Op::Sub: return series_of(e.lhs(), variable, at, order) - series_of(e.rhs(), variable, at, order);
    case Op::Mul:
      if (e.lhs() == e.rhs()) return series_pow(series_of(e.lhs(), variable, at, order), Rational(2), e.str());
      return series_of(e.lhs(), variable, at, order) * series_of(e.rhs(), variable, at, order);
    case Op::Div:
      return divide(series_of(e.lhs(), variable, at, order), series_of(e.rhs(), variable, at, order), e.str());
    case Op::Pow: return series_pow(series_of(e.lhs(), variable, at, order), e.exponent(), e.str());
    case Op::Exp: return series_exp(series_of(e.arg(), variable, at, order), e.str());
    case Op::Ln: return series_ln(series_of(e.arg(), variable, at, order), e.str());
    case Op::Sin: return series_sin_cos(series_of(e.arg(), variable, at, order), e.str()).first;
    case Op::Cos: return series_sin_cos(series_of(e.arg(), variable, at, order), e.str()).second;
  }
  throw std::logic_error("series_of: unknown node");
}

// ---------------------------------------------------------------------------

inline Rational floor_rational(const Rational& r) {
  Integer n = numerator(r);
  Integer d = denominator(r);
  Integer q = n / d;
  if (n < 0 && q * d != n) q -= 1;
  return Rational(q);
}

// A short decimal on the requested side of d.
inline Rational outward_decimal(double d, bool below, int digits = 16) {
  if (d == 0.0) return 0;
  Rational exact = from_double(d);
  int e = static_cast<int>(std::floor(std::log10(std::fabs(d))));
  // Tiny magnitudes go to a fixed absolute grid so that denominators stay short.
  int shift = std::min(digits - 1 - e, 24);
  Rational scale = pow(Rational(10), static_cast<long>(shift));
  Rational scaled = exact * scale;
  Rational f = floor_rational(scaled);
  if (!below && f != scaled) f += 1;
  return f / scale;
}

struct TaylorEnclosure {
  std::string variable;
  Rational center;
  Interval domain;
  unsigned degree = 0;
  std::vector<Rational> coefficients;  // in powers of (variable - center)
  Interval remainder{0.0, 0.0};
  bool exact_coefficients = true;

  // p expanded in the variable itself.
  Poly polynomial() const {
    Poly shift = Poly::variable(variable) - Poly::constant(center);
    Poly out;
    Poly power = Poly::constant(1);
    for (std::size_t k = 0; k < coefficients.size(); ++k) {
      if (coefficients[k] != 0) out += power * coefficients[k];
      if (k + 1 < coefficients.size()) power = power * shift;
    }
    return out;
  }

  double eval_poly(double t) const {
    double d = t - to_double(center);
    double s = 0.0;
    for (std::size_t k = coefficients.size(); k-- > 0;) s = s * d + to_double(coefficients[k]);
    return s;
  }
};

inline std::string univariate_variable(const Expr& gamma) {
  auto vars = variables(gamma);
  if (vars.size() > 1) throw NotUnivariate("not univariate: " + gamma.str());
  return vars.empty() ? std::string("x") : *vars.begin();
}

inline TaylorEnclosure taylor_enclose(const Expr& gamma, const Rational& center, const Interval& domain,
                                      unsigned degree) {
  if (!domain.bounded()) throw DomainViolation("Taylor enclosure over an unbounded domain", gamma.str());
  TaylorEnclosure t;
  t.variable = univariate_variable(gamma);
  t.center = center;
  t.domain = domain;
  t.degree = degree;
  Interval shift = domain - Interval::point(center);
  Interval error(0.0, 0.0);
  try {
    auto s = series_of<Rational>(gamma, t.variable, center, degree);
    t.coefficients = s.c;
  } catch (const NotExact&) {
    // Midpoints of interval coefficients, with their spread moved into the remainder.
    auto s = series_of<Interval>(gamma, t.variable, Interval::point(center), degree);
    t.exact_coefficients = false;
    t.coefficients.clear();
    for (std::size_t k = 0; k < s.c.size(); ++k) {
      Rational m = outward_decimal(s.c[k].mid(), true, 17);
      t.coefficients.push_back(m);
      Interval spread = s.c[k] - Interval::point(m);
      error = error + spread * pow(shift, static_cast<long>(k));
    }
  }
  // Lagrange form: the (d+1)-th coefficient somewhere in the domain.
  auto over = series_of<Interval>(gamma, t.variable, domain, degree + 1);
  t.remainder = over.c[degree + 1] * pow(shift, static_cast<long>(degree + 1)) + error;
  if (t.exact_coefficients && is_polynomial(gamma) && to_canonical_poly(gamma).total_degree() <= degree) {
    t.remainder = Interval(0.0, 0.0);
  } else if (t.exact_coefficients && std::all_of(over.c.begin() + 1, over.c.end(), [](const Interval& i) {
        return i.lo == 0.0 && i.hi == 0.0;
      })) {
    t.remainder = Interval(0.0, 0.0);
  }
  return t;
}

inline TaylorEnclosure taylor_enclose(const Expr& gamma, const Interval& domain, unsigned degree) {
  return taylor_enclose(gamma, from_double(domain.mid()), domain, degree);
}

// ---------------------------------------------------------------------------

// p(x) + lo <= v && v <= p(x) + hi
inline Predicate enclosure_to_predicate(const TaylorEnclosure& t, const std::string& x, const std::string& v) {
  TaylorEnclosure renamed = t;
  renamed.variable = x;
  Poly p = renamed.polynomial();
  Poly pv = Poly::variable(v);
  std::vector<std::string> order{x, v};
  Rational lo = outward_decimal(t.remainder.lo, true);
  Rational hi = outward_decimal(t.remainder.hi, false);
  auto lower = (p + Poly::constant(lo) - pv);
  auto upper = (pv - p - Poly::constant(hi));
  auto ordered = [&](const Poly& q) {
    std::vector<std::string> vars = order;
    for (const auto& s : q.support()) {
      if (std::find(vars.begin(), vars.end(), s) == vars.end()) vars.push_back(s);
    }
    return q.aligned(vars).to_expr();
  };
  return Predicate::conjunction({Predicate::atom(ordered(lower), Rel::Le), Predicate::atom(ordered(upper), Rel::Le)});
}

}  // namespace ehs
