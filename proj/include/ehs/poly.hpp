#pragma once

// Canonical multivariate polynomials with exact rational coefficients.

#include "ehs/expr.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehs {

class NotPolynomial : public std::runtime_error {
 public:
  explicit NotPolynomial(const std::string& what) : std::runtime_error(what) {}
};

// Constants, variables, +, -, * and non-negative integer powers only.
inline bool is_polynomial(const Expr& e) {
  switch (e.op()) {
    case Op::Const:
    case Op::Var: return true;
    case Op::Add:
    case Op::Sub:
    case Op::Mul: return is_polynomial(e.lhs()) && is_polynomial(e.rhs());
    case Op::Pow: return is_integer(e.exponent()) && e.exponent() >= 0 && is_polynomial(e.lhs());
    default: return false;
  }
}

class Poly {
 public:
  using Monomial = std::vector<unsigned>;
  using Terms = std::map<Monomial, Rational>;

  Poly() = default;
  explicit Poly(std::vector<std::string> vars) : vars_(std::move(vars)) {}

  static Poly constant(const Rational& c, std::vector<std::string> vars = {}) {
    Poly p(std::move(vars));
    if (c != 0) p.terms_[Monomial(p.vars_.size(), 0)] = c;
    return p;
  }

  static Poly variable(const std::string& name, std::vector<std::string> vars = {}) {
    auto it = std::find(vars.begin(), vars.end(), name);
    if (it == vars.end()) {
      vars.push_back(name);
      it = vars.end() - 1;
    }
    Poly p(vars);
    Monomial m(vars.size(), 0);
    m[static_cast<std::size_t>(it - vars.begin())] = 1;
    p.terms_[m] = 1;
    return p;
  }

  const std::vector<std::string>& vars() const { return vars_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  bool is_constant() const {
    return terms_.empty() ||
           (terms_.size() == 1 && std::all_of(terms_.begin()->first.begin(), terms_.begin()->first.end(),
                                              [](unsigned k) { return k == 0; }));
  }

  Rational constant_term() const {
    auto it = terms_.find(Monomial(vars_.size(), 0));
    return it == terms_.end() ? Rational(0) : it->second;
  }

  long index_of(const std::string& v) const {
    auto it = std::find(vars_.begin(), vars_.end(), v);
    return it == vars_.end() ? -1 : static_cast<long>(it - vars_.begin());
  }

  // Variables with a nonzero exponent somewhere.
  std::set<std::string> support() const {
    std::set<std::string> out;
    for (const auto& [m, c] : terms_) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] != 0) out.insert(vars_[i]);
      }
    }
    return out;
  }

  unsigned total_degree() const {
    unsigned d = 0;
    for (const auto& [m, c] : terms_) {
      unsigned s = 0;
      for (unsigned k : m) s += k;
      d = std::max(d, s);
    }
    return d;
  }

  unsigned degree_in(const std::string& v) const {
    long i = index_of(v);
    if (i < 0) return 0;
    unsigned d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m[static_cast<std::size_t>(i)]);
    return d;
  }

  // Smallest exponent of v over all terms (0 for the zero polynomial).
  unsigned min_degree_in(const std::string& v) const {
    long i = index_of(v);
    if (i < 0 || terms_.empty()) return 0;
    unsigned d = ~0U;
    for (const auto& [m, c] : terms_) d = std::min(d, m[static_cast<std::size_t>(i)]);
    return d;
  }

  // Re-expressed over a variable list containing every variable of support().
  Poly aligned(const std::vector<std::string>& target) const {
    std::vector<long> where(vars_.size(), -1);
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      auto it = std::find(target.begin(), target.end(), vars_[i]);
      if (it != target.end()) where[i] = static_cast<long>(it - target.begin());
    }
    Poly out(target);
    for (const auto& [m, c] : terms_) {
      Monomial n(target.size(), 0);
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] == 0) continue;
        if (where[i] < 0) throw std::invalid_argument("Poly::aligned drops variable " + vars_[i]);
        n[static_cast<std::size_t>(where[i])] = m[i];
      }
      out.terms_[n] += c;
    }
    out.prune();
    return out;
  }

  static std::vector<std::string> union_vars(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a == b) return a;
    std::vector<std::string> out = a;
    for (const auto& v : b) {
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
  }

  Poly& operator+=(const Poly& o) { return accumulate(o, Rational(1)); }
  Poly& operator-=(const Poly& o) { return accumulate(o, Rational(-1)); }

  Poly& operator*=(const Rational& c) {
    if (c == 0) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, v] : terms_) v *= c;
    return *this;
  }

  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
  friend Poly operator-(Poly a) { return a *= Rational(-1); }
  friend Poly operator*(Poly a, const Rational& c) { return a *= c; }
  friend Poly operator*(const Rational& c, Poly a) { return a *= c; }

  friend Poly operator*(const Poly& a, const Poly& b) {
    auto vars = union_vars(a.vars_, b.vars_);
    Poly x = a.vars_ == vars ? a : a.aligned(vars);
    Poly y = b.vars_ == vars ? b : b.aligned(vars);
    Poly out(vars);
    for (const auto& [m1, c1] : x.terms_) {
      for (const auto& [m2, c2] : y.terms_) {
        Monomial m(vars.size());
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = m1[i] + m2[i];
        out.terms_[m] += c1 * c2;
      }
    }
    out.prune();
    return out;
  }
  Poly& operator*=(const Poly& o) { return *this = *this * o; }

  Poly pow(unsigned k) const {
    Poly result = constant(1, vars_);
    Poly base = *this;
    while (k != 0) {
      if (k & 1U) result = result * base;
      k >>= 1U;
      if (k != 0) base = base * base;
    }
    return result;
  }

  Poly derivative(const std::string& v) const {
    long i = index_of(v);
    Poly out(vars_);
    if (i < 0) return out;
    auto k = static_cast<std::size_t>(i);
    for (const auto& [m, c] : terms_) {
      if (m[k] == 0) continue;
      Monomial n = m;
      --n[k];
      out.terms_[n] += c * m[k];
    }
    out.prune();
    return out;
  }

  // Exact division of every term by v^k; requires k <= min_degree_in(v).
  Poly divide_by_power(const std::string& v, unsigned k) const {
    if (k == 0) return *this;
    long i = index_of(v);
    if (i < 0 || min_degree_in(v) < k) throw std::invalid_argument("Poly::divide_by_power: not divisible");
    Poly out(vars_);
    for (const auto& [m, c] : terms_) {
      Monomial n = m;
      n[static_cast<std::size_t>(i)] -= k;
      out.terms_[n] = c;
    }
    return out;
  }

  friend bool operator==(const Poly& a, const Poly& b) {
    if (a.vars_ == b.vars_) return a.terms_ == b.terms_;
    auto vars = union_vars(a.vars_, b.vars_);
    return a.aligned(vars).terms_ == b.aligned(vars).terms_;
  }
  friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }

  template <class Lookup>
  double evaluate_with(const Lookup& lookup) const {
    std::vector<double> values(vars_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) values[i] = lookup(vars_[i]);
    double sum = 0.0;
    for (const auto& [m, c] : terms_) {
      double t = to_double(c);
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] != 0) t *= std::pow(values[i], static_cast<double>(m[i]));
      }
      sum += t;
    }
    return sum;
  }

  double evaluate(const Valuation& env) const {
    return evaluate_with([&](const std::string& n) {
      auto it = env.find(n);
      if (it == env.end()) throw UnboundVariable(n);
      return it->second;
    });
  }

  Rational evaluate_exact(const std::map<std::string, Rational>& env) const {
    Rational sum = 0;
    for (const auto& [m, c] : terms_) {
      Rational t = c;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] == 0) continue;
        auto it = env.find(vars_[i]);
        if (it == env.end()) throw UnboundVariable(vars_[i]);
        t *= ehs::pow(it->second, static_cast<long>(m[i]));
      }
      sum += t;
    }
    return sum;
  }

  // Terms by descending total degree, then descending exponents in variable order.
  std::vector<std::pair<Monomial, Rational>> ordered_terms() const {
    std::vector<std::pair<Monomial, Rational>> out(terms_.begin(), terms_.end());
    auto degree = [](const Monomial& m) {
      unsigned s = 0;
      for (unsigned k : m) s += k;
      return s;
    };
    std::stable_sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
      unsigned da = degree(a.first);
      unsigned db = degree(b.first);
      if (da != db) return da > db;
      return a.first > b.first;
    });
    return out;
  }

  Expr monomial_expr(const Monomial& m) const {
    Expr out = constant_expr(1);
    bool first = true;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0) continue;
      Expr factor = m[i] == 1 ? Expr::variable(vars_[i]) : Expr::power(Expr::variable(vars_[i]), Rational(m[i]));
      out = first ? factor : Expr::binary(Op::Mul, out, factor);
      first = false;
    }
    return out;
  }

  Expr to_expr() const {
    auto terms = ordered_terms();
    if (terms.empty()) return constant_expr(0);
    Expr out;
    bool first = true;
    for (const auto& [m, c] : terms) {
      bool is_unit = std::all_of(m.begin(), m.end(), [](unsigned k) { return k == 0; });
      Rational mag = c < 0 ? Rational(-c) : c;
      Expr term;
      if (is_unit) {
        term = Expr::constant(first ? c : mag);
      } else {
        Expr mono = monomial_expr(m);
        Rational coeff = first ? c : mag;
        if (coeff == 1) {
          term = mono;
        } else if (coeff == -1) {
          term = Expr::binary(Op::Mul, Expr::constant(-1), mono);
        } else {
          term = Expr::binary(Op::Mul, Expr::constant(coeff), mono);
        }
      }
      if (first) {
        out = term;
        first = false;
      } else {
        out = Expr::binary(c < 0 ? Op::Sub : Op::Add, out, term);
      }
    }
    return out;
  }

  std::string str() const { return to_expr().str(); }

  // Independent of variable order; equal polynomials give equal keys.
  std::string key() const {
    std::set<std::string> s = support();
    return aligned(std::vector<std::string>(s.begin(), s.end())).str();
  }

 private:
  static Expr constant_expr(std::int64_t v) { return Expr::constant(Rational(v)); }

  Poly& accumulate(const Poly& o, const Rational& sign) {
    auto vars = union_vars(vars_, o.vars_);
    if (vars != vars_) *this = aligned(vars);
    const Poly& other = o.vars_ == vars ? o : o.aligned(vars);
    for (const auto& [m, c] : other.terms_) terms_[m] += sign * c;
    prune();
    return *this;
  }

  void prune() {
    for (auto it = terms_.begin(); it != terms_.end();) {
      it = it->second == 0 ? terms_.erase(it) : std::next(it);
    }
  }

  std::vector<std::string> vars_;
  Terms terms_;
};

inline std::ostream& operator<<(std::ostream& os, const Poly& p) { return os << p.str(); }

namespace detail {
inline Poly to_poly_rec(const Expr& e, const std::vector<std::string>& vars) {
  switch (e.op()) {
    case Op::Const: return Poly::constant(e.value(), vars);
    case Op::Var: return Poly::variable(e.name(), vars);
    case Op::Add: return to_poly_rec(e.lhs(), vars) + to_poly_rec(e.rhs(), vars);
    case Op::Sub: return to_poly_rec(e.lhs(), vars) - to_poly_rec(e.rhs(), vars);
    case Op::Mul: return to_poly_rec(e.lhs(), vars) * to_poly_rec(e.rhs(), vars);
    case Op::Pow:
      if (is_integer(e.exponent()) && e.exponent() >= 0) {
        return to_poly_rec(e.lhs(), vars).pow(numerator(e.exponent()).convert_to<unsigned>());
      }
      break;
    default: break;
  }
  throw NotPolynomial("not a polynomial: " + e.str());
}
}  // namespace detail

// Variables outside `vars` are appended in sorted order.
inline Poly to_canonical_poly(const Expr& e, std::vector<std::string> vars) {
  if (!is_polynomial(e)) throw NotPolynomial("not a polynomial: " + e.str());
  for (const auto& v : variables(e)) {
    if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
  }
  return detail::to_poly_rec(e, vars).aligned(vars);
}

inline Poly to_canonical_poly(const Expr& e) { return to_canonical_poly(e, {}); }

}  // namespace ehs
