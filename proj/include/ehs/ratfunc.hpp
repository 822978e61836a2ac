#pragma once

// Rational functions over the original variables extended by opaque tokens
// for elementary subterms: exp[a], ln[a], sin[a], cos[a] and root<q>[a],
// where a is the normalized argument. Used to decide symbolic identities.

#include "ehs/expr.hpp"
#include "ehs/poly.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace ehs {

// num / prod(f^k) with each factor f scaled to a leading coefficient of 1.
// Sums take the least common multiple of the factor lists, so shared
// denominators are not squared again on every addition.
struct RatFunc {
  using Factors = std::map<std::string, std::pair<Poly, unsigned>>;

  Poly num;
  Factors den;

  static RatFunc constant(const Rational& c) { return {Poly::constant(c), {}}; }
  static RatFunc of(Poly p) { return {std::move(p), {}}; }

  bool is_zero() const { return num.is_zero(); }
  bool is_polynomial() const { return den.empty(); }

  Poly den_poly() const {
    Poly out = Poly::constant(1);
    for (const auto& [key, f] : den) out = out * f.first.pow(f.second);
    return out;
  }

  // Divides by f^k; f must not be constant zero.
  void divide_by(const Poly& f, unsigned k) {
    if (k == 0) return;
    if (f.is_constant()) {
      num = num * (Rational(1) / pow(f.constant_term(), static_cast<long>(k)));
      return;
    }
    Rational lead = f.ordered_terms().front().second;
    Poly g = lead == 1 ? f : f * (Rational(1) / lead);
    if (lead != 1) num = num * (Rational(1) / pow(lead, static_cast<long>(k)));
    std::string key = g.key();
    // Exact cancellation of a numerator equal to a multiple of the factor.
    auto& slot = den[key];
    if (slot.second == 0) slot.first = g;
    slot.second += k;
    if (!num.is_zero()) {
      Rational c = num.ordered_terms().front().second;
      if (num == g * c) {
        num = Poly::constant(c);
        if (--slot.second == 0) den.erase(key);
      }
    }
  }

  std::string key() const {
    if (num.is_zero()) return "0";
    if (den.empty()) return num.key();
    std::string out = "(" + num.key() + ")/(";
    for (const auto& [key, f] : den) out += "[" + key + "]^" + std::to_string(f.second);
    return out + ")";
  }
};

namespace detail {

inline Poly cofactor(const RatFunc::Factors& have, const RatFunc::Factors& lcm) {
  Poly out = Poly::constant(1);
  for (const auto& [key, f] : lcm) {
    auto it = have.find(key);
    unsigned k = it == have.end() ? 0 : it->second.second;
    if (f.second > k) out = out * f.first.pow(f.second - k);
  }
  return out;
}

inline RatFunc::Factors lcm(const RatFunc::Factors& a, const RatFunc::Factors& b) {
  RatFunc::Factors out = a;
  for (const auto& [key, f] : b) {
    auto& slot = out[key];
    if (slot.second == 0) slot.first = f.first;
    slot.second = std::max(slot.second, f.second);
  }
  return out;
}

inline RatFunc combine(const RatFunc& a, const RatFunc& b, bool subtract) {
  if (a.den.empty() && b.den.empty()) return RatFunc::of(subtract ? a.num - b.num : a.num + b.num);
  RatFunc out;
  out.den = lcm(a.den, b.den);
  Poly l = a.num * cofactor(a.den, out.den);
  Poly r = b.num * cofactor(b.den, out.den);
  out.num = subtract ? l - r : l + r;
  if (out.num.is_zero()) return RatFunc::constant(0);
  return out;
}

}  // namespace detail

inline RatFunc operator+(const RatFunc& a, const RatFunc& b) { return detail::combine(a, b, false); }
inline RatFunc operator-(const RatFunc& a, const RatFunc& b) { return detail::combine(a, b, true); }
inline RatFunc operator*(const RatFunc& a, const RatFunc& b) {
  if (a.is_zero() || b.is_zero()) return RatFunc::constant(0);
  RatFunc out{a.num * b.num, a.den};
  for (const auto& [key, f] : b.den) {
    auto& slot = out.den[key];
    if (slot.second == 0) slot.first = f.first;
    slot.second += f.second;
  }
  return out;
}
inline RatFunc reciprocal(const RatFunc& a) {
  if (a.is_zero()) throw std::domain_error("reciprocal of zero rational function");
  RatFunc out = RatFunc::of(Poly::constant(1));
  for (const auto& [key, f] : a.den) out.num = out.num * f.first.pow(f.second);
  out.divide_by(a.num, 1);
  return out;
}
inline RatFunc operator/(const RatFunc& a, const RatFunc& b) { return a * reciprocal(b); }

inline RatFunc pow(const RatFunc& a, long k) {
  if (k < 0) return pow(reciprocal(a), -k);
  RatFunc out{a.num.pow(static_cast<unsigned>(k)), a.den};
  for (auto& [key, f] : out.den) f.second *= static_cast<unsigned>(k);
  if (k == 0) out.den.clear();
  return out;
}

inline bool equivalent(const RatFunc& a, const RatFunc& b) { return (a - b).is_zero(); }

inline RatFunc token(const std::string& name) { return RatFunc::of(Poly::variable(name)); }

// Root tokens t = g^(1/q) met during conversion, for reducing t^q to g.
struct RootToken {
  unsigned q = 2;
  RatFunc base;
};
using RootTable = std::map<std::string, RootToken>;

inline RatFunc to_ratfunc(const Expr& e, RootTable* roots = nullptr) {
  switch (e.op()) {
    case Op::Const: return RatFunc::constant(e.value());
    case Op::Var: return token(e.name());
    case Op::Add: return to_ratfunc(e.lhs(), roots) + to_ratfunc(e.rhs(), roots);
    case Op::Sub: return to_ratfunc(e.lhs(), roots) - to_ratfunc(e.rhs(), roots);
    case Op::Mul: return to_ratfunc(e.lhs(), roots) * to_ratfunc(e.rhs(), roots);
    case Op::Div: return to_ratfunc(e.lhs(), roots) / to_ratfunc(e.rhs(), roots);
    case Op::Pow: {
      RatFunc base = to_ratfunc(e.lhs(), roots);
      const Rational& a = e.exponent();
      long p = numerator(a).convert_to<long>();
      long q = denominator(a).convert_to<long>();
      if (q == 1) return pow(base, p);
      if (base.num.is_constant() && base.den.empty()) {
        Rational c = base.num.constant_term();
        if (auto r = exact_root(c, static_cast<unsigned>(q))) return RatFunc::constant(pow(*r, p));
      }
      // g^(p/q) = g^m * t^r with t = g^(1/q), p = m q + r, 0 <= r < q.
      long m = p >= 0 ? p / q : -((-p + q - 1) / q);
      long r = p - m * q;
      RatFunc out = pow(base, m);
      if (r != 0) {
        std::string name = "root" + std::to_string(q) + "[" + base.key() + "]";
        if (roots != nullptr) (*roots)[name] = RootToken{static_cast<unsigned>(q), base};
        out = out * pow(token(name), r);
      }
      return out;
    }
    case Op::Exp:
    case Op::Ln:
    case Op::Sin:
    case Op::Cos: {
      RatFunc arg = to_ratfunc(e.arg(), roots);
      if (arg.is_polynomial() && arg.num.is_constant()) {
        Expr c = apply_function(e.op(), constant(arg.num.constant_term()));
        if (c.is_const()) return RatFunc::constant(c.value());
      }
      return token(std::string(function_name(e.op())) + "[" + arg.key() + "]");
    }
  }
  return RatFunc::constant(0);
}

// A multiple of p in which every root token appears below its index q;
// zero exactly when p vanishes under t^q = g.
inline Poly reduce_roots(Poly p, const RootTable& roots) {
  for (int round = 0; round < 16; ++round) {
    bool changed = false;
    for (const auto& [name, root] : roots) {
      unsigned top = p.degree_in(name);
      if (top < root.q) continue;
      changed = true;
      long t = p.index_of(name);
      unsigned levels = top / root.q;
      Poly base_den = root.base.den_poly();
      Poly out;
      for (const auto& [m, c] : p.terms()) {
        unsigned ex = m[static_cast<std::size_t>(t)];
        unsigned j = ex / root.q;
        Poly::Monomial rest = m;
        rest[static_cast<std::size_t>(t)] = ex % root.q;
        Poly monomial = Poly::constant(c, p.vars());
        for (std::size_t i = 0; i < rest.size(); ++i) {
          if (rest[i] != 0) monomial = monomial * Poly::variable(p.vars()[i]).pow(rest[i]);
        }
        out += monomial * root.base.num.pow(j) * base_den.pow(levels - j);
      }
      p = out;
    }
    if (!changed) break;
  }
  return p;
}

}  // namespace ehs
