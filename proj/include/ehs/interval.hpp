#pragma once

// Outward-rounded interval arithmetic on doubles and interval evaluation of
// expressions over boxes.

#include "ehs/expr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ehs {

class DomainViolation : public std::runtime_error {
 public:
  DomainViolation(const std::string& what, std::string subterm)
      : std::runtime_error(what + " in " + subterm), subterm_(std::move(subterm)) {}
  const std::string& subterm() const { return subterm_; }

 private:
  std::string subterm_;
};

struct Interval {
  static constexpr double inf = std::numeric_limits<double>::infinity();

  double lo = -inf;
  double hi = inf;
  bool lo_open = false;  // endpoint excluded
  bool hi_open = false;

  Interval() = default;
  Interval(double l, double h, bool lo_excl = false, bool hi_excl = false)
      : lo(l), hi(h), lo_open(lo_excl), hi_open(hi_excl) {
    if (std::isnan(l) || std::isnan(h) || l > h) throw std::invalid_argument("malformed interval");
  }
  explicit Interval(double point) : Interval(point, point) {}

  static Interval entire() { return {}; }
  static Interval point(const Rational& r) { return {round_down(r), round_up(r)}; }
  static Interval hull(const Rational& a, const Rational& b) {
    return {round_down(a < b ? a : b), round_up(a < b ? b : a)};
  }

  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
  bool is_point() const { return lo == hi; }
  double width() const { return hi - lo; }
  double mid() const {
    if (!bounded()) return std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
    return lo + 0.5 * (hi - lo);
  }
  double magnitude() const { return std::max(std::fabs(lo), std::fabs(hi)); }

  bool contains(double v) const {
    if (lo_open ? v <= lo : v < lo) return false;
    if (hi_open ? v >= hi : v > hi) return false;
    return true;
  }
  bool contains_zero() const { return contains(0.0); }
  bool subset_of(const Interval& o) const { return lo >= o.lo && hi <= o.hi; }

  std::string str() const {
    std::ostringstream os;
    os.precision(17);
    os << (lo_open ? '(' : '[') << lo << ", " << hi << (hi_open ? ')' : ']');
    return os.str();
  }
};

inline bool operator==(const Interval& a, const Interval& b) {
  return a.lo == b.lo && a.hi == b.hi && a.lo_open == b.lo_open && a.hi_open == b.hi_open;
}

namespace detail {
inline double down(double v, int ulps = 1) {
  if (!std::isfinite(v)) return v;
  for (int i = 0; i < ulps; ++i) v = std::nextafter(v, -Interval::inf);
  return v;
}
inline double up(double v, int ulps = 1) {
  if (!std::isfinite(v)) return v;
  for (int i = 0; i < ulps; ++i) v = std::nextafter(v, Interval::inf);
  return v;
}
// Products where 0 * inf counts as 0.
inline double times(double a, double b) {
  if (a == 0.0 || b == 0.0) return 0.0;
  return a * b;
}
inline Interval widen(double lo, double hi, int ulps = 1) { return {down(lo, ulps), up(hi, ulps)}; }

// Rigorous bracket of pi.
constexpr double kPiLo = 3.141592653589793;
inline double pi_hi() { return std::nextafter(kPiLo, 4.0); }
}  // namespace detail

inline Interval operator+(const Interval& a, const Interval& b) {
  return detail::widen(a.lo + b.lo, a.hi + b.hi);
}
inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo, a.hi_open, a.lo_open}; }
inline Interval operator-(const Interval& a, const Interval& b) { return detail::widen(a.lo - b.hi, a.hi - b.lo); }

inline Interval operator*(const Interval& a, const Interval& b) {
  double c[4] = {detail::times(a.lo, b.lo), detail::times(a.lo, b.hi), detail::times(a.hi, b.lo),
                 detail::times(a.hi, b.hi)};
  return detail::widen(*std::min_element(c, c + 4), *std::max_element(c, c + 4));
}

inline Interval reciprocal(const Interval& a) {
  if (a.lo <= 0.0 && a.hi >= 0.0) return Interval::entire();
  return detail::widen(1.0 / a.hi, 1.0 / a.lo);
}

inline Interval operator/(const Interval& a, const Interval& b) { return a * reciprocal(b); }

inline Interval hull(const Interval& a, const Interval& b) { return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)}; }

// Integer power, tight for even exponents.
inline Interval pow(const Interval& a, long k) {
  if (k == 0) return Interval(1.0);
  if (k < 0) return reciprocal(pow(a, -k));
  auto p = [k](double v) { return std::pow(v, static_cast<double>(k)); };
  if (k % 2 == 1) return detail::widen(p(a.lo), p(a.hi), 2);
  if (a.lo >= 0) return detail::widen(p(a.lo), p(a.hi), 2);
  if (a.hi <= 0) return detail::widen(p(a.hi), p(a.lo), 2);
  return {0.0, detail::up(std::max(p(a.lo), p(a.hi)), 2)};
}

inline Interval exp(const Interval& a) {
  double lo = a.lo == -Interval::inf ? 0.0 : detail::down(std::exp(a.lo), 2);
  double hi = detail::up(std::exp(a.hi), 2);
  return {std::max(lo, 0.0), hi, a.lo == -Interval::inf || lo <= 0.0, a.hi == Interval::inf};
}

inline Interval ln(const Interval& a, const std::string& where = "ln") {
  if (a.lo <= 0.0) throw DomainViolation("logarithm of a non-positive interval", where);
  return detail::widen(std::log(a.lo), std::log(a.hi), 2);
}

namespace detail {
// Whether some angle (offset + 2 k) pi, offset in {1/2, -1/2}, may lie in a.
inline bool may_contain_peak(const Interval& a, double offset) {
  double pl = kPiLo;
  double ph = pi_hi();
  double kmin = std::floor((a.lo / ph - offset) / 2.0) - 1.0;
  double kmax = std::ceil((a.hi / pl - offset) / 2.0) + 1.0;
  for (double k = kmin; k <= kmax; k += 1.0) {
    double f = offset + 2.0 * k;
    double e1 = f * pl;
    double e2 = f * ph;
    double lo = down(std::min(e1, e2), 2);
    double hi = up(std::max(e1, e2), 2);
    if (hi >= a.lo && lo <= a.hi) return true;
  }
  return false;
}
}  // namespace detail

inline Interval sin(const Interval& a) {
  if (!a.bounded() || a.width() >= 2.0 * detail::pi_hi()) return {-1.0, 1.0};
  double s1 = std::sin(a.lo);
  double s2 = std::sin(a.hi);
  double lo = detail::down(std::min(s1, s2), 2);
  double hi = detail::up(std::max(s1, s2), 2);
  if (detail::may_contain_peak(a, 0.5)) hi = 1.0;
  if (detail::may_contain_peak(a, -0.5)) lo = -1.0;
  return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

inline Interval cos(const Interval& a) {
  if (!a.bounded() || a.width() >= 2.0 * detail::pi_hi()) return {-1.0, 1.0};
  double c1 = std::cos(a.lo);
  double c2 = std::cos(a.hi);
  double lo = detail::down(std::min(c1, c2), 2);
  double hi = detail::up(std::max(c1, c2), 2);
  // cos peaks at 2k pi and troughs at (2k+1) pi.
  if (detail::may_contain_peak(a, 0.0)) hi = 1.0;
  if (detail::may_contain_peak(a, 1.0)) lo = -1.0;
  return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

// a^(p/q); even q needs a >= 0, negative exponents need 0 outside a.
inline Interval pow(const Interval& a, const Rational& r, const std::string& where = "pow") {
  long p = numerator(r).convert_to<long>();
  long q = denominator(r).convert_to<long>();
  if (q == 1) return pow(a, p);
  Interval base = a;
  if (q % 2 == 0) {
    if (a.lo < 0.0) throw DomainViolation("even root of an interval with negative part", where);
  }
  auto root = [q](double v) {
    if (q == 2) return std::sqrt(v);
    if (v < 0) return -std::pow(-v, 1.0 / static_cast<double>(q));
    return std::pow(v, 1.0 / static_cast<double>(q));
  };
  // 1/q is itself rounded for q > 2.
  Interval t = detail::widen(root(base.lo), root(base.hi), q == 2 ? 1 : 8);
  if (q % 2 == 0) t.lo = std::max(t.lo, 0.0);
  return pow(t, p);
}

using Box = std::map<std::string, Interval>;

inline Interval interval_eval(const Expr& e, const Box& box) {
  switch (e.op()) {
    case Op::Const: return Interval::point(e.value());
    case Op::Var: {
      auto it = box.find(e.name());
      return it == box.end() ? Interval::entire() : it->second;
    }
    case Op::Add: return interval_eval(e.lhs(), box) + interval_eval(e.rhs(), box);
    case Op::Sub: return interval_eval(e.lhs(), box) - interval_eval(e.rhs(), box);
    case Op::Mul: {
      // x * x is a square.
      if (e.lhs() == e.rhs()) return pow(interval_eval(e.lhs(), box), 2L);
      return interval_eval(e.lhs(), box) * interval_eval(e.rhs(), box);
    }
    case Op::Div: return interval_eval(e.lhs(), box) / interval_eval(e.rhs(), box);
    case Op::Pow: return pow(interval_eval(e.lhs(), box), e.exponent(), e.str());
    case Op::Exp: return exp(interval_eval(e.arg(), box));
    case Op::Ln: return ln(interval_eval(e.arg(), box), e.str());
    case Op::Sin: return sin(interval_eval(e.arg(), box));
    case Op::Cos: return cos(interval_eval(e.arg(), box));
  }
  return Interval::entire();
}

}  // namespace ehs
