#pragma once

// Exact rational numbers used for every symbolic coefficient.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ehs {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Integer numerator(const Rational& r) { return boost::multiprecision::numerator(r); }
inline Integer denominator(const Rational& r) { return boost::multiprecision::denominator(r); }

inline bool is_integer(const Rational& r) { return denominator(r) == 1; }

inline Rational make_rational(std::int64_t num, std::int64_t den = 1) {
  if (den == 0) throw std::domain_error("rational with zero denominator");
  return Rational(Integer(num), Integer(den));
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// Exact value of a finite double.
inline Rational from_double(double d) {
  if (!std::isfinite(d)) throw std::domain_error("non-finite double has no rational value");
  int exp = 0;
  double mant = std::frexp(d, &exp);
  // 53 bits of mantissa become an integer.
  auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  exp -= 53;
  Rational r{Integer(scaled)};
  if (exp > 0) {
    r *= Rational(Integer(1) << exp);
  } else if (exp < 0) {
    r /= Rational(Integer(1) << (-exp));
  }
  return r;
}

// Greatest double not above r, and least double not below r.
inline double round_down(const Rational& r) {
  double d = to_double(r);
  if (from_double(d) > r) d = std::nextafter(d, -std::numeric_limits<double>::infinity());
  return d;
}
inline double round_up(const Rational& r) {
  double d = to_double(r);
  if (from_double(d) < r) d = std::nextafter(d, std::numeric_limits<double>::infinity());
  return d;
}

inline std::string to_string(const Rational& r) {
  if (is_integer(r)) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

// Parses "12", "-3", "0.5", "1.25e-3", "7/4" into an exact rational.
inline std::optional<Rational> parse_rational(std::string_view text) {
  if (text.empty()) return std::nullopt;
  auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    auto num = parse_rational(text.substr(0, slash));
    auto den = parse_rational(text.substr(slash + 1));
    if (!num || !den || *den == 0) return std::nullopt;
    return *num / *den;
  }
  std::size_t i = 0;
  bool negative = false;
  if (text[i] == '+' || text[i] == '-') {
    negative = text[i] == '-';
    ++i;
  }
  Integer digits = 0;
  int frac_digits = 0;
  bool seen_digit = false;
  bool seen_point = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c >= '0' && c <= '9') {
      digits = digits * 10 + (c - '0');
      seen_digit = true;
      if (seen_point) ++frac_digits;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!seen_digit) return std::nullopt;
  long exponent = 0;
  if (i < text.size()) {
    if (text[i] != 'e' && text[i] != 'E') return std::nullopt;
    ++i;
    bool exp_negative = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
      exp_negative = text[i] == '-';
      ++i;
    }
    if (i >= text.size()) return std::nullopt;
    for (; i < text.size(); ++i) {
      if (text[i] < '0' || text[i] > '9') return std::nullopt;
      exponent = exponent * 10 + (text[i] - '0');
      if (exponent > 4000) return std::nullopt;
    }
    if (exp_negative) exponent = -exponent;
  }
  exponent -= frac_digits;
  Rational value{digits};
  Integer scale = boost::multiprecision::pow(Integer(10), static_cast<unsigned>(exponent < 0 ? -exponent : exponent));
  if (exponent < 0) {
    value /= Rational(scale);
  } else {
    value *= Rational(scale);
  }
  return negative ? Rational(-value) : value;
}

// r^k for integer k (k < 0 requires r != 0).
inline Rational pow(const Rational& r, long k) {
  if (k < 0) {
    if (r == 0) throw std::domain_error("zero to a negative power");
    return Rational(1) / pow(r, -k);
  }
  Rational result = 1;
  Rational base = r;
  auto e = static_cast<unsigned long>(k);
  while (e != 0) {
    if (e & 1U) result *= base;
    base *= base;
    e >>= 1U;
  }
  return result;
}

// Exact rational n-th root when one exists.
inline std::optional<Rational> exact_root(const Rational& r, unsigned n) {
  if (n == 0) return std::nullopt;
  if (n == 1) return r;
  bool negative = r < 0;
  if (negative && n % 2 == 0) return std::nullopt;
  auto root_int = [n](const Integer& v) -> std::optional<Integer> {
    if (v == 0) return Integer(0);
    double guess = std::pow(v.convert_to<double>(), 1.0 / n);
    auto g = Integer(static_cast<std::int64_t>(std::llround(guess)));
    for (Integer cand = (g > 2 ? g - 2 : Integer(0)); cand <= g + 2; ++cand) {
      if (boost::multiprecision::pow(cand, n) == v) return cand;
    }
    return std::nullopt;
  };
  Integer num = numerator(r);
  if (negative) num = -num;
  auto rn = root_int(num);
  auto rd = root_int(denominator(r));
  if (!rn || !rd) return std::nullopt;
  Rational result(*rn, *rd);
  return negative ? Rational(-result) : result;
}

inline Integer binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  Integer result = 1;
  for (unsigned i = 1; i <= k; ++i) {
    result *= (n - k + i);
    result /= i;
  }
  return result;
}

}  // namespace ehs
