#pragma once

// Recursive-descent parser for expressions and predicates.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' exponent)?          right-associative
//   primary := number | ident | func '(' expr ')' | 'e' '^' operand | '(' expr ')'
//
//   pred    := conj ('||' conj)*
//   conj    := neg ('&&' neg)*
//   neg     := '!' neg | 'true' | 'false' | '(' pred ')' | expr rel expr (rel expr)*
//
// A leading "p/q" of two integer literals in a term is read as one rational
// constant, which is how the printer writes non-integer constants.

#include "ehs/expr.hpp"
#include "ehs/predicate.hpp"

#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ehs {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : std::runtime_error(message + " at position " + std::to_string(position)),
        message_(message),
        position_(position) {}
  std::size_t position() const { return position_; }
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  std::size_t position_;
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse_expression_only() {
    Expr e = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected input '" + std::string(text_.substr(pos_, 1)) + "'");
    return e;
  }

  Predicate parse_predicate_only() {
    Predicate p = pred();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected input '" + std::string(text_.substr(pos_, 1)) + "'");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool starts_with(std::string_view s) {
    skip_space();
    return text_.substr(pos_, s.size()) == s;
  }

  bool accept(std::string_view s) {
    if (!starts_with(s)) return false;
    pos_ += s.size();
    return true;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  std::string identifier() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
    while (pos_ < text_.size() && text_[pos_] == '\'') ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  // Scans a decimal literal without sign; returns its text.
  std::optional<std::string_view> number_text() {
    skip_space();
    std::size_t start = pos_;
    std::size_t i = pos_;
    auto digit = [&](std::size_t k) { return k < text_.size() && std::isdigit(static_cast<unsigned char>(text_[k])); };
    while (digit(i)) ++i;
    if (i < text_.size() && text_[i] == '.') {
      ++i;
      while (digit(i)) ++i;
    }
    if (i == start || (i == start + 1 && text_[start] == '.')) return std::nullopt;
    if (i < text_.size() && (text_[i] == 'e' || text_[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < text_.size() && (text_[j] == '+' || text_[j] == '-')) ++j;
      if (digit(j)) {
        while (digit(j)) ++j;
        i = j;
      }
    }
    pos_ = i;
    return text_.substr(start, i - start);
  }

  Rational number() {
    std::size_t at = pos_;
    auto t = number_text();
    if (!t) fail("expected a number");
    auto r = parse_rational(*t);
    if (!r) throw ParseError("malformed number", at);
    return *r;
  }

  static bool is_integer_text(std::string_view t) {
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return !t.empty();
  }

  // ['-'] INT '/' INT not followed by '^'.
  std::optional<Expr> rational_literal() {
    std::size_t save = pos_;
    bool negative = false;
    if (peek() == '-') {
      negative = true;
      ++pos_;
    }
    auto num = number_text();
    if (num && is_integer_text(*num) && peek() == '/') {
      ++pos_;
      auto den = number_text();
      if (den && is_integer_text(*den) && peek() != '^') {
        Rational d = *parse_rational(*den);
        if (d != 0) {
          Rational v = *parse_rational(*num) / d;
          return Expr::constant(negative ? Rational(-v) : v);
        }
      }
    }
    pos_ = save;
    return std::nullopt;
  }

  Expr expr() {
    Expr lhs = term();
    for (;;) {
      char c = peek();
      if (c == '+') {
        ++pos_;
        lhs = Expr::binary(Op::Add, lhs, term());
      } else if (c == '-') {
        ++pos_;
        lhs = Expr::binary(Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  Expr term() {
    Expr lhs;
    if (auto lit = rational_literal()) {
      lhs = *lit;
    } else {
      lhs = unary();
    }
    for (;;) {
      char c = peek();
      if (c == '*') {
        ++pos_;
        lhs = Expr::binary(Op::Mul, lhs, unary());
      } else if (c == '/') {
        ++pos_;
        lhs = Expr::binary(Op::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  Expr unary() {
    if (peek() == '-') {
      ++pos_;
      Expr inner = unary();
      if (inner.is_const()) return Expr::constant(-inner.value());
      return Expr::binary(Op::Mul, Expr::constant(-1), inner);
    }
    return power();
  }

  // Operand after '^': a signed primary, itself possibly raised.
  Expr exponent_operand() {
    if (peek() == '-') {
      ++pos_;
      Expr inner = exponent_operand();
      if (inner.is_const()) return Expr::constant(-inner.value());
      return Expr::binary(Op::Mul, Expr::constant(-1), inner);
    }
    return power();
  }

  Expr power() {
    skip_space();
    // e^(...) is the exponential function.
    if (pos_ < text_.size() && text_[pos_] == 'e' && (pos_ + 1 >= text_.size() || !ident_char(text_[pos_ + 1]))) {
      std::size_t save = pos_;
      ++pos_;
      if (peek() == '^') {
        ++pos_;
        return Expr::function(Op::Exp, exponent_operand());
      }
      pos_ = save;
    }
    Expr base = primary();
    if (peek() != '^') return base;
    ++pos_;
    std::size_t exp_at = pos_;
    Expr ex = exponent_operand();
    Rational a;
    try {
      a = evaluate_exact(ex, {});
    } catch (const std::exception&) {
      throw ParseError("non-rational exponent", exp_at);
    }
    return Expr::power(base, a);
  }

  Expr primary() {
    char c = peek();
    if (c == '(') {
      ++pos_;
      Expr inner = expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expr::constant(number());
    if (ident_start(c)) {
      std::size_t at = pos_;
      std::string name = identifier();
      if (peek() == '(' && name.find('\'') == std::string::npos) {
        Op op;
        bool root = false;
        if (name == "exp") {
          op = Op::Exp;
        } else if (name == "ln") {
          op = Op::Ln;
        } else if (name == "sin") {
          op = Op::Sin;
        } else if (name == "cos") {
          op = Op::Cos;
        } else if (name == "sqrt") {
          op = Op::Pow;
          root = true;
        } else {
          throw ParseError("unknown function '" + name + "'", at);
        }
        ++pos_;
        Expr arg = expr();
        expect(')');
        if (root) return Expr::power(arg, make_rational(1, 2));
        return Expr::function(op, arg);
      }
      return Expr::variable(name);
    }
    if (c == '\0') fail("unexpected end of input");
    fail(std::string("unexpected character '") + c + "'");
  }

  // ---- predicates

  std::optional<Rel> relation() {
    skip_space();
    if (accept("<=")) return Rel::Le;
    if (accept(">=")) return Rel::Ge;
    if (accept("==")) return Rel::Eq;
    if (accept("!=")) return Rel::Ne;
    if (accept("<")) return Rel::Lt;
    if (accept(">")) return Rel::Gt;
    if (accept("=")) return Rel::Eq;
    return std::nullopt;
  }

  Predicate pred() {
    std::vector<Predicate> parts{conj()};
    while (accept("||")) parts.push_back(conj());
    return parts.size() == 1 ? parts.front() : Predicate::disjunction(std::move(parts));
  }

  Predicate conj() {
    std::vector<Predicate> parts{neg()};
    while (accept("&&")) parts.push_back(neg());
    return parts.size() == 1 ? parts.front() : Predicate::conjunction(std::move(parts));
  }

  bool keyword(std::string_view word) {
    skip_space();
    if (text_.substr(pos_, word.size()) != word) return false;
    std::size_t end = pos_ + word.size();
    if (end < text_.size() && ident_char(text_[end])) return false;
    pos_ = end;
    return true;
  }

  Predicate neg() {
    if (peek() == '!' && !starts_with("!=")) {
      ++pos_;
      return Predicate::negation(neg());
    }
    if (keyword("true")) return Predicate::truth();
    if (keyword("false")) return Predicate::falsity();
    if (peek() == '(') {
      std::size_t save = pos_;
      try {
        ++pos_;
        Predicate inner = pred();
        expect(')');
        // "(x + 1) <= 2" starts with a parenthesized expression instead.
        char next = peek();
        bool continues = next == '+' || next == '-' || next == '*' || next == '/' || next == '^' || next == '<' ||
                         next == '>' || next == '=' || starts_with("!=");
        if (!continues) return inner;
      } catch (const ParseError&) {
      }
      pos_ = save;
    }
    return comparison();
  }

  Predicate comparison() {
    Expr lhs = expr();
    std::size_t at = pos_;
    auto rel = relation();
    if (!rel) throw ParseError("expected a relation", at);
    std::vector<Predicate> parts;
    for (;;) {
      Expr rhs = expr();
      parts.push_back(Predicate::compare(lhs, *rel, rhs));
      lhs = rhs;
      std::size_t save = pos_;
      rel = relation();
      if (!rel) {
        pos_ = save;
        break;
      }
    }
    return parts.size() == 1 ? parts.front() : Predicate::conjunction(std::move(parts));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse(std::string_view text) { return detail::Parser(text).parse_expression_only(); }
inline Predicate parse_predicate(std::string_view text) { return detail::Parser(text).parse_predicate_only(); }

}  // namespace ehs
