#pragma once

// Expressions flattened to a tape over indexed variables, for fast repeated
// evaluation during integration.

#include "ehs/expr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehs {

// A singular subterm came within tolerance of its singularity.
class DomainExit : public std::runtime_error {
 public:
  DomainExit(const std::string& what, double time = 0.0) : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class NonFiniteState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kSingularityTolerance = 1e-9;

class Tape {
 public:
  Tape() = default;
  Tape(const Expr& e, const std::vector<std::string>& vars) {
    root_ = emit(e, vars);
    slots_ = code_.size();
  }

  double operator()(const double* x) const {
    thread_local std::vector<double> s;
    if (s.size() < slots_) s.resize(slots_);
    for (std::size_t i = 0; i < code_.size(); ++i) {
      const Ins& in = code_[i];
      double a = in.a >= 0 ? s[static_cast<std::size_t>(in.a)] : 0.0;
      double b = in.b >= 0 ? s[static_cast<std::size_t>(in.b)] : 0.0;
      double r = 0.0;
      switch (in.op) {
        case Op::Const: r = in.value; break;
        case Op::Var: r = x[in.index]; break;
        case Op::Add: r = a + b; break;
        case Op::Sub: r = a - b; break;
        case Op::Mul: r = a * b; break;
        case Op::Div:
          if (std::fabs(b) < kSingularityTolerance) throw DomainExit("denominator near zero in " + in.where);
          r = a / b;
          break;
        case Op::Pow: r = power(a, in); break;
        case Op::Exp: r = std::exp(a); break;
        case Op::Ln:
          if (a < kSingularityTolerance) throw DomainExit("logarithm argument near zero in " + in.where);
          r = std::log(a);
          break;
        case Op::Sin: r = std::sin(a); break;
        case Op::Cos: r = std::cos(a); break;
      }
      s[i] = r;
    }
    return s[root_];
  }

  double operator()(const std::vector<double>& x) const { return (*this)(x.data()); }

 private:
  struct Ins {
    Op op = Op::Const;
    int a = -1;
    int b = -1;
    std::size_t index = 0;
    double value = 0.0;
    long p = 1;
    long q = 1;
    std::string where;
  };

  static double power(double a, const Ins& in) {
    if (in.q == 1) {
      if (in.p < 0 && std::fabs(a) < kSingularityTolerance) throw DomainExit("negative power near zero in " + in.where);
      return std::pow(a, static_cast<double>(in.p));
    }
    if (in.q % 2 == 0) {
      if (a < -kSingularityTolerance) throw DomainExit("even root of a negative value in " + in.where);
      if (a < 0.0) a = 0.0;
    }
    if (in.p < 0 && std::fabs(a) < kSingularityTolerance) throw DomainExit("negative power near zero in " + in.where);
    double e = static_cast<double>(in.p) / static_cast<double>(in.q);
    if (a >= 0.0) return std::pow(a, e);
    // odd root of a negative base
    double m = std::pow(-a, e);
    return (in.p % 2 == 0) ? m : -m;
  }

  std::size_t emit(const Expr& e, const std::vector<std::string>& vars) {
    Ins in;
    in.op = e.op();
    switch (e.op()) {
      case Op::Const: in.value = to_double(e.value()); break;
      case Op::Var: {
        auto it = std::find(vars.begin(), vars.end(), e.name());
        if (it == vars.end()) throw UnboundVariable(e.name());
        in.index = static_cast<std::size_t>(it - vars.begin());
        break;
      }
      case Op::Pow:
        in.a = static_cast<int>(emit(e.lhs(), vars));
        in.p = numerator(e.exponent()).convert_to<long>();
        in.q = denominator(e.exponent()).convert_to<long>();
        in.where = e.str();
        break;
      case Op::Exp:
      case Op::Ln:
      case Op::Sin:
      case Op::Cos:
        in.a = static_cast<int>(emit(e.arg(), vars));
        if (e.op() == Op::Ln) in.where = e.str();
        break;
      default:
        in.a = static_cast<int>(emit(e.lhs(), vars));
        in.b = static_cast<int>(emit(e.rhs(), vars));
        if (e.op() == Op::Div) in.where = e.str();
        break;
    }
    code_.push_back(std::move(in));
    return code_.size() - 1;
  }

  std::vector<Ins> code_;
  std::size_t root_ = 0;
  std::size_t slots_ = 0;
};

// Vector field as tapes over the system's own variable order.
struct CompiledField {
  std::vector<std::string> vars;
  std::vector<Tape> rhs;

  CompiledField() = default;
  CompiledField(const std::vector<std::string>& v, const std::vector<Expr>& exprs) : vars(v) {
    for (const auto& e : exprs) rhs.emplace_back(e, vars);
  }

  void operator()(const std::vector<double>& x, std::vector<double>& dx) const {
    dx.resize(rhs.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) dx[i] = rhs[i](x);
  }
};

}  // namespace ehs
