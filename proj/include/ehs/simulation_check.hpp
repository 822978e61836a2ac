#pragma once

// Symbolic check of f_y(theta(x)) = J_theta(x) f_x(x), component by component.

#include "ehs/diff.hpp"
#include "ehs/polynomialize.hpp"
#include "ehs/ratfunc.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ehs {

enum class CheckStatus { Pass, Fail, UncomparableResidual };

inline const char* status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::UncomparableResidual: return "uncomparable";
  }
  return "?";
}

struct ComponentCheck {
  std::string variable;
  CheckStatus status = CheckStatus::Pass;
  std::string residual;  // empty on pass
};

struct SimulationCheckReport {
  std::vector<ComponentCheck> components;

  bool passed() const {
    return std::all_of(components.begin(), components.end(),
                       [](const ComponentCheck& c) { return c.status == CheckStatus::Pass; });
  }

  std::string str() const {
    std::ostringstream os;
    for (const auto& c : components) {
      os << c.variable << ": " << status_name(c.status);
      if (!c.residual.empty()) os << " residual " << c.residual;
      os << "\n";
    }
    return os.str();
  }
};

namespace detail {

// Distinguishes a canonicalization gap from a genuine mismatch by sampling.
inline bool numerically_equal(const Expr& lhs, const Expr& rhs, const std::vector<std::string>& vars) {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  int used = 0;
  for (int attempt = 0; attempt < 400 && used < 20; ++attempt) {
    Valuation env;
    for (const auto& v : vars) env[v] = dist(rng);
    double a = 0;
    double b = 0;
    try {
      a = evaluate(lhs, env);
      b = evaluate(rhs, env);
    } catch (const std::exception&) {
      continue;
    }
    if (!std::isfinite(a) || !std::isfinite(b)) continue;
    ++used;
    if (std::fabs(a - b) > 1e-8 * (1.0 + std::fabs(a))) return false;
  }
  return used > 0;
}

// Simplifies bottom-up; a polynomial subtree that cancels to a constant is
// replaced by that constant so that sin(x - x) folds like sin(0).
inline Expr fold_constants(const Expr& e) {
  Expr s = e;
  switch (e.op()) {
    case Op::Const:
    case Op::Var: return e;
    case Op::Pow: s = pow(fold_constants(e.lhs()), e.exponent()); break;
    case Op::Exp:
    case Op::Ln:
    case Op::Sin:
    case Op::Cos: s = apply_function(e.op(), fold_constants(e.arg())); break;
    default: s = apply_binary(e.op(), fold_constants(e.lhs()), fold_constants(e.rhs())); break;
  }
  if (!s.is_const() && is_polynomial(s)) {
    Poly p = to_canonical_poly(s);
    if (p.is_constant()) return constant(p.constant_term());
  }
  return s;
}

}  // namespace detail

inline SimulationCheckReport simulation_condition_check(const OdeSystem& original_in, const OdeSystem& abstracted,
                                                        const SimulationMap& theta_in) {
  // Both sides go through the same constant folding.
  OdeSystem original = original_in;
  for (auto& e : original.rhs) e = detail::fold_constants(e);
  SimulationMap theta = theta_in;
  for (auto& e : theta.components) e = detail::fold_constants(e);
  SimulationCheckReport report;
  auto targets = theta.target_variables();
  if (targets.size() != theta.components.size()) throw std::invalid_argument("simulation map has wrong arity");

  RootTable roots;
  std::map<std::string, RatFunc> theta_rf;
  std::map<std::string, Expr> theta_expr;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    theta_rf[targets[j]] = to_ratfunc(theta.components[j], &roots);
    theta_expr[targets[j]] = theta.components[j];
  }
  std::vector<RatFunc> fx;
  for (const auto& e : original.rhs) fx.push_back(to_ratfunc(e, &roots));

  for (std::size_t i = 0; i < targets.size(); ++i) {
    ComponentCheck c;
    c.variable = targets[i];
    long yi = abstracted.index_of(targets[i]);
    if (yi < 0) {
      c.status = CheckStatus::Fail;
      c.residual = "no equation for " + targets[i];
      report.components.push_back(c);
      continue;
    }
    const Expr& fy = abstracted.rhs[static_cast<std::size_t>(yi)];

    // Left side: f_y with theta substituted.
    RatFunc lhs = RatFunc::constant(0);
    if (is_polynomial(fy)) {
      Poly p = to_canonical_poly(fy);
      for (const auto& [m, coeff] : p.terms()) {
        RatFunc t = RatFunc::constant(coeff);
        for (std::size_t k = 0; k < m.size(); ++k) {
          if (m[k] == 0) continue;
          auto it = theta_rf.find(p.vars()[k]);
          RatFunc base = it == theta_rf.end() ? token(p.vars()[k]) : it->second;
          t = t * pow(base, static_cast<long>(m[k]));
        }
        lhs = lhs + t;
      }
    } else {
      lhs = to_ratfunc(substitute(fy, theta_expr), &roots);
    }

    // Right side: J_theta f_x.
    RatFunc rhs = RatFunc::constant(0);
    Expr rhs_expr = constant(0);
    for (std::size_t k = 0; k < original.vars.size(); ++k) {
      Expr d = differentiate(theta.components[i], original.vars[k]);
      if (d.is_const(0)) continue;
      rhs = rhs + to_ratfunc(d, &roots) * fx[k];
      rhs_expr = add(rhs_expr, mul(d, original.rhs[k]));
    }

    Poly residual = reduce_roots((lhs - rhs).num, roots);
    if (!residual.is_zero()) {
      Expr lhs_expr = substitute(fy, theta_expr);
      c.status = detail::numerically_equal(lhs_expr, rhs_expr, original.vars) ? CheckStatus::UncomparableResidual
                                                                             : CheckStatus::Fail;
      c.residual = residual.str();
    }
    report.components.push_back(c);
  }
  return report;
}

inline SimulationCheckReport simulation_condition_check(const OdeSystem& original, const Polynomialization& p) {
  return simulation_condition_check(original, p.system, p.theta);
}

}  // namespace ehs
