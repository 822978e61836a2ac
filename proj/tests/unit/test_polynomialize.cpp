#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ehs;
using ehs::test::equal_up_to_renaming;
using ehs::test::ExprGen;
using ehs::test::odes_from_text;

namespace {

Polynomialization recast(const std::string& rhs) { return trans_eodes(odes_from_text({{"x", rhs}})); }

void expect_recast(const std::string& rhs, const std::vector<std::pair<std::string, std::string>>& expected) {
  Polynomialization p = recast(rhs);
  OdeSystem want = odes_from_text(expected);
  EXPECT_TRUE(p.system.is_polynomial()) << p.system.str();
  EXPECT_TRUE(equal_up_to_renaming(want, p.system, {"x"})) << "x' = " << rhs << " gave\n" << p.system.str();
  EXPECT_TRUE(simulation_condition_check(odes_from_text({{"x", rhs}}), p).passed());
}

}  // namespace

TEST(Recast, Reciprocal) { expect_recast("1/x", {{"x", "v"}, {"v", "-v^3"}}); }

TEST(Recast, SquareRoot) { expect_recast("sqrt(x)", {{"x", "v"}, {"v", "1/2"}}); }

TEST(Recast, Exponential) { expect_recast("exp(x)", {{"x", "v"}, {"v", "v^2"}}); }

TEST(Recast, Logarithm) { expect_recast("ln(x)", {{"x", "v"}, {"v", "u*v"}, {"u", "-u^2*v"}}); }

TEST(Recast, Sine) { expect_recast("sin(x)", {{"x", "v"}, {"v", "u*v"}, {"u", "-v^2"}}); }

TEST(Recast, Cosine) { expect_recast("cos(x)", {{"x", "v"}, {"v", "-u*v"}, {"u", "v^2"}}); }

TEST(Recast, LogOfShiftedSine) {
  expect_recast("ln(2 + sin(x))",
                {{"x", "w"}, {"v", "u*w"}, {"u", "-v*w"}, {"w", "z*u*w"}, {"z", "-z^2*u*w"}});
}

TEST(Recast, PolynomialInputIsUnchanged) {
  Polynomialization p = recast("x^3 - 2*x + 1/2");
  EXPECT_TRUE(p.ledger.empty());
  EXPECT_EQ(p.system.vars, std::vector<std::string>{"x"});
  EXPECT_EQ(to_canonical_poly(p.system.rhs[0]), to_canonical_poly(parse("x^3 - 2*x + 1/2")));
}

TEST(Recast, DivisionByConstantNeedsNoFreshVariable) {
  Polynomialization p = recast("x/4 - 3/(1+1)");
  EXPECT_TRUE(p.ledger.empty());
}

TEST(Recast, SharedSubtermsAreInternedOnce) {
  auto odes = odes_from_text({{"x", "sin(x) + sin(x)^2"}, {"y", "cos(x)*sin(x)"}});
  Polynomialization p = trans_eodes(odes);
  EXPECT_EQ(p.ledger.size(), 2u);
  EXPECT_TRUE(simulation_condition_check(odes, p).passed());
}

TEST(Recast, FreshNamesAvoidOriginals) {
  auto odes = odes_from_text({{"v1", "exp(v1)"}, {"v2", "sin(v1)"}});
  Polynomialization p = trans_eodes(odes);
  std::set<std::string> names(p.system.vars.begin(), p.system.vars.end());
  EXPECT_EQ(names.size(), p.system.vars.size());
  EXPECT_TRUE(simulation_condition_check(odes, p).passed());
}

// vt(e) evaluated at Theta(x) gives back e(x).
TEST(Vt, SoundnessProperty) {
  ExprGen gen(21, {"x", "y"});
  int compared = 0;
  for (int i = 0; i < 1000; ++i) {
    Expr e = gen.any(4);
    ReplacementLedger ledger({"x", "y"});
    Expr r = vt(e, ledger);
    ASSERT_TRUE(is_polynomial(r)) << r.str();
    SimulationMap theta = simulation_map(ledger);
    Valuation x = gen.point(-1.5, 1.5);
    double want = evaluate(e, x);
    if (!std::isfinite(want) || std::fabs(want) > 1e8) continue;
    double got = evaluate(r, theta.apply_named(x));
    ASSERT_NEAR(got, want, 1e-9 * std::max(1.0, std::fabs(want))) << e.str() << " -> " << r.str();
    ++compared;
  }
  EXPECT_GT(compared, 900);
}

TEST(Vt, PredicatesAreMappedAtomwise) {
  ReplacementLedger ledger({"x"});
  Predicate p = vt(parse_predicate("sin(x) <= 1/2 && exp(x) > 0"), ledger);
  EXPECT_EQ(ledger.size(), 2u);
  for (const auto& v : variables(p)) EXPECT_TRUE(v == "x" || ledger.find_name(v) != nullptr);
}

// Closed systems are polynomial, never exceed the ledger bound and satisfy
// the simulation identity exactly.
TEST(CloseLedger, FuzzedSystemsProperty) {
  ExprGen gen(99, {"x", "y"});
  for (int i = 0; i < 200; ++i) {
    auto odes = make_odes({{"x", gen.any(3)}, {"y", gen.any(3)}});
    Polynomialization p = trans_eodes(odes);
    ASSERT_TRUE(p.system.is_polynomial()) << odes.str();
    ASSERT_LE(p.ledger.size(), 3 * distinct_nonpolynomial_subterms(odes.rhs)) << odes.str();
    auto report = simulation_condition_check(odes, p);
    ASSERT_TRUE(report.passed()) << odes.str() << report.str();
  }
}

TEST(CloseLedger, MutatedFieldFailsTheCheck) {
  auto odes = odes_from_text({{"x", "exp(-x) + y - 1"}, {"y", "-sin(x)^2"}});
  Polynomialization p = trans_eodes(odes);
  ASSERT_TRUE(simulation_condition_check(odes, p).passed());
  Polynomialization bad = p;
  bad.system.rhs.back() = add(bad.system.rhs.back(), constant(Rational(1, 1000)));
  EXPECT_FALSE(simulation_condition_check(odes, bad).passed());
}

TEST(DomainConditions, OneAtomPerPartialEntry) {
  auto check = [](const std::string& rhs, Rel rel) {
    Polynomialization p = recast(rhs);
    auto conds = domain_conditions(p.ledger[0]);
    ASSERT_FALSE(conds.empty()) << rhs;
    EXPECT_EQ(conds[0].atom.rel, rel) << rhs;
    EXPECT_EQ(conds[0].atom.lhs, parse("x")) << rhs;
  };
  check("1/x", Rel::Ne);
  check("ln(x)", Rel::Gt);
  check("sqrt(x)", Rel::Ge);
  EXPECT_TRUE(domain_conditions(recast("sin(x)").ledger[0]).empty());
  EXPECT_TRUE(domain_conditions(recast("x^(1/3)").ledger[0]).empty());
}

TEST(DomainConditions, CarriedIntoTheClosedSystem) {
  Polynomialization p = recast("ln(x)");
  EXPECT_EQ(p.system.open_domain.size(), 2u);
}

TEST(LieDerivative, MatchesChainRule) {
  auto odes = odes_from_text({{"x", "y"}, {"y", "-x"}});
  Expr d = lie_derivative(parse("x^2 + y^2"), odes);
  EXPECT_TRUE(to_canonical_poly(d, {"x", "y"}).is_zero());
}
