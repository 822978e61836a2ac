#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ehs;
using ehs::test::abstract_fixture;
using ehs::test::equal_up_to_renaming;
using ehs::test::kFixtures;
using ehs::test::entry_matching;
using ehs::test::load_model;
using ehs::test::odes_from_text;

namespace {

constexpr double kTol = 1e-9;

Valuation random_in(const Box& box, const std::vector<std::string>& vars, std::mt19937_64& rng) {
  Valuation env;
  for (const auto& v : vars) {
    Interval i = box.count(v) != 0 ? box.at(v) : Interval(-3, 3);
    double lo = std::isfinite(i.lo) ? i.lo : -3;
    double hi = std::isfinite(i.hi) ? i.hi : 3;
    env[v] = std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  return env;
}

bool safe_holds(const Predicate& p, const Valuation& env, double tol) {
  try {
    return evaluate(p, env, tol);
  } catch (const std::exception&) {
    return false;
  }
}

// Whether the abstract reset admits the jump from pre to post.
bool reset_admits(const Transition& t, const std::vector<std::string>& vars, const Valuation& pre,
                  const Valuation& post) {
  Valuation both = pre;
  for (const auto& v : vars) both[primed(v)] = post.at(v);
  for (const auto& v : vars) {
    if (t.reset.havocs(v)) continue;
    double want = post.at(v);
    double got = pre.at(v);
    if (const Expr* e = t.reset.value_of(v)) got = evaluate(*e, pre);
    if (std::fabs(got - want) > 1e-7 * (1 + std::fabs(want))) return false;
  }
  return evaluate(t.reset.relation, both, 1e-7);
}

}  // namespace

TEST(Ex1, FieldAndLedger) {
  AbstractionResult r = abstract_fixture("ex1.model");
  ASSERT_EQ(r.system.vars.size(), 5u);
  ASSERT_EQ(r.ledger.size(), 3u);
  long s = entry_matching(r.ledger, "sin(x)");
  long e = entry_matching(r.ledger, "exp(-x)");
  long c = entry_matching(r.ledger, "cos(x)");
  ASSERT_GE(s, 0);
  ASSERT_GE(e, 0);
  ASSERT_GE(c, 0);
  OdeSystem want = odes_from_text({{"x", "v2 + y - 1"},
                                   {"y", "-v1^2"},
                                   {"v1", "v3*(v2 + y - 1)"},
                                   {"v2", "-v2*(v2 + y - 1)"},
                                   {"v3", "-v1*(v2 + y - 1)"}});
  EXPECT_TRUE(equal_up_to_renaming(want, r.only_mode().field, {"x", "y"})) << r.only_mode().field.str();
  EXPECT_TRUE(all_modes_pass(check_modes(r)));
}

TEST(Ex1, InitKeptAndDomainBanded) {
  AbstractionResult r = abstract_fixture("ex1.model");
  const Mode& m = r.only_mode();
  // W4 at init: no constraint on the fresh variables.
  for (const auto& v : variables(m.init)) EXPECT_TRUE(v == "x" || v == "y") << v;
  // W2 at the domain mentions every fresh variable.
  auto dv = variables(m.domain);
  for (const auto& name : r.ledger.names()) EXPECT_EQ(dv.count(name), 1u) << name;
  // The init is coarser than the domain, which is flagged.
  EXPECT_FALSE(r.warnings.empty());
  bool saw_w2 = false;
  for (const auto& a : r.audit) saw_w2 = saw_w2 || (a.site == "q.domain" && a.strategy.kind == StrategyKind::W2);
  EXPECT_TRUE(saw_w2);
}

TEST(BouncingBall, Structure) {
  AbstractionResult r = abstract_fixture("bouncingball.model");
  ASSERT_EQ(r.system.transitions.size(), 1u);
  EXPECT_GE(entry_matching(r.ledger, "sin(x)"), 0);
  EXPECT_GE(entry_matching(r.ledger, "cos(x)"), 0);
  EXPECT_GE(entry_matching(r.ledger, "1/(1 + cos(x)^2)"), 0);
  for (const auto& n : r.ledger.names()) EXPECT_EQ(n[0], 'u');
  const Transition& t = r.system.transitions[0];
  visit_atoms(t.guard, [](const Atom& a) { EXPECT_TRUE(is_polynomial(a.lhs)); });
  for (const auto& a : t.reset.assignments) EXPECT_TRUE(is_polynomial(a.value)) << a.value.str();
  visit_atoms(t.reset.relation, [](const Atom& a) { EXPECT_TRUE(is_polynomial(a.lhs)); });
  EXPECT_TRUE(all_modes_pass(check_modes(r)));
}

// Theta maps every state of a site into the abstracted site.
TEST(Abstraction, SitesOverApproximateProperty) {
  std::mt19937_64 rng(2024);
  for (const char* name : kFixtures) {
    ModelFile mf = load_model(name);
    AbstractionResult r = abstract_ehs(mf.system, mf.strategy);
    int hits = 0;
    for (std::size_t k = 0; k < r.original.modes.size(); ++k) {
      const Mode& m = r.original.modes[k];
      const Mode& y = r.system.modes[k];
      const SimulationMap& theta = r.theta.at(m.name);
      Box base = mf.strategy.boxes.count(m.name) != 0 ? mf.strategy.boxes.at(m.name) : Box{};
      struct SitePair {
        const Predicate* orig;
        const Predicate* abs;
        Box box;
      };
      std::vector<SitePair> sites{{&m.init, &y.init, intersect(base, derive_box(m.init))},
                                  {&m.domain, &y.domain, intersect(base, derive_box(m.domain))},
                                  {&m.unsafe, &y.unsafe, intersect(base, derive_box(m.unsafe))}};
      for (const auto& site : sites) {
        for (int i = 0; i < 10000; ++i) {
          Valuation x = random_in(site.box, r.original.vars, rng);
          if (!safe_holds(*site.orig, x, 0)) continue;
          Valuation y_env;
          try {
            y_env = theta.apply_named(x);
          } catch (const std::exception&) {
            continue;
          }
          ++hits;
          ASSERT_TRUE(evaluate(*site.abs, y_env, kTol)) << name << " mode " << m.name << " at " << site.abs->str();
        }
      }
    }
    EXPECT_GT(hits, 0) << name;
  }
}

// Points on the bouncing ball's guard and their post-states are admitted by
// the abstract guard and reset.
TEST(Abstraction, ResetCoverageProperty) {
  AbstractionResult r = abstract_fixture("bouncingball.model");
  const Transition& orig = r.original.transitions[0];
  const Transition& abs = r.system.transitions[0];
  const SimulationMap& theta = r.theta.at("q");
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 10000; ++i) {
    double x = u(rng);
    Valuation pre{{"x", x}, {"y", std::sin(x)}, {"vx", u(rng)}, {"vy", u(rng)}};
    Valuation post = pre;
    for (const auto& a : orig.reset.assignments) post[a.variable] = evaluate(a.value, pre);
    Valuation ypre = theta.apply_named(pre);
    Valuation ypost = theta.apply_named(post);
    ASSERT_TRUE(evaluate(abs.guard, ypre, kTol)) << x;
    ASSERT_TRUE(reset_admits(abs, r.system.vars, ypre, ypost)) << x;
  }
}

TEST(Abstraction, LunarLanderResetCoverage) {
  AbstractionResult r = abstract_fixture("lunarlander.model");
  const Transition& orig = r.original.transitions[0];
  const Transition& abs = r.system.transitions[0];
  const SimulationMap& theta = r.theta.at(orig.source);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 2000; ++i) {
    Valuation pre{{"v", -2 + 0.1 * (u(rng) - 0.5)},
                  {"m", 1200 + 100 * u(rng)},
                  {"Fc", 1900 + 200 * u(rng)},
                  {"t", 0.128}};
    Valuation post = pre;
    for (const auto& a : orig.reset.assignments) post[a.variable] = evaluate(a.value, pre);
    ASSERT_TRUE(reset_admits(abs, r.system.vars, theta.apply_named(pre), theta.apply_named(post)));
  }
}

TEST(Abstraction, PerModeThetaZeroesUnusedEntries) {
  AbstractionResult r = abstract_fixture("twotanks.model");
  ASSERT_EQ(r.system.modes.size(), 2u);
  for (const auto& m : r.system.modes) {
    const auto& used = r.used.at(m.name);
    const SimulationMap& th = r.theta.at(m.name);
    for (std::size_t i = 0; i < th.fresh.size(); ++i) {
      const Expr& c = th.components[r.ledger.originals().size() + i];
      if (used.count(th.fresh[i]) == 0) {
        EXPECT_TRUE(c.is_const(0)) << th.fresh[i];
        EXPECT_TRUE(m.field.rhs_of(th.fresh[i]).is_const(0)) << th.fresh[i];
      } else {
        EXPECT_FALSE(c.is_const(0));
      }
    }
  }
  EXPECT_TRUE(all_modes_pass(check_modes(r)));
}

// W1 (the exact relation) implies W2, which implies W3, which implies W4.
TEST(Strategy, NestingProperty) {
  ReplacementLedger ledger({"x"});
  vt(parse("sin(x)"), ledger);
  const LedgerEntry& e = ledger[0];
  Box box{{"x", Interval(-2, 2)}};
  auto order = ledger.all_variables();
  Predicate w2 = abstract_replacement(e, Site::Domain, Strategy::parse("W2(6)"), box, order);
  Predicate w3 = abstract_replacement(e, Site::Domain, Strategy::parse("W3"), box, order);
  Predicate w4 = abstract_replacement(e, Site::Domain, Strategy::parse("W4"), box, order);
  EXPECT_TRUE(w4.is_true());
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ux(-2, 2);
  std::uniform_real_distribution<double> uv(-1.5, 1.5);
  int in2 = 0;
  int in3 = 0;
  for (int i = 0; i < 10000; ++i) {
    double x = ux(rng);
    double v = i % 2 == 0 ? std::sin(x) : uv(rng);
    Valuation env{{"x", x}, {e.name, v}};
    bool s1 = i % 2 == 0;
    bool s2 = evaluate(w2, env);
    bool s3 = evaluate(w3, env);
    bool s4 = evaluate(w4, env);
    ASSERT_TRUE(!s1 || s2) << x;
    ASSERT_TRUE(!s2 || s3) << x << " " << v;
    ASSERT_TRUE(!s3 || s4);
    in2 += s2;
    in3 += s3;
  }
  // Coarser strategies admit strictly more points.
  EXPECT_LT(in2, in3);
  EXPECT_LT(in3, 10000);
}

TEST(Strategy, W1OnlyForExactRewrites) {
  ReplacementLedger ledger({"x"});
  vt(parse("1/x + sqrt(x) + sin(x)"), ledger);
  auto order = ledger.all_variables();
  Box box{{"x", Interval(0.5, 2)}};
  for (const auto& e : ledger.entries()) {
    if (e.kind == ReplacementKind::Sin) {
      EXPECT_THROW(abstract_replacement(e, Site::Domain, Strategy::parse("W1"), box, order), StrategyInapplicable);
      continue;
    }
    Predicate w1 = abstract_replacement(e, Site::Domain, Strategy::parse("W1"), box, order);
    for (double x : {0.5, 1.0, 1.7}) {
      Valuation env{{"x", x}, {e.name, evaluate(e.definition, {{"x", x}})}};
      EXPECT_TRUE(evaluate(w1, env, 1e-12)) << w1.str();
    }
    EXPECT_TRUE(is_polynomial(w1.atom().lhs) || w1.kind() == Predicate::Kind::And);
  }
}

TEST(Strategy, ParseAndAuto) {
  EXPECT_EQ(Strategy::parse("W2(6)").degree, 6u);
  EXPECT_THROW(Strategy::parse("W5"), std::invalid_argument);
  EXPECT_THROW(Strategy::parse("W2(0)"), std::invalid_argument);
  EXPECT_EQ(concrete_strategy(Strategy::parse("auto"), Site::Init, ReplacementKind::Reciprocal).kind, StrategyKind::W1);
  EXPECT_EQ(concrete_strategy(Strategy::parse("auto"), Site::Init, ReplacementKind::Sin).kind, StrategyKind::W4);
  EXPECT_EQ(concrete_strategy(Strategy::parse("auto"), Site::Domain, ReplacementKind::Exp).kind, StrategyKind::W3);
}

TEST(Strategy, W2NeedsABoundedBox) {
  ContinuousSystem c;
  c.vars = {"x"};
  c.field = odes_from_text({{"x", "sin(x)"}});
  c.init = parse_predicate("x = 1");
  AbstractionStrategy s = AbstractionStrategy::uniform(Strategy::parse("W2(4)"));
  EXPECT_THROW(abstract_eds(c, s), StrategyInapplicable);
  c.domain = parse_predicate("-1 <= x && x <= 2");
  AbstractionResult r = abstract_eds(c, s);
  EXPECT_TRUE(all_modes_pass(check_modes(r)));
}

TEST(Strategy, NondeterministicResetAllowsOnlyW4) {
  HybridSystem h;
  h.vars = {"x"};
  h.modes.push_back(Mode{"q", odes_from_text({{"x", "-exp(x)"}}), parse_predicate("x = 0"),
                         parse_predicate("x >= -1"), Predicate::falsity()});
  Transition t{"e", "q", "q", parse_predicate("x = -1"), {}};
  t.reset.havoc = {"x"};
  t.reset.relation = parse_predicate("x' >= 0 && x' <= 1");
  h.transitions.push_back(t);
  AbstractionStrategy s;
  s.by_kind[Site::Reset] = Strategy::parse("W3");
  EXPECT_THROW(abstract_ehs(h, s), StrategyInapplicable);
  AbstractionResult r = abstract_ehs(h, AbstractionStrategy{});
  EXPECT_TRUE(r.system.transitions[0].reset.havocs("v1"));
}

TEST(Validate, RejectsMalformedModels) {
  HybridSystem good;
  good.vars = {"x"};
  good.modes.push_back(Mode{"q", odes_from_text({{"x", "1"}})});
  EXPECT_NO_THROW(good.validate());

  HybridSystem dup = good;
  dup.vars = {"x", "x"};
  EXPECT_THROW(dup.validate(), InvalidModel);

  HybridSystem missing = good;
  missing.vars = {"x", "y"};
  EXPECT_THROW(missing.validate(), InvalidModel);

  HybridSystem undeclared = good;
  undeclared.modes[0].domain = parse_predicate("z > 0");
  EXPECT_THROW(undeclared.validate(), InvalidModel);

  HybridSystem dangling = good;
  dangling.transitions.push_back(Transition{"e", "q", "nowhere", Predicate::truth(), Reset{}});
  EXPECT_THROW(dangling.validate(), InvalidModel);

  HybridSystem twice = good;
  Transition t{"e", "q", "q", Predicate::truth(), Reset{}};
  t.reset.assignments = {{"x", parse("0")}, {"x", parse("1")}};
  twice.transitions.push_back(t);
  EXPECT_THROW(twice.validate(), InvalidModel);

  EXPECT_THROW(HybridSystem{}.validate(), InvalidModel);
}

TEST(Boxes, DerivedFromConjunctions) {
  Box b = derive_box(parse_predicate("-2 <= x && x <= 2 && y > 1 && y^2 < 9"));
  EXPECT_EQ(b.at("x").lo, -2);
  EXPECT_EQ(b.at("x").hi, 2);
  EXPECT_EQ(b.at("y").lo, 1);
  Box d = derive_box(parse_predicate("x <= 0 || x >= 1"));
  EXPECT_TRUE(d.count("x") == 0 || !d.at("x").bounded());
}
