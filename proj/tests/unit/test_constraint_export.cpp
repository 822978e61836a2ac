#include "support.hpp"

#include <gtest/gtest.h>

#include <cctype>
#include <numeric>
#include <cmath>
#include <random>

using namespace ehs;
using ehs::test::abstract_fixture;
using ehs::test::kFixtures;
using ehs::test::load_model;
using ehs::test::odes_from_text;

namespace {

// Minimal s-expression reader for the emitted documents.
struct Sx {
  std::string atom;
  std::vector<Sx> list;
  bool is_list = false;
};

std::vector<Sx> read_all(const std::string& text) {
  std::vector<std::vector<Sx>> stack(1);
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == ';') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '(') {
      stack.emplace_back();
      ++i;
    } else if (c == ')') {
      if (stack.size() < 2) throw std::runtime_error("unbalanced ')'");
      Sx s;
      s.is_list = true;
      s.list = std::move(stack.back());
      stack.pop_back();
      stack.back().push_back(std::move(s));
      ++i;
    } else if (c == '|') {
      std::size_t j = text.find('|', i + 1);
      if (j == std::string::npos) throw std::runtime_error("unterminated |symbol|");
      stack.back().push_back(Sx{text.substr(i + 1, j - i - 1), {}, false});
      i = j + 1;
    } else {
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != '(' && text[j] != ')') ++j;
      stack.back().push_back(Sx{text.substr(i, j - i), {}, false});
      i = j;
    }
  }
  if (stack.size() != 1) throw std::runtime_error("unbalanced '('");
  return stack[0];
}

bool is_number(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '.'; });
}

const std::set<std::string> kOperators{"+", "-", "*", "/", "=", "<=", "<", ">=", ">", "and", "or", "not", "=>", "!", "true", "false", "distinct"};

struct Scope {
  std::set<std::string> consts;
  std::map<std::string, std::pair<std::vector<std::string>, Sx>> funs;
};

// Symbols the expression uses that are neither bound nor declared.
void unresolved(const Sx& e, const Scope& sc, std::set<std::string> bound, std::vector<std::string>& out) {
  if (!e.is_list) {
    if (is_number(e.atom) || kOperators.count(e.atom) != 0 || bound.count(e.atom) != 0 || sc.consts.count(e.atom) != 0 ||
        sc.funs.count(e.atom) != 0) {
      return;
    }
    out.push_back(e.atom);
    return;
  }
  if (e.list.empty()) return;
  if (!e.list[0].is_list && (e.list[0].atom == "forall" || e.list[0].atom == "exists")) {
    for (const auto& b : e.list[1].list) bound.insert(b.list[0].atom);
    unresolved(e.list[2], sc, bound, out);
    return;
  }
  for (std::size_t i = 0; i < e.list.size(); ++i) {
    if (!e.list[i].is_list && e.list[i].atom == ":named") {
      ++i;
      continue;
    }
    unresolved(e.list[i], sc, bound, out);
  }
}

Scope declarations(const std::vector<Sx>& doc) {
  Scope sc;
  for (const auto& top : doc) {
    if (!top.is_list || top.list.empty()) continue;
    const std::string& head = top.list[0].atom;
    if (head == "declare-const") sc.consts.insert(top.list[1].atom);
    if (head == "define-fun") {
      std::vector<std::string> params;
      for (const auto& p : top.list[2].list) params.push_back(p.list[0].atom);
      sc.funs[top.list[1].atom] = {params, top.list[4]};
    }
  }
  return sc;
}

// Every assertion and definition body only uses symbols in scope.
void expect_well_scoped(const std::string& text) {
  std::vector<Sx> doc;
  ASSERT_NO_THROW(doc = read_all(text));
  Scope sc = declarations(doc);
  for (const auto& top : doc) {
    ASSERT_TRUE(top.is_list);
    std::vector<std::string> bad;
    if (top.list[0].atom == "assert") unresolved(top.list[1], sc, {}, bad);
    if (top.list[0].atom == "define-fun") {
      const auto& f = sc.funs.at(top.list[1].atom);
      unresolved(f.second, sc, std::set<std::string>(f.first.begin(), f.first.end()), bad);
    }
    EXPECT_TRUE(bad.empty()) << "unresolved " << (bad.empty() ? "" : bad[0]) << " in " << top.list[0].atom;
  }
}

double eval_sx(const Sx& e, const Scope& sc, const std::map<std::string, double>& env) {
  if (!e.is_list) {
    if (is_number(e.atom)) return std::stod(e.atom);
    return env.at(e.atom);
  }
  const std::string& op = e.list[0].atom;
  std::vector<double> a;
  for (std::size_t i = 1; i < e.list.size(); ++i) a.push_back(eval_sx(e.list[i], sc, env));
  if (op == "+") return std::accumulate(a.begin(), a.end(), 0.0);
  if (op == "*") return std::accumulate(a.begin(), a.end(), 1.0, std::multiplies<>());
  if (op == "-") return a.size() == 1 ? -a[0] : a[0] - a[1];
  if (op == "/") return a[0] / a[1];
  auto f = sc.funs.at(op);
  std::map<std::string, double> inner = env;
  for (std::size_t i = 0; i < f.first.size(); ++i) inner[f.first[i]] = a[i];
  return eval_sx(f.second, sc, inner);
}

const Sx* named_assertion(const std::vector<Sx>& doc, const std::string& name) {
  for (const auto& top : doc) {
    if (top.list[0].atom != "assert") continue;
    const Sx& bang = top.list[1];
    if (bang.list.size() >= 4 && bang.list[3].atom == name) return &bang.list[1];
  }
  return nullptr;
}

std::vector<std::string> bound_names(const Sx& forall) {
  std::vector<std::string> out;
  for (const auto& b : forall.list[1].list) out.push_back(b.list[0].atom);
  return out;
}

}  // namespace

TEST(Monomials, GradedLexDescending) {
  auto m = monomials_up_to(2, 2);
  std::vector<Poly::Monomial> want{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  EXPECT_EQ(m, want);
}

// binomial(d + n, n) monomials of degree at most d over n variables.
TEST(Monomials, CountProperty) {
  for (std::size_t n = 1; n <= 5; ++n) {
    for (unsigned d = 1; d <= 5; ++d) {
      Integer want = binomial(d + n, n);
      EXPECT_EQ(Integer(monomials_up_to(n, d).size()), want) << n << " " << d;
    }
  }
}

TEST(Emit, Ex3DegreeFiveHasTwentyOneParameters) {
  AbstractionResult r = abstract_fixture("ex3.model");
  auto doc = emit_constraints(r, TemplateSpec{5, TemplateScope::Originals, "u"});
  EXPECT_EQ(doc.parameter_count(), 21u);
  auto sx = read_all(doc.text);
  for (const char* n : {"q.C1", "q.C2", "q.C3"}) EXPECT_NE(named_assertion(sx, n), nullptr) << n;
  expect_well_scoped(doc.text);
}

TEST(Emit, Ex4DegreeThreeOverAllVariablesHasFiftySixParameters) {
  AbstractionResult r = abstract_fixture("ex4.model");
  auto doc = emit_constraints(r, TemplateSpec{3, TemplateScope::OriginalsPlusFresh, "u"});
  EXPECT_EQ(doc.parameter_count(), 56u);
  EXPECT_EQ(doc.templates[0].variables.size(), 5u);
  expect_well_scoped(doc.text);
}

TEST(Emit, OriginalsScopeHasNoFreshSymbols) {
  AbstractionResult r = abstract_fixture("ex3.model");
  auto doc = emit_constraints(r, TemplateSpec{4, TemplateScope::Originals, "u"});
  auto pv = variables(doc.templates[0].polynomial);
  for (const auto& name : r.ledger.names()) EXPECT_EQ(pv.count(name), 0u) << name;
  auto sx = read_all(doc.text);
  Scope sc = declarations(sx);
  EXPECT_EQ(sc.funs.at("p_q").first, (std::vector<std::string>{"x", "y"}));
  // The Lie derivative uses the x-components of the abstracted field, which
  // do mention the fresh variables.
  auto lv = variables(doc.templates[0].lie_derivative);
  EXPECT_EQ(lv.count("x"), 1u);
}

TEST(Emit, QuantifiersNeverBindParameters) {
  for (const char* name : {"ex3.model", "ex4.model", "twotanks.model"}) {
    AbstractionResult r = abstract_fixture(name);
    auto doc = emit_constraints(r, TemplateSpec{2, TemplateScope::Originals, "c"});
    std::set<std::string> params;
    for (const auto& t : doc.templates) params.insert(t.parameters.begin(), t.parameters.end());
    for (const auto& top : read_all(doc.text)) {
      if (top.list[0].atom != "assert") continue;
      const Sx& body = top.list[1].list[1];
      if (body.is_list && body.list[0].atom == "forall") {
        for (const auto& b : bound_names(body)) EXPECT_EQ(params.count(b), 0u) << name << " binds " << b;
      }
    }
    expect_well_scoped(doc.text);
  }
}

// The emitted template evaluates like the polynomial it was built from.
TEST(Emit, TemplateDefinitionMatchesPolynomial) {
  AbstractionResult r = abstract_fixture("ex4.model");
  auto doc = emit_constraints(r, TemplateSpec{3, TemplateScope::OriginalsPlusFresh, "u"});
  auto sx = read_all(doc.text);
  Scope sc = declarations(sx);
  const ModeTemplate& t = doc.templates[0];
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, double> env;
    Valuation val;
    for (const auto& p : t.parameters) val[p] = env[p] = u(rng);
    Sx call;
    call.is_list = true;
    call.list.push_back(Sx{"p_q", {}, false});
    for (const auto& v : t.variables) {
      double x = u(rng);
      val[v] = env["arg_" + v] = x;
      call.list.push_back(Sx{"arg_" + v, {}, false});
    }
    double want = evaluate(t.polynomial, val);
    EXPECT_NEAR(eval_sx(call, sc, env), want, 1e-9 * (1 + std::fabs(want)));
  }
}

TEST(Emit, LieDerivativeMatchesChainRule) {
  AbstractionResult r = abstract_fixture("ex3.model");
  auto doc = emit_constraints(r, TemplateSpec{2, TemplateScope::Originals, "u"});
  const ModeTemplate& t = doc.templates[0];
  Expr want = lie_derivative(t.polynomial, make_odes({{"x", r.only_mode().field.rhs_of("x")},
                                                       {"y", r.only_mode().field.rhs_of("y")}}));
  std::vector<std::string> all = r.system.vars;
  all.insert(all.end(), t.parameters.begin(), t.parameters.end());
  EXPECT_EQ(to_canonical_poly(t.lie_derivative, all), to_canonical_poly(want, all));
}

TEST(Emit, DegreeOneWithoutUnsafeIsTrivialC3) {
  ContinuousSystem c;
  c.vars = {"x"};
  c.field = odes_from_text({{"x", "-x"}});
  c.init = parse_predicate("x = 1");
  c.domain = parse_predicate("-2 <= x <= 2");
  AbstractionResult r = abstract_eds(c, {});
  auto doc = emit_constraints(r, TemplateSpec{1, TemplateScope::Originals, "u"});
  EXPECT_EQ(doc.parameter_count(), 2u);
  auto sx = read_all(doc.text);
  const Sx* c3 = named_assertion(sx, "q.C3");
  ASSERT_NE(c3, nullptr);
  const Sx& implication = c3->list[2];
  EXPECT_EQ(implication.list[0].atom, "=>");
  EXPECT_EQ(implication.list[2].atom, "true");
}

TEST(Emit, UnconnectedDomainConjunctsArePruned) {
  ContinuousSystem c;
  c.vars = {"x", "z"};
  c.field = odes_from_text({{"x", "-x"}, {"z", "1"}});
  c.init = parse_predicate("x = 1 && z = 0");
  c.domain = parse_predicate("-2 <= x <= 2 && z <= 5");
  AbstractionResult r = abstract_eds(c, {});
  // The Lie derivative of a template over x alone never mentions z.
  std::vector<Predicate> dropped;
  Predicate kept = prune_domain(c.domain, {"x"}, &dropped);
  ASSERT_EQ(dropped.size(), 1u);
  EXPECT_EQ(variables(kept), (std::set<std::string>{"x"}));
  auto doc = emit_constraints(r, TemplateSpec{2, TemplateScope::Originals, "u"});
  EXPECT_TRUE(doc.audit.empty());
}

TEST(Emit, JumpConstraintPerTransition) {
  AbstractionResult r = abstract_fixture("twotanks.model");
  auto doc = emit_constraints(r, TemplateSpec{2, TemplateScope::Originals, "c"});
  auto sx = read_all(doc.text);
  EXPECT_NE(named_assertion(sx, "up.jump"), nullptr);
  EXPECT_NE(named_assertion(sx, "down.jump"), nullptr);
  EXPECT_EQ(doc.templates.size(), 2u);
  EXPECT_EQ(doc.templates[0].parameters[0], "c_q1_0");
}

TEST(Emit, Rejections) {
  ModelFile mf = load_model("ex1.model");
  AbstractionResult r = abstract_ehs(mf.system, mf.strategy);
  AbstractionResult raw = r;
  raw.system = mf.system;
  EXPECT_THROW(emit_constraints(raw, TemplateSpec{}), NonPolynomialInput);
  EXPECT_THROW(emit_constraints(r, TemplateSpec{0, TemplateScope::Originals, "u"}), std::invalid_argument);
  // Parameter names must not shadow state variables.
  EXPECT_THROW(emit_constraints(r, TemplateSpec{2, TemplateScope::Originals, "v"}), std::invalid_argument);
}

// parse(print(r)) gives back r for every fixture, and printing is stable.
TEST(Native, RoundTripProperty) {
  for (const char* name : kFixtures) {
    AbstractionResult r = abstract_fixture(name);
    std::string text = export_system(r, ExportFormat::Native);
    ModelFile back = parse_model(text);
    AbstractionResult again = result_from_model(back);
    EXPECT_TRUE(structurally_equal(r, again)) << name;
    EXPECT_EQ(print_result(again), text) << name;
    EXPECT_TRUE(all_modes_pass(check_modes(again))) << name;
  }
}

TEST(Native, OriginalModelsRoundTrip) {
  for (const char* name : kFixtures) {
    ModelFile mf = load_model(name);
    std::string text = print_model(mf.system, &mf.strategy);
    ModelFile back = parse_model(text);
    EXPECT_EQ(print_model(back.system, &back.strategy), text) << name;
  }
}

TEST(Smt, SystemExportIsWellScoped) {
  for (const char* name : kFixtures) {
    AbstractionResult r = abstract_fixture(name);
    std::string text = export_system(r, ExportFormat::Smt);
    expect_well_scoped(text);
    EXPECT_NE(text.find("(set-logic NRA)"), std::string::npos);
  }
  EXPECT_THROW(export_system(load_model("ex1.model").system, ExportFormat::Smt), UnsupportedConstruct);
}

TEST(ModelChecker, BouncingBallStructure) {
  AbstractionResult r = abstract_fixture("bouncingball.model");
  std::string text = export_system(r, ExportFormat::ModelChecker, ReachSettings{});
  std::size_t start = text.find("state var");
  ASSERT_NE(start, std::string::npos);
  std::string decl = text.substr(start + 9, text.find('\n', start) - start - 9);
  EXPECT_EQ(std::count(decl.begin(), decl.end(), ',') + 1, 7) << decl;
  EXPECT_NE(text.find("jumps"), std::string::npos);
  std::size_t arrows = 0;
  for (std::size_t p = text.find(" -> "); p != std::string::npos; p = text.find(" -> ", p + 1)) ++arrows;
  EXPECT_EQ(arrows, 1u);
  std::size_t depth = 0;
  std::size_t max_depth = 0;
  for (char c : text) {
    if (c == '{') max_depth = std::max(max_depth, ++depth);
    if (c == '}') {
      ASSERT_GT(depth, 0u);
      --depth;
    }
  }
  EXPECT_EQ(depth, 0u);
  EXPECT_GE(max_depth, 2u);
}

TEST(ModelChecker, UnsupportedConstructsAreListed) {
  HybridSystem h;
  h.vars = {"x"};
  h.modes.push_back(Mode{"q", odes_from_text({{"x", "1"}}), parse_predicate("x >= 0 && x <= 1"),
                         parse_predicate("x <= 0 || x >= 1"), Predicate::falsity()});
  Transition t{"e", "q", "q", parse_predicate("x != 3"), Reset{}};
  t.reset.havoc = {"x"};
  h.transitions.push_back(t);
  try {
    export_system(h, ExportFormat::ModelChecker);
    FAIL() << "expected UnsupportedConstruct";
  } catch (const UnsupportedConstruct& e) {
    EXPECT_GE(e.items().size(), 3u);
    bool located = std::all_of(e.items().begin(), e.items().end(),
                               [](const std::string& s) { return s.find("q") != std::string::npos || s.find("e") != std::string::npos; });
    EXPECT_TRUE(located);
  }
}

TEST(Export, EmptySystemInAllFormats) {
  HybridSystem h;
  h.vars = {"x"};
  h.modes.push_back(Mode{"q", odes_from_text({{"x", "0"}}), parse_predicate("x = 0"), Predicate::truth(),
                         Predicate::falsity()});
  for (auto f : {ExportFormat::Native, ExportFormat::Smt, ExportFormat::ModelChecker}) {
    std::string text;
    ASSERT_NO_THROW(text = export_system(h, f));
    EXPECT_FALSE(text.empty());
  }
  expect_well_scoped(export_system(h, ExportFormat::Smt));
  ModelFile back = parse_model(export_system(h, ExportFormat::Native));
  EXPECT_EQ(back.system.modes.size(), 1u);
}

TEST(Export, FormatNames) {
  EXPECT_EQ(parse_format("smt-like"), ExportFormat::Smt);
  EXPECT_EQ(parse_format("model-checker"), ExportFormat::ModelChecker);
  EXPECT_THROW(parse_format("xml"), std::invalid_argument);
  EXPECT_EQ(parse_scope("originals-plus-fresh"), TemplateScope::OriginalsPlusFresh);
}
