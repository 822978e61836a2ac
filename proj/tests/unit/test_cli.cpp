#include "support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace ehs;
using ehs::test::model_path;
using ehs::test::read_text;

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("ehs_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Outcome run(const std::string& args) {
  fs::path err = scratch() / "stderr.txt";
  std::string cmd = std::string(EHS_TOOL) + " " + args + " 2>" + err.string();
  Outcome r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_text(err.string());
  return r;
}

std::string write_file(const std::string& name, const std::string& text) {
  fs::path p = scratch() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string m(const std::string& name) { return model_path(name); }

// Value of a "key: value" report line.
std::string field(const std::string& report, const std::string& key) {
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ": ", 0) == 0) return line.substr(key.size() + 2);
  }
  return "";
}

}  // namespace

TEST(Transform, MatchesGoldenFiles) {
  for (const char* name : {"ex1", "twotanks"}) {
    Outcome r = run("transform " + m(std::string(name) + ".model"));
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, read_text(std::string(EHS_GOLDEN_DIR) + "/" + name + ".transform")) << name;
  }
}

TEST(Transform, RootSideConditionsUnderW1) {
  Outcome r = run("transform " + m("twotanks.model"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("v1^2 - x1 = 0 && v1 >= 0"), std::string::npos);
  EXPECT_EQ(field(r.err, "check.q1"), "passed");
  EXPECT_EQ(field(r.err, "check.q2"), "passed");
}

TEST(Transform, EveryFixtureAndItsCheck) {
  for (const char* name : ehs::test::kFixtures) {
    std::string out = (scratch() / (std::string(name) + ".abs")).string();
    Outcome t = run("transform " + m(name) + " -o " + out);
    ASSERT_EQ(t.code, 0) << name << t.err;
    Outcome c = run("check " + m(name) + " " + out);
    EXPECT_EQ(c.code, 0) << name << c.err;
  }
}

TEST(Transform, PolynomialModelHasEmptyLedger) {
  std::string src = "variables: x, y\nmode q:\n  x' = y\n  y' = -x - y^3\n  init: x = 1 && y = 0\n  domain: true\n";
  std::string path = write_file("poly.model", src);
  Outcome r = run("transform " + path);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(field(r.err, "fresh_variables"), "0");
  ModelFile back = parse_model(r.out);
  ModelFile orig = parse_model(src);
  EXPECT_EQ(back.system.vars, orig.system.vars);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(to_canonical_poly(back.system.modes[0].field.rhs[i]), to_canonical_poly(orig.system.modes[0].field.rhs[i]));
  }
}

TEST(Transform, InputErrorsExitOne) {
  EXPECT_EQ(run("transform /nonexistent.model").code, 1);
  std::string bad = write_file("bad.model", "variables: x\nmode q:\n  x' = \n");
  Outcome r = run("transform " + bad);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad.model:"), std::string::npos) << r.err;
  EXPECT_EQ(run("transform").code, 1);
  EXPECT_EQ(run("frobnicate " + m("ex1.model")).code, 1);
  std::string abs = (scratch() / "ex1_again.abs").string();
  ASSERT_EQ(run("transform " + m("ex1.model") + " -o " + abs).code, 0);
  EXPECT_EQ(run("transform " + abs).code, 1);
}

TEST(Check, Ex1PairWithinTolerance) {
  std::string abs = (scratch() / "ex1.abs").string();
  ASSERT_EQ(run("transform " + m("ex1.model") + " -o " + abs).code, 0);
  Outcome r = run("check " + m("ex1.model") + " " + abs + " --points 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(std::stod(field(r.out, "max_deviation")), 1e-6);
}

TEST(Check, MutatedPairExitsTwo) {
  std::string abs = (scratch() / "ex1_mut.abs").string();
  ASSERT_EQ(run("transform " + m("ex1.model") + " -o " + abs).code, 0);
  std::string text = read_text(abs);
  std::size_t at = text.find("y' = -v2^2");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 10, "y' = -v2^2 + 1/100");
  write_file("ex1_mut.abs", text);
  Outcome r = run("check " + m("ex1.model") + " " + abs);
  EXPECT_EQ(r.code, 2);
}

TEST(Check, IdentityPairHasZeroDeviation) {
  std::string src = "variables: x\nmode q:\n  x' = -x\n  init: 0 <= x <= 1\n  domain: -2 <= x <= 2\n";
  std::string path = write_file("id.model", src);
  std::string abs = (scratch() / "id.abs").string();
  ASSERT_EQ(run("transform " + path + " -o " + abs).code, 0);
  Outcome r = run("check " + path + " " + abs);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::stod(field(r.out, "max_deviation")), 0.0);
}

TEST(Simulate, BouncingBallTwoJumps) {
  std::string csv = (scratch() / "bb.csv").string();
  Outcome r = run("simulate " + m("bouncingball.model") + " --jumps 2 --monitor 'E=0.5*(vx^2+vy^2)+9.8*y' -o " + csv);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(field(r.out, "jumps"), "2");
  double lo = std::stod(field(r.out, "monitor.E.min"));
  double hi = std::stod(field(r.out, "monitor.E.max"));
  EXPECT_LE(hi - lo, 1e-6 * hi);
  std::string trace = read_text(csv);
  EXPECT_EQ(trace.rfind("t,mode,x,y,vx,vy\n", 0), 0u) << trace.substr(0, 40);
}

TEST(Verify, Ex3InvariantHasNoViolation) {
  Outcome r = run("verify-invariant " + m("ex3.model") + " --invariant " + m("ex3_inv.txt") + " --samples 10000");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(field(r.out, "result"), "no violation found");
  Outcome wrong = run("verify-invariant " + m("ex3.model") + " --invariant " + write_file("big.txt", "x^2 + y^2 - 100 <= 0"));
  EXPECT_EQ(wrong.code, 2);
  EXPECT_EQ(run("verify-invariant " + m("ex3.model") + " --invariant " + write_file("u.txt", "z <= 0")).code, 1);
}

TEST(Emit, TemplateParameterCounts) {
  Outcome r = run("emit-constraints " + m("ex3.model") + " --template-degree 5 --template-scope originals");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(field(r.err, "parameters"), "21");
  std::size_t declared = 0;
  for (std::size_t p = r.out.find("(declare-const "); p != std::string::npos; p = r.out.find("(declare-const ", p + 1)) ++declared;
  EXPECT_EQ(declared, 21u);
  Outcome f = run("emit-constraints " + m("ex4.model") + " --template-degree 3 --template-scope originals-plus-fresh");
  EXPECT_EQ(field(f.err, "parameters"), "56");
  // Fresh names u1..u3 of the ball collide with the default prefix.
  EXPECT_EQ(run("emit-constraints " + m("bouncingball.model")).code, 1);
  EXPECT_EQ(run("emit-constraints " + m("bouncingball.model") + " --template-prefix c").code, 0);
  EXPECT_EQ(run("emit-constraints " + m("ex3.model") + " --template-degree 0").code, 1);
}

TEST(Export, FormatsAndErrors) {
  for (const char* f : {"native", "smt", "flowstar"}) {
    Outcome r = run("export " + m("bouncingball.model") + " --format " + f);
    EXPECT_EQ(r.code, 0) << f << r.err;
    EXPECT_FALSE(r.out.empty()) << f;
  }
  EXPECT_EQ(run("export " + m("ex1.model") + " --format xml").code, 1);
}

// Same inputs and seed give byte-identical outputs.
TEST(Determinism, SeededOutputsRepeat) {
  auto strip = [](const Outcome& r) {
    std::string s = r.err;
    std::size_t t = s.find("time_ms:");
    return t == std::string::npos ? s : s.substr(0, t);
  };
  for (const std::string& args : {"check " + m("ex3.model") + " " + (scratch() / "ex3.model.abs").string(),
                                  "verify-invariant " + m("ex4.model") + " --invariant " + m("ex4_inv.txt") + " --samples 500",
                                  "simulate " + m("lunarlander.model") + " --time 1"}) {
    ASSERT_EQ(run("transform " + m("ex3.model") + " -o " + (scratch() / "ex3.model.abs").string()).code, 0);
    Outcome a = run("--seed 11 " + args);
    Outcome b = run("--seed 11 " + args);
    EXPECT_EQ(a.out, b.out) << args;
    EXPECT_EQ(strip(a), strip(b)) << args;
  }
}

TEST(Report, WrittenToFile) {
  std::string rep = (scratch() / "rep.txt").string();
  Outcome r = run("--report " + rep + " transform " + m("ex1.model"));
  ASSERT_EQ(r.code, 0);
  std::string text = read_text(rep);
  EXPECT_EQ(field(text, "command"), "transform");
  EXPECT_EQ(field(text, "fresh_variables"), "3");
}
