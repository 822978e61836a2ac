#pragma once

// Shared helpers for the test binaries: fixture loading, random elementary
// expressions and comparison of polynomial systems up to fresh-name renaming.

#include "ehs/export.hpp"
#include "ehs/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace ehs::test {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string model_path(const std::string& name) { return std::string(EHS_MODELS_DIR) + "/" + name; }

inline ModelFile load_model(const std::string& name) { return parse_model(read_text(model_path(name))); }

inline AbstractionResult abstract_fixture(const std::string& name) {
  ModelFile mf = load_model(name);
  return abstract_ehs(mf.system, mf.strategy);
}

// Invariant file contents with '#' comment lines dropped.
inline Predicate load_invariant(const std::string& name) {
  std::istringstream in(read_text(model_path(name)));
  std::string line;
  std::string text;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    text += (hash == std::string::npos ? line : line.substr(0, hash)) + "\n";
  }
  return parse_predicate(text);
}

inline ContinuousSystem continuous_of(const ModelFile& mf, std::size_t mode = 0) {
  const Mode& m = mf.system.modes.at(mode);
  ContinuousSystem c;
  c.vars = mf.system.vars;
  c.field = m.field;
  c.init = m.init;
  c.domain = m.domain;
  c.unsafe = m.unsafe;
  c.name = m.name;
  return c;
}

inline Box mode_box(const ModelFile& mf, const std::string& mode) {
  auto it = mf.strategy.boxes.find(mode);
  return it == mf.strategy.boxes.end() ? Box{} : it->second;
}

// Seeded start points in a mode: its init set, or its domain when the init is empty.
inline std::vector<State> start_points(const ModelFile& mf, std::size_t mode, std::size_t n, std::uint64_t seed) {
  const Mode& m = mf.system.modes.at(mode);
  std::mt19937_64 rng(seed);
  Box box = intersect(mode_box(mf, m.name), derive_box(m.domain));
  const Predicate& region = m.init.is_false() ? m.domain : m.init;
  return sample_region(region, mf.system.vars, box, n, rng);
}

// Index of the ledger entry whose definition agrees with gamma at a few points.
inline long entry_matching(const ReplacementLedger& ledger, const std::string& gamma) {
  Expr g = parse(gamma);
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    bool same = true;
    for (double x : {-1.3, 0.2, 0.9}) {
      Valuation env{{"x", x}, {"y", 0.4}};
      if (std::fabs(evaluate(g, env) - evaluate(ledger[i].definition, env)) > 1e-12) same = false;
    }
    if (same) return static_cast<long>(i);
  }
  return -1;
}

inline const char* const kFixtures[] = {"ex1.model", "ex3.model", "ex4.model", "bouncingball.model",
                                        "hiv.model", "twotanks.model", "lunarlander.model"};

// Random elementary expressions. Arguments of ln, roots and reciprocals are
// kept positive by construction so that sampled points stay in the domain.
class ExprGen {
 public:
  ExprGen(std::uint64_t seed, std::vector<std::string> vars) : rng_(seed), vars_(std::move(vars)) {}

  Expr any(int depth) {
    if (depth <= 0) return leaf();
    switch (pick(10)) {
      case 0: return leaf();
      case 1: return Expr::binary(Op::Add, any(depth - 1), any(depth - 1));
      case 2: return Expr::binary(Op::Sub, any(depth - 1), any(depth - 1));
      case 3: return Expr::binary(Op::Mul, any(depth - 1), any(depth - 1));
      case 4: return Expr::binary(Op::Div, any(depth - 1), positive(depth - 1));
      case 5: return Expr::power(any(depth - 1), Rational(static_cast<int>(pick(3)) + 2));
      case 6: return Expr::function(Op::Exp, bounded(depth - 1));
      case 7: return Expr::function(Op::Ln, positive(depth - 1));
      case 8: return Expr::function(pick(2) == 0 ? Op::Sin : Op::Cos, any(depth - 1));
      default: return Expr::power(positive(depth - 1), Rational(1, static_cast<int>(pick(2)) + 2));
    }
  }

  // Polynomial expressions only.
  Expr polynomial(int depth) {
    if (depth <= 0) return leaf();
    switch (pick(5)) {
      case 0: return leaf();
      case 1: return Expr::binary(Op::Add, polynomial(depth - 1), polynomial(depth - 1));
      case 2: return Expr::binary(Op::Sub, polynomial(depth - 1), polynomial(depth - 1));
      case 3: return Expr::binary(Op::Mul, polynomial(depth - 1), polynomial(depth - 1));
      default: return Expr::power(polynomial(depth - 1), Rational(static_cast<int>(pick(3)) + 1));
    }
  }

  // Strictly positive: c + g^2 with c > 0, or exp of something bounded.
  Expr positive(int depth) {
    Rational c(static_cast<int>(pick(3)) + 1);
    if (pick(3) == 0) return Expr::function(Op::Exp, bounded(depth));
    return Expr::binary(Op::Add, Expr::constant(c), Expr::power(any(std::max(depth - 1, 0)), Rational(2)));
  }

  // Bounded between -1 and 1.
  Expr bounded(int depth) { return Expr::function(pick(2) == 0 ? Op::Sin : Op::Cos, any(std::max(depth - 1, 0))); }

  Expr leaf() {
    if (pick(3) == 0) {
      int n = static_cast<int>(pick(7)) - 3;
      int d = static_cast<int>(pick(3)) + 1;
      return Expr::constant(Rational(n, d));
    }
    return Expr::variable(vars_[pick(vars_.size())]);
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  Valuation point(double lo, double hi) {
    Valuation env;
    for (const auto& v : vars_) env[v] = uniform(lo, hi);
    return env;
  }

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::vector<std::string> vars_;
};

// Canonical polynomial of each right-hand side after renaming b's fresh
// variables to a's; tries every bijection of the fresh names.
inline bool equal_up_to_renaming(const OdeSystem& a, const OdeSystem& b, const std::vector<std::string>& originals) {
  if (a.vars.size() != b.vars.size()) return false;
  std::vector<std::string> fa;
  std::vector<std::string> fb;
  for (const auto& v : a.vars) {
    if (std::find(originals.begin(), originals.end(), v) == originals.end()) fa.push_back(v);
  }
  for (const auto& v : b.vars) {
    if (std::find(originals.begin(), originals.end(), v) == originals.end()) fb.push_back(v);
  }
  if (fa.size() != fb.size()) return false;
  std::vector<std::string> all = originals;
  all.insert(all.end(), fa.begin(), fa.end());
  std::vector<std::size_t> perm(fb.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  do {
    std::map<std::string, Expr> rename;
    std::map<std::string, std::string> back;
    for (std::size_t i = 0; i < fb.size(); ++i) {
      rename[fb[perm[i]]] = var(fa[i]);
      back[fa[i]] = fb[perm[i]];
    }
    bool ok = true;
    for (const auto& v : a.vars) {
      std::string bv = back.count(v) != 0 ? back.at(v) : v;
      if (b.index_of(bv) < 0) {
        ok = false;
        break;
      }
      Poly pa = to_canonical_poly(a.rhs_of(v), all);
      Poly pb = to_canonical_poly(substitute(b.rhs_of(bv), rename), all);
      if (!(pa == pb)) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

inline OdeSystem odes_from_text(const std::vector<std::pair<std::string, std::string>>& eqs) {
  std::vector<std::pair<std::string, Expr>> parsed;
  for (const auto& [v, e] : eqs) parsed.emplace_back(v, parse(e));
  return make_odes(parsed);
}

}  // namespace ehs::test
