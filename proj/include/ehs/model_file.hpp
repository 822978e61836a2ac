#pragma once

// Line-oriented model files.
//
//   # comment
//   variables: x, y
//   prefix: v
//   mode q1:
//     x' = -x + y
//     y' = sin(x)
//     init: x^2 + y^2 - 1 <= 0
//     domain: -2 <= x <= 2
//     unsafe: x - 3 >= 0
//   transition e: q1 -> q2
//     guard: x = 1
//     x := 0
//     havoc: y
//     relation: y' - y <= 0
//   strategy:
//     default: auto
//     domain: W3
//     q1.domain.v1: W2(6)
//     box q1: x in [-2, 2], y in [-2, 2]
//
// Abstracted systems add the sections
//
//   fresh: v1, v2
//   ledger:
//     v1 = sin(x) | x
//   used q1: v1, v2
//   audit:
//     q1.domain v1 W3: note
//   warnings:
//     text

#include "ehs/hybrid.hpp"
#include "ehs/parser.hpp"

#include <charconv>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ehs {

class ModelParseError : public std::runtime_error {
 public:
  ModelParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ModelFile {
  HybridSystem system;  // vars include the fresh variables of abstracted files
  AbstractionStrategy strategy;
  std::vector<std::string> fresh;
  ReplacementLedger ledger;
  bool has_ledger = false;
  std::map<std::string, std::set<std::string>> used;
  std::vector<AuditRecord> audit;
  std::vector<std::string> warnings;

  std::vector<std::string> originals() const {
    std::vector<std::string> out;
    for (const auto& v : system.vars) {
      if (std::find(fresh.begin(), fresh.end(), v) == fresh.end()) out.push_back(v);
    }
    return out;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

inline bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

inline std::string shortest(double d) {
  if (d == Interval::inf) return "inf";
  if (d == -Interval::inf) return "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

inline double parse_bound(const std::string& s, std::size_t line) {
  std::string t = trim(s);
  if (t == "inf" || t == "+inf") return Interval::inf;
  if (t == "-inf") return -Interval::inf;
  double d = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), d);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw ModelParseError(line, "bad bound '" + t + "'");
  return d;
}

// "x in [a, b], y in [c, d]"
inline Box parse_box(const std::string& text, std::size_t line) {
  Box box;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open = text.find('[', pos);
    std::size_t close = text.find(']', pos);
    if (open == std::string::npos || close == std::string::npos || close < open) {
      if (!trim(text.substr(pos)).empty()) throw ModelParseError(line, "malformed box");
      break;
    }
    std::string head = trim(text.substr(pos, open - pos));
    if (!head.empty() && head.front() == ',') head = trim(head.substr(1));
    if (head.size() < 3 || head.substr(head.size() - 2) != "in") throw ModelParseError(line, "expected 'name in [lo, hi]'");
    std::string name = trim(head.substr(0, head.size() - 2));
    if (!is_identifier(name)) throw ModelParseError(line, "bad box variable '" + name + "'");
    auto bounds = split_list(text.substr(open + 1, close - open - 1));
    if (bounds.size() != 2) throw ModelParseError(line, "box bounds need two values");
    double lo = parse_bound(bounds[0], line);
    double hi = parse_bound(bounds[1], line);
    if (lo > hi) throw ModelParseError(line, "empty box for " + name);
    box[name] = Interval(lo, hi);
    pos = close + 1;
  }
  return box;
}

inline std::string print_box(const Box& box) {
  std::string out;
  for (const auto& [v, i] : box) {
    if (!out.empty()) out += ", ";
    out += v + " in [" + shortest(i.lo) + ", " + shortest(i.hi) + "]";
  }
  return out;
}

inline LedgerEntry entry_from_definition(const std::string& name, const Expr& def, const Poly& argument,
                                         std::size_t line) {
  LedgerEntry e;
  e.name = name;
  e.definition = def;
  e.argument = argument;
  switch (def.op()) {
    case Op::Div:
      if (!def.lhs().is_const(1)) throw ModelParseError(line, "reciprocal entries are 1/g");
      e.kind = ReplacementKind::Reciprocal;
      e.argument_x = def.rhs();
      break;
    case Op::Pow: {
      const Rational& a = def.exponent();
      if (numerator(a) != 1 || denominator(a) < 2) throw ModelParseError(line, "root entries are g^(1/q)");
      e.kind = ReplacementKind::Root;
      e.root = denominator(a).convert_to<unsigned>();
      e.argument_x = def.lhs();
      break;
    }
    case Op::Exp: e.kind = ReplacementKind::Exp; e.argument_x = def.arg(); break;
    case Op::Ln: e.kind = ReplacementKind::Ln; e.argument_x = def.arg(); break;
    case Op::Sin: e.kind = ReplacementKind::Sin; e.argument_x = def.arg(); break;
    case Op::Cos: e.kind = ReplacementKind::Cos; e.argument_x = def.arg(); break;
    default: throw ModelParseError(line, "unsupported ledger definition " + def.str());
  }
  return e;
}

}  // namespace detail

inline ModelFile parse_model(const std::string& text) {
  ModelFile mf;
  enum class Section { None, Mode, Transition, Strategy, Ledger, Audit, Warnings };
  Section section = Section::None;
  Mode* mode = nullptr;
  Transition* transition = nullptr;
  std::vector<std::pair<std::string, Expr>> flows;
  std::vector<std::pair<std::size_t, std::string>> pending_flows_line;
  bool have_vars = false;
  std::string prefix = "v";
  std::vector<std::tuple<std::size_t, std::string, std::string, std::string>> ledger_lines;
  std::map<std::string, std::map<std::string, Expr>> mode_flows;
  std::map<std::string, std::set<std::string>> seen_fields;

  auto expr_at = [](const std::string& s, std::size_t line) {
    try {
      return parse(s);
    } catch (const ParseError& e) {
      throw ModelParseError(line, e.what());
    }
  };
  auto pred_at = [](const std::string& s, std::size_t line) {
    try {
      return parse_predicate(s);
    } catch (const ParseError& e) {
      throw ModelParseError(line, e.what());
    }
  };
  auto strategy_at = [](const std::string& s, std::size_t line) {
    try {
      return Strategy::parse(s);
    } catch (const std::invalid_argument& e) {
      throw ModelParseError(line, e.what());
    }
  };

  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (section != Section::Warnings && section != Section::Audit) {
      if (auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    }
    line = detail::trim(line);
    if (line.empty()) continue;

    auto colon = line.find(':');
    std::string head = colon == std::string::npos ? line : detail::trim(line.substr(0, colon));
    std::string rest = colon == std::string::npos ? "" : detail::trim(line.substr(colon + 1));

    // Section headers.
    if (head == "variables" && colon != std::string::npos) {
      if (have_vars) throw ModelParseError(lineno, "variables declared twice");
      for (const auto& v : detail::split_list(rest)) {
        if (!detail::is_identifier(v)) throw ModelParseError(lineno, "bad variable name '" + v + "'");
        mf.system.vars.push_back(v);
      }
      have_vars = true;
      section = Section::None;
      continue;
    }
    if (head == "fresh" && colon != std::string::npos) {
      if (!have_vars) throw ModelParseError(lineno, "fresh variables before variables");
      for (const auto& v : detail::split_list(rest)) {
        if (!detail::is_identifier(v)) throw ModelParseError(lineno, "bad variable name '" + v + "'");
        mf.fresh.push_back(v);
        mf.system.vars.push_back(v);
      }
      section = Section::None;
      continue;
    }
    if (head == "prefix" && colon != std::string::npos) {
      if (!detail::is_identifier(rest)) throw ModelParseError(lineno, "bad prefix");
      prefix = rest;
      mf.system.fresh_prefix = rest;
      section = Section::None;
      continue;
    }
    if (head.rfind("mode ", 0) == 0 && colon != std::string::npos && rest.empty()) {
      if (!have_vars) throw ModelParseError(lineno, "mode before variables");
      std::string name = detail::trim(head.substr(5));
      if (!detail::is_identifier(name)) throw ModelParseError(lineno, "bad mode name");
      if (mf.system.mode(name) != nullptr) throw ModelParseError(lineno, "duplicate mode " + name);
      mf.system.modes.push_back(Mode{name, {}, Predicate::falsity(), Predicate::truth(), Predicate::falsity()});
      mode = &mf.system.modes.back();
      transition = nullptr;
      section = Section::Mode;
      continue;
    }
    if (head.rfind("transition ", 0) == 0 && colon != std::string::npos) {
      std::string name = detail::trim(head.substr(11));
      auto arrow = rest.find("->");
      if (!detail::is_identifier(name) || arrow == std::string::npos) {
        throw ModelParseError(lineno, "expected 'transition name: source -> target'");
      }
      if (mf.system.transition(name) != nullptr) throw ModelParseError(lineno, "duplicate transition " + name);
      Transition t;
      t.name = name;
      t.source = detail::trim(rest.substr(0, arrow));
      t.target = detail::trim(rest.substr(arrow + 2));
      mf.system.transitions.push_back(t);
      // Pointers into modes stay valid; transitions may reallocate.
      transition = &mf.system.transitions.back();
      mode = nullptr;
      section = Section::Transition;
      continue;
    }
    if (head == "strategy" && colon != std::string::npos && rest.empty()) {
      section = Section::Strategy;
      continue;
    }
    if (head == "ledger" && colon != std::string::npos && rest.empty()) {
      section = Section::Ledger;
      continue;
    }
    if (head.rfind("used ", 0) == 0 && colon != std::string::npos) {
      std::string name = detail::trim(head.substr(5));
      auto& u = mf.used[name];
      if (!rest.empty()) {
        for (const auto& v : detail::split_list(rest)) u.insert(v);
      }
      section = Section::None;
      continue;
    }
    if (head == "audit" && colon != std::string::npos && rest.empty()) {
      section = Section::Audit;
      continue;
    }
    if (head == "warnings" && colon != std::string::npos && rest.empty()) {
      section = Section::Warnings;
      continue;
    }

    switch (section) {
      case Section::None: throw ModelParseError(lineno, "unexpected line '" + line + "'");
      case Section::Mode: {
        if (head == "init") {
          mode->init = pred_at(rest, lineno);
        } else if (head == "domain") {
          mode->domain = pred_at(rest, lineno);
        } else if (head == "unsafe") {
          mode->unsafe = pred_at(rest, lineno);
        } else {
          auto eq = line.find('=');
          std::string lhs = eq == std::string::npos ? "" : detail::trim(line.substr(0, eq));
          if (lhs.size() < 2 || lhs.back() != '\'') throw ModelParseError(lineno, "expected \"x' = expr\"");
          std::string v = lhs.substr(0, lhs.size() - 1);
          if (std::find(mf.system.vars.begin(), mf.system.vars.end(), v) == mf.system.vars.end()) {
            throw ModelParseError(lineno, "flow for undeclared variable " + v);
          }
          if (!seen_fields[mode->name].insert(v).second) throw ModelParseError(lineno, "second flow for " + v);
          mode_flows[mode->name].emplace(v, expr_at(line.substr(eq + 1), lineno));
        }
        break;
      }
      case Section::Transition: {
        if (head == "guard") {
          transition->guard = pred_at(rest, lineno);
        } else if (head == "havoc") {
          for (const auto& v : detail::split_list(rest)) transition->reset.havoc.push_back(v);
        } else if (head == "relation") {
          transition->reset.relation = pred_at(rest, lineno);
        } else {
          auto assign = line.find(":=");
          if (assign == std::string::npos) throw ModelParseError(lineno, "expected 'x := expr'");
          std::string v = detail::trim(line.substr(0, assign));
          transition->reset.assignments.push_back({v, expr_at(line.substr(assign + 2), lineno)});
        }
        break;
      }
      case Section::Strategy: {
        if (head.rfind("box ", 0) == 0) {
          std::string key = detail::trim(head.substr(4));
          mf.strategy.boxes[key] = detail::parse_box(rest, lineno);
        } else if (head == "default") {
          mf.strategy.global = strategy_at(rest, lineno);
        } else if (head.find('.') == std::string::npos) {
          try {
            mf.strategy.by_kind[parse_site(head)] = strategy_at(rest, lineno);
          } catch (const std::invalid_argument& e) {
            throw ModelParseError(lineno, e.what());
          }
        } else {
          mf.strategy.by_site[head] = strategy_at(rest, lineno);
        }
        break;
      }
      case Section::Ledger: {
        auto eq = line.find('=');
        auto bar = line.rfind('|');
        if (eq == std::string::npos || bar == std::string::npos || bar < eq) {
          throw ModelParseError(lineno, "expected 'v = definition | argument'");
        }
        ledger_lines.emplace_back(lineno, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1, bar - eq - 1)),
                                  detail::trim(line.substr(bar + 1)));
        break;
      }
      case Section::Audit: {
        // "site variable strategy: note"
        auto c = line.find(':');
        std::string left = detail::trim(line.substr(0, c));
        std::string note = c == std::string::npos ? "" : detail::trim(line.substr(c + 1));
        auto parts = detail::split_list(left, ' ');
        parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
        if (parts.size() != 3) throw ModelParseError(lineno, "expected 'site variable strategy: note'");
        mf.audit.push_back({parts[0], parts[1], strategy_at(parts[2], lineno), note});
        break;
      }
      case Section::Warnings: mf.warnings.push_back(line); break;
    }
  }

  if (!have_vars) throw ModelParseError(lineno, "missing variables section");
  auto originals = mf.originals();
  for (auto& m : mf.system.modes) {
    auto& fl = mode_flows[m.name];
    for (const auto& v : mf.system.vars) {
      auto it = fl.find(v);
      if (it == fl.end()) throw ModelParseError(lineno, "mode " + m.name + " has no flow for " + v);
      m.field.vars.push_back(v);
      m.field.rhs.push_back(it->second);
    }
  }

  if (!ledger_lines.empty() || !mf.fresh.empty()) {
    mf.has_ledger = true;
    mf.ledger = ReplacementLedger(originals, prefix);
    for (const auto& v : originals) mf.ledger.reserve(v);
    std::vector<std::string> all = originals;
    all.insert(all.end(), mf.fresh.begin(), mf.fresh.end());
    for (const auto& [ln, name, def, arg] : ledger_lines) {
      Expr d = expr_at(def, ln);
      Expr a = expr_at(arg, ln);
      if (!is_polynomial(a)) throw ModelParseError(ln, "ledger argument must be polynomial");
      mf.ledger.restore(detail::entry_from_definition(name, d, to_canonical_poly(a, all), ln));
    }
    if (mf.ledger.names() != mf.fresh) throw ModelParseError(lineno, "ledger does not match the fresh variables");
  }
  try {
    mf.system.validate();
  } catch (const InvalidModel& e) {
    throw ModelParseError(lineno, e.what());
  }
  return mf;
}

namespace detail {

inline void print_modes_and_transitions(std::ostream& os, const HybridSystem& h) {
  for (const auto& m : h.modes) {
    os << "mode " << m.name << ":\n";
    for (std::size_t i = 0; i < m.field.vars.size(); ++i) os << "  " << m.field.vars[i] << "' = " << m.field.rhs[i] << "\n";
    os << "  init: " << m.init << "\n";
    os << "  domain: " << m.domain << "\n";
    if (!m.unsafe.is_false()) os << "  unsafe: " << m.unsafe << "\n";
  }
  for (const auto& t : h.transitions) {
    os << "transition " << t.name << ": " << t.source << " -> " << t.target << "\n";
    os << "  guard: " << t.guard << "\n";
    for (const auto& a : t.reset.assignments) os << "  " << a.variable << " := " << a.value << "\n";
    if (!t.reset.havoc.empty()) {
      os << "  havoc: ";
      for (std::size_t i = 0; i < t.reset.havoc.size(); ++i) os << (i ? ", " : "") << t.reset.havoc[i];
      os << "\n";
    }
    if (!t.reset.relation.is_true()) os << "  relation: " << t.reset.relation << "\n";
  }
}

inline void print_strategy(std::ostream& os, const AbstractionStrategy& s) {
  os << "strategy:\n";
  os << "  default: " << s.global.str() << "\n";
  for (const auto& [k, v] : s.by_kind) os << "  " << site_name(k) << ": " << v.str() << "\n";
  for (const auto& [k, v] : s.by_site) os << "  " << k << ": " << v.str() << "\n";
  for (const auto& [k, b] : s.boxes) os << "  box " << k << ": " << print_box(b) << "\n";
}

inline void print_list(std::ostream& os, const std::vector<std::string>& items) {
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? ", " : "") << items[i];
}

}  // namespace detail

inline std::string print_model(const HybridSystem& h, const AbstractionStrategy* strategy = nullptr) {
  std::ostringstream os;
  os << "variables: ";
  detail::print_list(os, h.vars);
  os << "\n";
  if (h.fresh_prefix != "v") os << "prefix: " << h.fresh_prefix << "\n";
  detail::print_modes_and_transitions(os, h);
  if (strategy != nullptr) detail::print_strategy(os, *strategy);
  return os.str();
}

// Native form of an abstraction; parse_model reads it back.
inline std::string print_result(const AbstractionResult& r) {
  std::ostringstream os;
  os << "variables: ";
  detail::print_list(os, r.ledger.originals());
  os << "\n";
  os << "prefix: " << r.ledger.prefix() << "\n";
  if (!r.ledger.empty()) {
    os << "fresh: ";
    detail::print_list(os, r.ledger.names());
    os << "\n";
  }
  detail::print_modes_and_transitions(os, r.system);
  if (!r.ledger.empty()) {
    os << "ledger:\n";
    for (const auto& e : r.ledger.entries()) {
      os << "  " << e.name << " = " << e.definition << " | " << poly_expr(e.argument, r.ledger.all_variables()) << "\n";
    }
  }
  for (const auto& m : r.system.modes) {
    os << "used " << m.name << ":";
    const auto& u = r.used.at(m.name);
    std::vector<std::string> names;
    for (const auto& n : r.ledger.names()) {
      if (u.count(n) != 0) names.push_back(n);
    }
    if (!names.empty()) os << " ";
    detail::print_list(os, names);
    os << "\n";
  }
  if (!r.audit.empty()) {
    os << "audit:\n";
    for (const auto& a : r.audit) {
      os << "  " << a.site << " " << a.variable << " " << a.strategy.str() << ":";
      if (!a.note.empty()) os << " " << a.note;
      os << "\n";
    }
  }
  if (!r.warnings.empty()) {
    os << "warnings:\n";
    for (const auto& w : r.warnings) os << "  " << w << "\n";
  }
  return os.str();
}

// Rebuilds an abstraction result from a native file.
inline AbstractionResult result_from_model(const ModelFile& mf) {
  AbstractionResult r;
  r.system = mf.system;
  r.ledger = mf.has_ledger ? mf.ledger : ReplacementLedger(mf.originals(), mf.system.fresh_prefix);
  for (const auto& m : mf.system.modes) {
    auto it = mf.used.find(m.name);
    r.used[m.name] = it == mf.used.end() ? std::set<std::string>{} : it->second;
    r.theta[m.name] = mode_theta(r.ledger, r.used[m.name]);
  }
  for (auto& m : r.system.modes) {
    for (const auto& e : r.ledger.entries()) {
      if (r.used[m.name].count(e.name) == 0) continue;
      auto c = domain_conditions(e);
      m.field.open_domain.insert(m.field.open_domain.end(), c.begin(), c.end());
    }
  }
  // The file does not carry the source system. Substituting the ledger
  // definitions gives an equivalent original field for each mode.
  auto defs = r.ledger.definitions();
  auto originals = r.ledger.originals();
  r.original.vars = originals;
  r.original.fresh_prefix = r.ledger.prefix();
  auto subst = [&](const Expr& e) { return substitute(e, defs); };
  for (const auto& m : r.system.modes) {
    Mode o;
    o.name = m.name;
    std::vector<std::pair<std::string, Expr>> rhs;
    for (const auto& v : originals) rhs.emplace_back(v, substitute(m.field.rhs_of(v), defs));
    o.field = make_odes(rhs);
    o.init = map_atoms(m.init, subst);
    o.domain = map_atoms(m.domain, subst);
    o.unsafe = map_atoms(m.unsafe, subst);
    r.original.modes.push_back(o);
  }
  r.audit = mf.audit;
  r.warnings = mf.warnings;
  return r;
}

namespace detail {

inline bool same_predicate(const Predicate& a, const Predicate& b) { return a == b; }

inline bool same_system(const HybridSystem& a, const HybridSystem& b) {
  if (a.vars != b.vars || a.modes.size() != b.modes.size() || a.transitions.size() != b.transitions.size()) return false;
  for (std::size_t i = 0; i < a.modes.size(); ++i) {
    const auto& x = a.modes[i];
    const auto& y = b.modes[i];
    if (x.name != y.name || x.field.vars != y.field.vars || x.field.rhs != y.field.rhs) return false;
    if (!(x.init == y.init) || !(x.domain == y.domain) || !(x.unsafe == y.unsafe)) return false;
  }
  for (std::size_t i = 0; i < a.transitions.size(); ++i) {
    const auto& x = a.transitions[i];
    const auto& y = b.transitions[i];
    if (x.name != y.name || x.source != y.source || x.target != y.target || !(x.guard == y.guard)) return false;
    if (x.reset.havoc != y.reset.havoc || !(x.reset.relation == y.reset.relation)) return false;
    if (x.reset.assignments.size() != y.reset.assignments.size()) return false;
    for (std::size_t k = 0; k < x.reset.assignments.size(); ++k) {
      if (x.reset.assignments[k].variable != y.reset.assignments[k].variable ||
          x.reset.assignments[k].value != y.reset.assignments[k].value) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace detail

// Equality of everything a native file records.
inline bool structurally_equal(const AbstractionResult& a, const AbstractionResult& b) {
  if (!detail::same_system(a.system, b.system)) return false;
  if (a.ledger.originals() != b.ledger.originals() || a.ledger.size() != b.ledger.size()) return false;
  for (std::size_t i = 0; i < a.ledger.size(); ++i) {
    const auto& x = a.ledger[i];
    const auto& y = b.ledger[i];
    if (x.name != y.name || x.kind != y.kind || x.root != y.root || x.definition != y.definition ||
        !(x.argument == y.argument)) {
      return false;
    }
  }
  if (a.used != b.used || a.warnings != b.warnings || a.audit.size() != b.audit.size()) return false;
  for (std::size_t i = 0; i < a.audit.size(); ++i) {
    if (a.audit[i].site != b.audit[i].site || a.audit[i].variable != b.audit[i].variable ||
        !(a.audit[i].strategy == b.audit[i].strategy) || a.audit[i].note != b.audit[i].note) {
      return false;
    }
  }
  return true;
}

}  // namespace ehs
