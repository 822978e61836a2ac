// ehs2phs: abstracts elementary hybrid systems into polynomial ones and
// drives simulation, sampled invariant checks and exports.
//
// Exit codes: 0 success, 1 input or validation error, 2 a check failed,
// 3 a run could not complete.

#include "ehs/export.hpp"
#include "ehs/simulate.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

using namespace ehs;

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kCheckFailed = 2;
constexpr int kRunFailed = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string output = "-";
  std::string report;
  std::uint64_t seed = 1;
  bool verbose = false;
};

// key: value lines, in insertion order.
class Report {
 public:
  template <class T>
  void add(const std::string& key, const T& value) {
    std::ostringstream os;
    os << std::setprecision(10) << value;
    lines_.emplace_back(key, os.str());
  }
  std::string str() const {
    std::string out;
    for (const auto& [k, v] : lines_) out += k + ": " + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

// The report goes to --report when given. Otherwise it shares stdout with a
// primary output written to a file, or goes to stderr.
void emit_report(const Globals& g, const Report& r, bool primary_on_stdout) {
  if (!g.report.empty()) {
    write_text(g.report, r.str());
  } else if (primary_on_stdout) {
    std::cerr << r.str();
  } else {
    std::cout << r.str();
  }
}

ModelFile load_model(const std::string& path) {
  try {
    return parse_model(read_file(path));
  } catch (const ModelParseError& e) {
    throw InputError(path + ":" + std::to_string(e.line()) + ": " + std::string(e.what()).substr(std::string(e.what()).find(':') + 2));
  }
}

AbstractionResult abstraction_of(const ModelFile& mf) {
  if (mf.has_ledger) return result_from_model(mf);
  try {
    return abstract_ehs(mf.system, mf.strategy);
  } catch (const StrategyInapplicable& e) {
    throw InputError(e.what());
  } catch (const InvalidModel& e) {
    throw InputError(e.what());
  }
}

const Mode& pick_mode(const HybridSystem& h, const std::string& name) {
  if (!name.empty()) {
    const Mode* m = h.mode(name);
    if (m == nullptr) throw InputError("unknown mode " + name);
    return *m;
  }
  for (const auto& m : h.modes) {
    if (!m.init.is_false()) return m;
  }
  throw InputError("no mode has an initial set");
}

Box mode_box(const AbstractionStrategy& s, const std::string& mode) {
  auto it = s.boxes.find(mode);
  return it == s.boxes.end() ? Box{} : it->second;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

std::string theta_text(const SimulationMap& theta) {
  std::vector<std::string> parts;
  for (const auto& c : theta.components) parts.push_back(c.str());
  return "(" + join(parts) + ")";
}

void print_audit(const AbstractionResult& r) {
  for (const auto& a : r.audit) {
    std::cerr << "audit " << a.site << " " << a.variable << " " << a.strategy.str() << (a.note.empty() ? "" : ": " + a.note)
              << "\n";
  }
}

// ---------------------------------------------------------------------------

int cmd_transform(const Globals& g, const std::string& input) {
  ModelFile mf = load_model(input);
  if (mf.has_ledger) throw InputError(input + " is already abstracted");
  auto t0 = std::chrono::steady_clock::now();
  AbstractionResult r = abstraction_of(mf);
  auto checks = check_modes(r);
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  write_text(g.output, print_result(r));
  Report rep;
  rep.add("command", "transform");
  rep.add("input", input);
  rep.add("modes", r.system.modes.size());
  rep.add("original_variables", join(r.ledger.originals()));
  rep.add("fresh_variables", r.ledger.size());
  for (const auto& e : r.ledger.entries()) rep.add("ledger." + e.name, e.definition.str());
  for (const auto& [mode, theta] : r.theta) rep.add("theta." + mode, theta_text(theta));
  bool ok = true;
  for (const auto& [mode, report] : checks) {
    rep.add("check." + mode, report.passed() ? "passed" : "failed");
    if (!report.passed()) {
      ok = false;
      std::istringstream lines(report.str());
      std::string line;
      while (std::getline(lines, line)) {
        if (!line.empty()) rep.add("residual." + mode, line);
      }
    }
  }
  for (std::size_t i = 0; i < r.warnings.size(); ++i) rep.add("warning." + std::to_string(i + 1), r.warnings[i]);
  rep.add("time_ms", ms);
  if (g.verbose) print_audit(r);
  emit_report(g, rep, g.output == "-");
  if (!ok) std::cerr << "symbolic simulation check failed\n";
  return ok ? kOk : kCheckFailed;
}

struct CheckOptions {
  double time = 2.0;
  double step = 1e-3;
  double tol = 1e-6;
  std::size_t points = 10;
};

int cmd_check(const Globals& g, const std::string& original, const std::string& abstracted, const CheckOptions& o) {
  ModelFile a = load_model(original);
  ModelFile b = load_model(abstracted);
  if (a.has_ledger) throw InputError(original + " must be an unabstracted model");
  AbstractionResult r = b.has_ledger ? result_from_model(b) : abstraction_of(b);
  if (r.ledger.originals() != a.system.vars) {
    throw InputError("variables of " + abstracted + " do not extend those of " + original);
  }
  if (r.system.modes.size() != a.system.modes.size()) throw InputError("mode sets differ");

  Report rep;
  rep.add("command", "check");
  rep.add("time", o.time);
  rep.add("step", o.step);
  rep.add("tolerance", o.tol);
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.system.modes.size(); ++i) {
    const Mode& m = a.system.modes[i];
    const Mode& y = r.system.modes[i];
    if (m.name != y.name) throw InputError("mode " + m.name + " has no counterpart");
    if (m.init.is_false()) continue;
    std::mt19937_64 rng(g.seed * 0x9E3779B97F4A7C15ULL + i);
    std::vector<State> pts;
    try {
      pts = sample_region(m.init, a.system.vars, intersect(mode_box(a.strategy, m.name), derive_box(m.domain)), o.points, rng);
    } catch (const std::invalid_argument& e) {
      throw InputError(std::string("mode ") + m.name + ": " + e.what() + "; add a box to the strategy block");
    } catch (const EmptySampleRegion& e) {
      throw InputError(e.what());
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      std::string key = "point." + m.name + "." + std::to_string(k + 1);
      try {
        auto res = check_trajectory_equivalence(m.field, y.field, r.theta.at(m.name), pts[k], o.time, o.step, o.tol);
        ++completed;
        worst = std::max(worst, res.max_deviation);
        if (!res.passed) ++failed;
        std::ostringstream os;
        os << std::setprecision(6) << "max_deviation " << res.max_deviation << " at t=" << res.time_of_max << " ("
           << res.variable_of_max << ") " << (res.passed ? "ok" : "exceeds tolerance");
        rep.add(key, os.str());
      } catch (const DomainExit& e) {
        ++skipped;
        rep.add(key, std::string("domain exit: ") + e.what());
      } catch (const NonFiniteState& e) {
        ++skipped;
        rep.add(key, std::string("non-finite state: ") + e.what());
      }
    }
  }
  rep.add("points_completed", completed);
  rep.add("points_skipped", skipped);
  rep.add("points_failed", failed);
  rep.add("max_deviation", worst);
  bool ok = failed == 0 && completed > 0;
  rep.add("result", ok ? "passed" : "failed");
  emit_report(g, rep, false);
  return ok ? kOk : kCheckFailed;
}

struct SimulateOptions {
  double time = 10.0;
  double step = 1e-3;
  std::size_t jumps = 100;
  std::string mode;
  std::vector<std::string> monitors;
  bool may_dwell = false;
};

int cmd_simulate(const Globals& g, const std::string& input, const SimulateOptions& o) {
  ModelFile mf = load_model(input);
  std::optional<AbstractionResult> abstraction;
  if (mf.has_ledger) abstraction = result_from_model(mf);
  const HybridSystem& h = abstraction ? abstraction->system : mf.system;
  const Mode& start = pick_mode(h, o.mode);

  // Initial state: sampled from the initial set over the original
  // variables, then mapped into the abstraction when there is one.
  std::mt19937_64 rng(g.seed);
  State x0;
  try {
    if (abstraction) {
      const Mode* orig = abstraction->original.mode(start.name);
      auto p = sample_region(orig->init, abstraction->original.vars,
                             intersect(mode_box(mf.strategy, start.name), derive_box(orig->domain)), 1, rng);
      x0 = abstraction->theta.at(start.name).apply(valuation_of(p.front(), abstraction->original.vars));
    } else {
      x0 = sample_region(start.init, h.vars, intersect(mode_box(mf.strategy, start.name), derive_box(start.domain)), 1, rng)
               .front();
    }
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("initial set of ") + start.name + ": " + e.what());
  } catch (const EmptySampleRegion& e) {
    throw InputError(e.what());
  }

  std::vector<std::pair<std::string, Tape>> monitors;
  for (const auto& spec : o.monitors) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) throw InputError("monitor must be name=expression");
    try {
      monitors.emplace_back(spec.substr(0, eq), Tape(parse(spec.substr(eq + 1)), h.vars));
    } catch (const ParseError& e) {
      throw InputError("monitor " + spec + ": " + e.what());
    } catch (const UnboundVariable& e) {
      throw InputError("monitor " + spec + ": unknown variable " + e.what());
    }
  }

  HybridRunOptions opt;
  opt.duration = o.time;
  opt.h = o.step;
  opt.max_jumps = o.jumps;
  opt.semantics = o.may_dwell ? GuardSemantics::MayDwell : GuardSemantics::Urgent;
  if (abstraction) opt.havoc = theta_havoc(*abstraction);
  HybridTrace trace;
  try {
    trace = run_hybrid(h, start.name, x0, opt);
  } catch (const DomainExit& e) {
    throw RunError(std::string("simulation left the domain: ") + e.what());
  } catch (const NonFiniteState& e) {
    throw RunError(e.what());
  }
  write_text(g.output, trace_csv(trace));

  Report rep;
  rep.add("command", "simulate");
  rep.add("seed", g.seed);
  rep.add("start_mode", start.name);
  rep.add("initial_state", [&] {
    std::ostringstream os;
    os << std::setprecision(12);
    for (std::size_t i = 0; i < x0.size(); ++i) os << (i ? ", " : "") << h.vars[i] << "=" << x0[i];
    return os.str();
  }());
  rep.add("jumps", trace.jumps.size());
  rep.add("stop_reason", trace.stop_reason);
  double t_end = trace.segments.empty() ? 0.0 : trace.segments.back().trajectory.times.back();
  rep.add("end_time", t_end);
  for (std::size_t k = 0; k < trace.jumps.size(); ++k) {
    const auto& j = trace.jumps[k];
    std::ostringstream os;
    os << std::setprecision(10) << j.transition << " at t=" << j.time;
    rep.add("jump." + std::to_string(k + 1), os.str());
  }
  for (const auto& [name, tape] : monitors) {
    double lo = Interval::inf;
    double hi = -Interval::inf;
    double first = 0.0;
    double last = 0.0;
    bool seen = false;
    for (const auto& seg : trace.segments) {
      for (const auto& x : seg.trajectory.states) {
        double v = tape(x);
        if (!seen) first = v;
        seen = true;
        last = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    rep.add("monitor." + name + ".start", first);
    rep.add("monitor." + name + ".end", last);
    rep.add("monitor." + name + ".min", lo);
    rep.add("monitor." + name + ".max", hi);
    for (std::size_t k = 0; k < trace.jumps.size(); ++k) {
      std::ostringstream os;
      os << std::setprecision(10) << tape(trace.jumps[k].pre) << " -> " << tape(trace.jumps[k].post);
      rep.add("monitor." + name + ".jump." + std::to_string(k + 1), os.str());
    }
  }
  emit_report(g, rep, g.output == "-");
  return kOk;
}

struct VerifyOptions {
  std::string invariant;
  std::size_t samples = 10000;
  double slack = 1e-4;
  std::string mode;
  bool strict = false;
};

std::string strip_comments(const std::string& text) {
  std::string out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    out += line + " ";
  }
  return out;
}

int cmd_verify(const Globals& g, const std::string& input, const VerifyOptions& o) {
  ModelFile mf = load_model(input);
  if (o.invariant.empty()) throw InputError("--invariant is required");
  Predicate inv;
  try {
    inv = parse_predicate(strip_comments(read_file(o.invariant)));
    invariant_expression(inv);
  } catch (const ParseError& e) {
    throw InputError(o.invariant + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(o.invariant + ": " + e.what());
  }
  const Mode& m = pick_mode(mf.system, o.mode);
  ContinuousSystem c;
  c.vars = mf.system.vars;
  c.field = m.field;
  c.init = m.init;
  c.domain = m.domain;
  c.unsafe = m.unsafe;
  c.name = m.name;
  SampleOptions so;
  so.samples = o.samples;
  so.seed = g.seed;
  so.box = mode_box(mf.strategy, m.name);
  for (const auto& v : variables(inv)) {
    if (std::find(c.vars.begin(), c.vars.end(), v) == c.vars.end()) throw InputError("invariant mentions unknown variable " + v);
  }
  InvariantReport r;
  try {
    r = check_invariant_sampled(c, inv, m.unsafe, so, o.slack);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string(e.what()) + "; add a box to the strategy block");
  } catch (const EmptySampleRegion& e) {
    throw InputError(e.what());
  }
  Report rep;
  rep.add("command", "verify-invariant");
  rep.add("mode", m.name);
  rep.add("samples", o.samples);
  rep.add("slack", o.slack);
  std::istringstream lines(r.str());
  std::string line;
  while (std::getline(lines, line)) {
    auto c2 = line.find(": ");
    if (c2 != std::string::npos) rep.add(line.substr(0, c2), line.substr(c2 + 2));
  }
  bool ok = r.c1.passed && r.c3.passed && (!o.strict || r.c2.passed);
  rep.add("result", ok ? "no violation found" : "violation found");
  emit_report(g, rep, false);
  return ok ? kOk : kCheckFailed;
}

struct EmitOptions {
  unsigned degree = 2;
  std::string scope = "originals";
  std::string prefix = "u";
};

int cmd_emit(const Globals& g, const std::string& input, const EmitOptions& o) {
  ModelFile mf = load_model(input);
  AbstractionResult r = abstraction_of(mf);
  TemplateSpec t;
  t.degree = o.degree;
  t.prefix = o.prefix;
  try {
    t.scope = parse_scope(o.scope);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  ConstraintDocument doc;
  try {
    doc = emit_constraints(r, t);
  } catch (const NonPolynomialInput& e) {
    throw InputError(e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  write_text(g.output, doc.text);
  Report rep;
  rep.add("command", "emit-constraints");
  rep.add("template_degree", t.degree);
  rep.add("template_scope", scope_name(t.scope));
  rep.add("parameters", doc.parameter_count());
  for (const auto& m : doc.templates) rep.add("parameters." + m.mode, m.parameters.size());
  for (const auto& a : doc.audit) rep.add("pruned." + a.site, a.note.substr(a.note.find(": ") + 2));
  emit_report(g, rep, g.output == "-");
  return kOk;
}

struct ExportOptions {
  std::string format = "native";
  ReachSettings reach;
};

int cmd_export(const Globals& g, const std::string& input, const ExportOptions& o) {
  ModelFile mf = load_model(input);
  AbstractionResult r = abstraction_of(mf);
  ExportFormat f;
  try {
    f = parse_format(o.format);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  std::string text;
  try {
    text = export_system(r, f, o.reach);
  } catch (const UnsupportedConstruct& e) {
    throw InputError(e.what());
  }
  write_text(g.output, text);
  Report rep;
  rep.add("command", "export");
  rep.add("format", o.format);
  rep.add("state_variables", r.system.vars.size());
  rep.add("modes", r.system.modes.size());
  rep.add("jumps", r.system.transitions.size());
  emit_report(g, rep, g.output == "-");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial abstraction of elementary hybrid systems"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML or INI file with option defaults; flags win");

  Globals g;
  app.add_option("-o,--output", g.output, "Primary output file, - for stdout");
  app.add_option("--report", g.report, "Write the key: value report here");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_flag("-v,--verbose", g.verbose, "Print the abstraction audit trail");

  std::string input;
  std::string second;

  auto* transform = app.add_subcommand("transform", "Abstract a model into a polynomial hybrid system");
  transform->add_option("input", input, "Model file")->required();

  CheckOptions co;
  auto* check = app.add_subcommand("check", "Compare trajectories of a model and its abstraction");
  check->add_option("original", input, "Original model")->required();
  check->add_option("abstracted", second, "Abstracted model")->required();
  check->add_option("--time", co.time, "Integration horizon");
  check->add_option("--step", co.step, "RK4 step");
  check->add_option("--tol", co.tol, "Deviation tolerance");
  check->add_option("--points", co.points, "Sampled initial points per mode");

  SimulateOptions so;
  auto* simulate = app.add_subcommand("simulate", "Simulate a model and write a CSV trace");
  simulate->add_option("input", input, "Model file")->required();
  simulate->add_option("--time", so.time, "Time bound");
  simulate->add_option("--step", so.step, "RK4 step");
  simulate->add_option("--jumps", so.jumps, "Jump bound");
  simulate->add_option("--mode", so.mode, "Start mode");
  simulate->add_option("--monitor", so.monitors, "name=expression tracked along the trace");
  simulate->add_flag("--may-dwell", so.may_dwell, "Take a jump only when the domain is left");

  VerifyOptions vo;
  auto* verify = app.add_subcommand("verify-invariant", "Sampled check of a candidate invariant p <= 0");
  verify->add_option("input", input, "Model file")->required();
  verify->add_option("--invariant", vo.invariant, "File holding the invariant")->required();
  verify->add_option("--samples", vo.samples, "Samples per condition");
  verify->add_option("--slack", vo.slack, "Allowed positive margin");
  verify->add_option("--mode", vo.mode, "Mode to check");
  verify->add_flag("--strict", vo.strict, "Also fail on the Lie derivative condition");

  EmitOptions eo;
  auto* emit = app.add_subcommand("emit-constraints", "Write the invariant synthesis problem for a template");
  emit->add_option("input", input, "Model file")->required();
  emit->add_option("--template-degree", eo.degree, "Template degree")->check(CLI::PositiveNumber);
  emit->add_option("--template-scope", eo.scope, "originals or originals-plus-fresh");
  emit->add_option("--template-prefix", eo.prefix, "Parameter name prefix");

  ExportOptions xo;
  auto* exp = app.add_subcommand("export", "Write the abstraction in another format");
  exp->add_option("input", input, "Model file")->required();
  exp->add_option("--format", xo.format, "native, smt or flowstar");
  exp->add_option("--time", xo.reach.time, "Time horizon for reachability settings");
  exp->add_option("--step", xo.reach.step, "Step for reachability settings");
  exp->add_option("--jumps", xo.reach.jumps, "Jump bound for reachability settings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*transform) return cmd_transform(g, input);
    if (*check) return cmd_check(g, input, second, co);
    if (*simulate) return cmd_simulate(g, input, so);
    if (*verify) return cmd_verify(g, input, vo);
    if (*emit) return cmd_emit(g, input, eo);
    if (*exp) return cmd_export(g, input, xo);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const RunError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailed;
  } catch (const InvalidModel& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailed;
  }
  return kOk;
}
