#pragma once

// Numerical validation: RK4 integration, trajectory equivalence under a
// simulation map, hybrid runs with guard events and sampled invariant checks.

#include "ehs/compiled.hpp"
#include "ehs/diff.hpp"
#include "ehs/hybrid.hpp"
#include "ehs/polynomialize.hpp"
#include "ehs/predicate.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ehs {

class JumpLimitExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySampleRegion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using State = std::vector<double>;

inline State state_of(const Valuation& env, const std::vector<std::string>& vars) {
  State s;
  for (const auto& v : vars) {
    auto it = env.find(v);
    if (it == env.end()) throw UnboundVariable(v);
    s.push_back(it->second);
  }
  return s;
}

inline Valuation valuation_of(const State& s, const std::vector<std::string>& vars) {
  Valuation env;
  for (std::size_t i = 0; i < vars.size(); ++i) env[vars[i]] = s[i];
  return env;
}

// Predicate with compiled atoms.
class CompiledPredicate {
 public:
  CompiledPredicate() = default;
  CompiledPredicate(const Predicate& p, const std::vector<std::string>& vars) : kind_(p.kind()) {
    if (p.kind() == Predicate::Kind::Atom) {
      rel_ = p.atom().rel;
      tape_ = Tape(p.atom().lhs, vars);
    }
    for (const auto& c : p.children()) children_.emplace_back(c, vars);
  }

  bool holds_at(const State& x, double tol = 0.0) const {
    switch (kind_) {
      case Predicate::Kind::True: return true;
      case Predicate::Kind::False: return false;
      case Predicate::Kind::Atom: {
        double v = tape_(x);
        if (std::isnan(v)) return false;
        if (tol > 0) {
          switch (rel_) {
            case Rel::Eq: return std::fabs(v) <= tol;
            case Rel::Ne: return std::fabs(v) > tol;
            case Rel::Le:
            case Rel::Lt: return v <= tol;
            default: return v >= -tol;
          }
        }
        return holds(rel_, v);
      }
      case Predicate::Kind::Not: return !children_.front().holds_at(x, tol);
      case Predicate::Kind::And:
        for (const auto& c : children_) {
          if (!c.holds_at(x, tol)) return false;
        }
        return true;
      case Predicate::Kind::Or:
        for (const auto& c : children_) {
          if (c.holds_at(x, tol)) return true;
        }
        return false;
    }
    return false;
  }

  double robustness_at(const State& x) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
      case Predicate::Kind::True: return inf;
      case Predicate::Kind::False: return -inf;
      case Predicate::Kind::Atom: return robustness(rel_, tape_(x));
      case Predicate::Kind::Not: return -children_.front().robustness_at(x);
      case Predicate::Kind::And: {
        double r = inf;
        for (const auto& c : children_) r = std::min(r, c.robustness_at(x));
        return r;
      }
      case Predicate::Kind::Or: {
        double r = -inf;
        for (const auto& c : children_) r = std::max(r, c.robustness_at(x));
        return r;
      }
    }
    return 0.0;
  }

 private:
  Predicate::Kind kind_ = Predicate::Kind::True;
  Rel rel_ = Rel::Le;
  Tape tape_;
  std::vector<CompiledPredicate> children_;
};

// ---------------------------------------------------------------------------
// Continuous integration

struct Trajectory {
  double h = 0.0;
  std::vector<std::string> vars;
  std::vector<double> times;
  std::vector<State> states;

  const State& final_state() const { return states.back(); }
};

inline void rk4_step(const CompiledField& f, const State& x, double h, State& out) {
  const std::size_t n = x.size();
  State k1, k2, k3, k4, tmp(n);
  f(x, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  f(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  f(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  f(tmp, k4);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline void require_finite(const State& x, double t) {
  for (double v : x) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite state at t = " << t;
      throw NonFiniteState(os.str());
    }
  }
}

inline std::size_t step_count(double T, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  if (T < 0.0) throw std::invalid_argument("duration must be non-negative");
  return static_cast<std::size_t>(std::ceil(T / h - 1e-9));
}

inline Trajectory integrate(const OdeSystem& odes, const State& x0, double T, double h = 1e-3) {
  if (x0.size() != odes.vars.size()) throw std::invalid_argument("initial state has wrong dimension");
  CompiledField f(odes.vars, odes.rhs);
  for (const auto& c : odes.open_domain) {
    Tape t(c.atom.lhs, odes.vars);
    if (!holds(c.atom.rel, t(x0))) throw DomainExit("initial state violates " + c.reason, 0.0);
  }
  Trajectory tr;
  tr.h = h;
  tr.vars = odes.vars;
  tr.times.push_back(0.0);
  tr.states.push_back(x0);
  std::size_t n = step_count(T, h);
  State x = x0;
  State next;
  for (std::size_t k = 0; k < n; ++k) {
    double t = static_cast<double>(k) * h;
    double step = (k + 1 == n) ? T - t : h;
    try {
      rk4_step(f, x, step, next);
    } catch (const DomainExit& e) {
      throw DomainExit(e.what(), t);
    }
    require_finite(next, t + step);
    x.swap(next);
    tr.times.push_back(k + 1 == n ? T : t + step);
    tr.states.push_back(x);
  }
  return tr;
}

inline Trajectory integrate(const OdeSystem& odes, const Valuation& x0, double T, double h = 1e-3) {
  return integrate(odes, state_of(x0, odes.vars), T, h);
}

struct EquivalenceReport {
  double max_deviation = 0.0;
  double time_of_max = 0.0;
  std::string variable_of_max;
  double tolerance = 0.0;
  bool passed = true;
  std::size_t samples = 0;
};

// Integrates both systems, the abstraction from theta(x0), and compares
// theta(x(t_k)) with y(t_k) in the max norm.
inline EquivalenceReport check_trajectory_equivalence(const OdeSystem& original, const OdeSystem& abstracted,
                                                      const SimulationMap& theta, const State& x0, double T,
                                                      double h = 1e-3, double tol = 1e-6) {
  auto targets = theta.target_variables();
  std::vector<Tape> theta_tapes;
  for (std::size_t j = 0; j < abstracted.vars.size(); ++j) {
    auto it = std::find(targets.begin(), targets.end(), abstracted.vars[j]);
    if (it == targets.end()) throw std::invalid_argument("simulation map misses " + abstracted.vars[j]);
    theta_tapes.emplace_back(theta.components[static_cast<std::size_t>(it - targets.begin())], original.vars);
  }
  State y0;
  for (const auto& t : theta_tapes) y0.push_back(t(x0));
  Trajectory tx = integrate(original, x0, T, h);
  Trajectory ty = integrate(abstracted, y0, T, h);
  EquivalenceReport r;
  r.tolerance = tol;
  r.samples = tx.states.size();
  for (std::size_t k = 0; k < tx.states.size(); ++k) {
    for (std::size_t j = 0; j < theta_tapes.size(); ++j) {
      double d = std::fabs(theta_tapes[j](tx.states[k]) - ty.states[k][j]);
      if (d > r.max_deviation || std::isnan(d)) {
        r.max_deviation = std::isnan(d) ? std::numeric_limits<double>::infinity() : d;
        r.time_of_max = tx.times[k];
        r.variable_of_max = abstracted.vars[j];
      }
    }
  }
  r.passed = r.max_deviation <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// Hybrid runs

enum class GuardSemantics { Urgent, MayDwell };

struct HybridRunOptions {
  double duration = 10.0;
  double h = 1e-3;
  std::size_t max_jumps = 100;
  double event_tolerance = 1e-9;
  double guard_tolerance = 1e-6;
  GuardSemantics semantics = GuardSemantics::Urgent;
  bool strict_jump_limit = false;  // throw instead of stopping at the limit
  // Chooses post-state values of havocked variables; they keep their value otherwise.
  std::function<void(const Transition&, State&)> havoc;
};

struct JumpRecord {
  std::string transition;
  double time = 0.0;
  State pre;
  State post;
};

struct Segment {
  std::string mode;
  Trajectory trajectory;
};

struct HybridTrace {
  std::vector<std::string> vars;
  std::vector<Segment> segments;
  std::vector<JumpRecord> jumps;
  std::string stop_reason;
};

namespace detail {

struct CompiledTransition {
  const Transition* source = nullptr;
  CompiledPredicate guard;
  std::vector<std::pair<Tape, Rel>> crossings;  // atoms whose sign is watched
  std::vector<std::pair<std::size_t, Tape>> assignments;
};

inline void collect_crossings(const Predicate& p, const std::vector<std::string>& vars,
                              std::vector<std::pair<Tape, Rel>>& out) {
  if (p.kind() == Predicate::Kind::Atom) {
    if (p.atom().rel != Rel::Ne) out.emplace_back(Tape(p.atom().lhs, vars), p.atom().rel);
    return;
  }
  for (const auto& c : p.children()) collect_crossings(c, vars, out);
}

// Whether the watched atom has been reached on the way from a to b.
inline bool reached(Rel rel, double a, double b, double tol) {
  if (rel == Rel::Eq) return std::fabs(b) <= tol || (a < 0) != (b < 0);
  return holds(rel, b) || robustness(rel, b) >= -tol;
}

}  // namespace detail

inline HybridTrace run_hybrid(const HybridSystem& h, const std::string& start_mode, const State& x0,
                              const HybridRunOptions& opt = {}) {
  h.validate();
  if (h.mode(start_mode) == nullptr) throw InvalidModel("unknown start mode " + start_mode);
  const auto& vars = h.vars;

  std::map<std::string, CompiledField> fields;
  std::map<std::string, CompiledPredicate> domains;
  for (const auto& m : h.modes) {
    std::vector<Expr> rhs;
    for (const auto& v : vars) rhs.push_back(m.field.rhs_of(v));
    fields[m.name] = CompiledField(vars, rhs);
    domains[m.name] = CompiledPredicate(negation_normal_form(m.domain), vars);
  }
  std::map<std::string, std::vector<detail::CompiledTransition>> out_of;
  for (const auto& t : h.transitions) {
    detail::CompiledTransition ct;
    ct.source = &t;
    Predicate g = negation_normal_form(t.guard);
    ct.guard = CompiledPredicate(g, vars);
    detail::collect_crossings(g, vars, ct.crossings);
    for (const auto& a : t.reset.assignments) {
      auto idx = static_cast<std::size_t>(std::find(vars.begin(), vars.end(), a.variable) - vars.begin());
      ct.assignments.emplace_back(idx, Tape(a.value, vars));
    }
    out_of[t.source].push_back(std::move(ct));
  }

  HybridTrace trace;
  trace.vars = vars;
  std::string mode = start_mode;
  State x = x0;
  double t = 0.0;
  const double T = opt.duration;
  Segment seg{mode, Trajectory{opt.h, vars, {t}, {x}}};
  State next;
  State probe;
  bool just_jumped = false;

  while (t < T - 1e-12) {
    double step = std::min(opt.h, T - t);
    try {
      rk4_step(fields.at(mode), x, step, next);
    } catch (const DomainExit& e) {
      throw DomainExit(e.what(), t);
    }
    require_finite(next, t + step);

    // Earliest guard event within the step.
    const detail::CompiledTransition* fired = nullptr;
    double fire_at = step;
    for (const auto& ct : out_of[mode]) {
      for (const auto& [tape, rel] : ct.crossings) {
        double a = tape(x);
        double b = tape(next);
        // Leaving the surface. Right after a jump the located event point may
        // sit just short of it.
        if (rel == Rel::Eq && std::fabs(a) <= (just_jumped ? opt.guard_tolerance : opt.event_tolerance)) continue;
        if (rel != Rel::Eq && (holds(rel, a) || robustness(rel, a) >= -opt.event_tolerance)) continue;
        if (!detail::reached(rel, a, b, opt.event_tolerance)) continue;
        double lo = 0.0;
        double hi = step;
        while (hi - lo > opt.event_tolerance) {
          double mid = 0.5 * (lo + hi);
          rk4_step(fields.at(mode), x, mid, probe);
          if (detail::reached(rel, a, tape(probe), opt.event_tolerance)) {
            hi = mid;
          } else {
            lo = mid;
          }
        }
        if (hi >= fire_at && fired != nullptr) continue;
        rk4_step(fields.at(mode), x, hi, probe);
        if (!ct.guard.holds_at(probe, opt.guard_tolerance)) continue;
        if (opt.semantics == GuardSemantics::MayDwell && domains.at(mode).holds_at(probe, opt.guard_tolerance) &&
            domains.at(mode).robustness_at(next) >= -opt.guard_tolerance) {
          continue;  // may stay while the domain allows
        }
        fired = &ct;
        fire_at = hi;
      }
    }

    if (fired == nullptr) {
      if (domains.at(mode).robustness_at(next) < -opt.guard_tolerance &&
          !domains.at(mode).holds_at(next, opt.guard_tolerance)) {
        std::ostringstream os;
        os << "left the domain of mode " << mode << " at t = " << t + step << " without an enabled transition";
        throw DomainExit(os.str(), t + step);
      }
      x.swap(next);
      t += step;
      just_jumped = false;
      seg.trajectory.times.push_back(t);
      seg.trajectory.states.push_back(x);
      continue;
    }

    if (trace.jumps.size() >= opt.max_jumps) {
      if (opt.strict_jump_limit) throw JumpLimitExceeded("more than " + std::to_string(opt.max_jumps) + " jumps");
      trace.stop_reason = "jump limit";
      break;
    }
    rk4_step(fields.at(mode), x, fire_at, probe);
    t += fire_at;
    seg.trajectory.times.push_back(t);
    seg.trajectory.states.push_back(probe);
    trace.segments.push_back(std::move(seg));

    JumpRecord j;
    j.transition = fired->source->name;
    j.time = t;
    j.pre = probe;
    j.post = probe;
    for (const auto& [idx, tape] : fired->assignments) j.post[idx] = tape(probe);
    if (opt.havoc && !fired->source->reset.havoc.empty()) opt.havoc(*fired->source, j.post);
    require_finite(j.post, t);
    trace.jumps.push_back(j);

    mode = fired->source->target;
    x = j.post;
    just_jumped = true;
    seg = Segment{mode, Trajectory{opt.h, vars, {t}, {x}}};
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "time bound";
  if (!seg.trajectory.states.empty()) trace.segments.push_back(std::move(seg));
  return trace;
}

// Havocked fresh variables take their value under the target mode's map.
inline std::function<void(const Transition&, State&)> theta_havoc(const AbstractionResult& r) {
  return [&r](const Transition& t, State& post) {
    const auto& vars = r.system.vars;
    const auto& originals = r.ledger.originals();
    State x(post.begin(), post.begin() + static_cast<long>(originals.size()));
    const SimulationMap& theta = r.theta.at(t.target);
    auto targets = theta.target_variables();
    for (const auto& v : t.reset.havoc) {
      auto it = std::find(targets.begin(), targets.end(), v);
      if (it == targets.end()) continue;
      Tape tape(theta.components[static_cast<std::size_t>(it - targets.begin())], originals);
      post[static_cast<std::size_t>(std::find(vars.begin(), vars.end(), v) - vars.begin())] = tape(x);
    }
  };
}

// ---------------------------------------------------------------------------
// CSV

inline std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "t";
  for (const auto& v : tr.vars) os << "," << v;
  os << "\n";
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    os << tr.times[k];
    for (double v : tr.states[k]) os << "," << v;
    os << "\n";
  }
  return os.str();
}

inline std::string trace_csv(const HybridTrace& trace) {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "t,mode";
  for (const auto& v : trace.vars) os << "," << v;
  os << "\n";
  for (const auto& s : trace.segments) {
    for (std::size_t k = 0; k < s.trajectory.states.size(); ++k) {
      os << s.trajectory.times[k] << "," << s.mode;
      for (double v : s.trajectory.states[k]) os << "," << v;
      os << "\n";
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Sampled checks

struct SampleOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::size_t max_attempts_per_sample = 1000;
  Box box;  // bounds for variables the predicates leave open
};

// Rejection samples from region inside its enclosing box.
inline std::vector<State> sample_region(const Predicate& region, const std::vector<std::string>& vars,
                                        const Box& fallback, std::size_t n, std::mt19937_64& rng,
                                        std::size_t max_attempts_per_sample = 1000) {
  Box box = intersect(fallback, derive_box(region));
  std::vector<std::uniform_real_distribution<double>> dist;
  for (const auto& v : vars) {
    auto it = box.find(v);
    if (it == box.end() || !it->second.bounded()) {
      throw std::invalid_argument("no bounded sampling box for " + v);
    }
    dist.emplace_back(it->second.lo, std::nextafter(it->second.hi, Interval::inf));
  }
  CompiledPredicate p(region, vars);
  std::vector<State> out;
  const std::size_t budget = std::max<std::size_t>(n, 1) * max_attempts_per_sample;
  State x(vars.size());
  for (std::size_t attempt = 0; attempt < budget && out.size() < n; ++attempt) {
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const Interval& b = box.at(vars[i]);
      x[i] = b.is_point() ? b.lo : dist[i](rng);
    }
    bool inside = false;
    try {
      inside = p.holds_at(x);
    } catch (const DomainExit&) {
      inside = false;
    }
    if (inside) out.push_back(x);
  }
  if (out.empty()) throw EmptySampleRegion("no samples found in " + region.str());
  return out;
}

struct SampledCheck {
  std::string name;
  std::size_t samples = 0;
  double margin = -std::numeric_limits<double>::infinity();  // worst case, positive means violated
  State witness;
  bool passed = true;
};

struct InvariantReport {
  std::uint64_t seed = 0;
  double slack = 0.0;
  std::vector<std::string> vars;
  SampledCheck c1, c2, c3;

  bool passed() const { return c1.passed && c2.passed && c3.passed; }

  std::string str() const {
    std::ostringstream os;
    os << std::setprecision(9);
    os << "seed: " << seed << "\n";
    for (const SampledCheck* c : {&c1, &c2, &c3}) {
      os << c->name << "_margin: " << c->margin << "\n";
      os << c->name << ": "
         << (c->passed ? "no violation found at " + std::to_string(c->samples) + " samples"
                       : "violation found")
         << "\n";
    }
    return os.str();
  }
};

// The polynomial p of an invariant p <= 0.
inline Expr invariant_expression(const Predicate& inv) {
  if (inv.kind() != Predicate::Kind::Atom || (inv.atom().rel != Rel::Le && inv.atom().rel != Rel::Lt)) {
    throw std::invalid_argument("invariant must be a single atom p <= 0");
  }
  return inv.atom().lhs;
}

// C1: init implies p <= 0. C2: grad p . f <= 0 on the domain. C3: p <= 0
// excludes the unsafe set. A falsification check, not a proof.
inline InvariantReport check_invariant_sampled(const ContinuousSystem& sys, const Predicate& inv,
                                               const Predicate& unsafe, const SampleOptions& opt = {},
                                               double slack = 1e-4) {
  const Expr p = invariant_expression(inv);
  const auto& vars = sys.vars;
  Expr lie = lie_derivative(p, sys.field);
  Tape tp(p, vars);
  Tape tl(lie, vars);
  CompiledPredicate bad(unsafe, vars);

  InvariantReport r;
  r.seed = opt.seed;
  r.slack = slack;
  r.vars = vars;
  r.c1.name = "C1";
  r.c2.name = "C2";
  r.c3.name = "C3";
  Box domain_box = intersect(opt.box, derive_box(sys.domain));

  auto run = [&](SampledCheck& c, const Predicate& region, const Box& box, std::uint64_t stream,
                 const std::function<double(const State&)>& value) {
    std::mt19937_64 rng(opt.seed * 0x9E3779B97F4A7C15ULL + stream);
    auto pts = sample_region(region, vars, box, opt.samples, rng, opt.max_attempts_per_sample);
    c.samples = pts.size();
    for (const auto& x : pts) {
      double m = value(x);
      if (m > c.margin) {
        c.margin = m;
        c.witness = x;
      }
    }
    c.passed = c.margin <= slack;
  };

  run(r.c1, sys.init, intersect(domain_box, derive_box(sys.init)), 1, [&](const State& x) { return tp(x); });
  run(r.c2, sys.domain, domain_box, 2, [&](const State& x) { return tl(x); });
  if (unsafe.is_false()) {
    r.c3.samples = opt.samples;
  } else {
    run(r.c3, sys.domain && inv, domain_box, 3, [&](const State& x) { return bad.robustness_at(x); });
  }
  return r;
}

// Interval ranges of the fresh variables over a box of the originals.
inline Box ledger_box(const ReplacementLedger& ledger, const Box& x) {
  Box out = x;
  for (const auto& e : ledger.entries()) {
    try {
      out[e.name] = interval_eval(e.definition, x);
    } catch (const DomainViolation&) {
    }
  }
  return out;
}

}  // namespace ehs
