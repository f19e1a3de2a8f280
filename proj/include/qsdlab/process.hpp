#pragma once

// Event-driven simulation kernel: exponential clocks, thinning, paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "state.hpp"

namespace qsdlab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class EventKind { state_jump, catastrophe, extinction };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::state_jump: return "state-jump";
    case EventKind::catastrophe: return "catastrophe";
    case EventKind::extinction: return "extinction";
  }
  return "?";
}

struct JumpEvent {
  double time = 0.0;
  EventKind kind = EventKind::state_jump;
  // Jump displacement for state jumps; {p} for a fractional catastrophe.
  std::vector<double> displacement;

  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

struct SkeletonPoint {
  double time = 0.0;
  AbsorbedState state;

  friend bool operator==(const SkeletonPoint&, const SkeletonPoint&) = default;
};

struct PathOutcome {
  std::vector<SkeletonPoint> skeleton;
  // Absorption time; +inf when the path is still alive at the horizon.
  double tau_abs = kInfinity;
  std::vector<JumpEvent> events;
  RngStream seed;

  bool absorbed_before_horizon() const { return std::isfinite(tau_abs); }

  friend bool operator==(const PathOutcome&, const PathOutcome&) = default;
};

struct StepControls {
  double dt = 1e-2;                  // Euler step for diffusive parts
  bool full_truncation = true;       // sqrt(max(N, 0)) in the Feller term
  std::uint64_t max_events = 10'000'000;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("StepControls: dt must be positive and finite");
    if (max_events == 0) throw ValidationError("StepControls: max_events must be positive");
  }
};

// Non-finite state or event budget exhausted; carries the path so far.
class SimulationFault : public Error {
 public:
  SimulationFault(const std::string& what, PathOutcome partial) : Error(what), partial_(std::move(partial)) {}
  const PathOutcome& partial() const { return partial_; }

 private:
  PathOutcome partial_;
};

// Inverse-transform exponential draw: -ln(u) / rate, +inf for a zero rate.
inline double sample_waiting_time(double total_rate, double u) {
  if (total_rate < 0.0 || std::isnan(total_rate)) throw DomainError("sample_waiting_time: negative rate");
  if (!(u > 0.0 && u < 1.0)) throw DomainError("sample_waiting_time: u must lie in (0,1)");
  if (total_rate == 0.0) return kInfinity;
  return -std::log(u) / total_rate;
}

inline double sample_waiting_time(double total_rate, Rng& rng) { return sample_waiting_time(total_rate, rng.uniform()); }

template <class State>
struct ThinnedJump {
  double time;
  State pre_jump;
};

// First point of the inhomogeneous Poisson process with intensity
// rate_at(flow(x0, s)), s in [0, horizon], by thinning a homogeneous clock of
// rate `rate_bound`. Returns nullopt when no point falls before the horizon.
// Throws BoundViolation if the bound is ever exceeded at a proposal.
template <class State, class RateFn, class FlowFn>
std::optional<ThinnedJump<State>> thinning_next_jump(RateFn&& rate_at, double rate_bound, FlowFn&& flow,
                                                     const State& x0, double horizon, Rng& rng) {
  if (rate_bound < 0.0) throw DomainError("thinning: negative rate bound");
  double s = 0.0;
  for (;;) {
    s += sample_waiting_time(rate_bound, rng);
    if (!(s <= horizon)) return std::nullopt;
    State y = flow(x0, s);
    const double r = rate_at(y);
    if (r < 0.0) throw DomainError("thinning: negative rate");
    if (r > rate_bound * (1.0 + 1e-12)) throw BoundViolation("thinning: observed rate exceeds declared bound");
    if (rng.uniform() * rate_bound < r) return ThinnedJump<State>{s, std::move(y)};
  }
}

// What a model's next transition does. `time` is absolute.
// When `event` is empty the transition is an integration step (Euler) rather
// than a logged event.
struct Transition {
  double time = kInfinity;
  AbsorbedState after;
  std::optional<JumpEvent> event;
};

// The contract every model satisfies:
//  - next(s, t, t_limit, rng, controls): the next state change after time t.
//    Pure-jump and PDMP models ignore t_limit; time-discretized models never
//    step past it.
//  - evolve(s, elapsed): state after `elapsed` time units with no transition
//    (identity for piecewise-constant models, the deterministic flow otherwise).
//  - piecewise_constant(): whether evolve is the identity.
template <class M>
concept SimulatableModel = requires(const M& m, const AbsorbedState& s, Rng& rng, const StepControls& c) {
  { m.next(s, 0.0, 0.0, rng, c) } -> std::same_as<Transition>;
  { m.evolve(s, 0.0) } -> std::same_as<AbsorbedState>;
  { m.piecewise_constant() } -> std::convertible_to<bool>;
};

// Path visitor hooks. Every hook may return true to stop the path early.
//   segment(state, t0, t1): state held (or flowing) on [t0, t1) with no transition.
//   transition(before, tr): tr.after takes effect at tr.time.
struct NullVisitor {
  bool segment(const AbsorbedState&, double, double) { return false; }
  bool transition(const AbsorbedState&, const Transition&) { return false; }
};

struct RunResult {
  AbsorbedState final_state;  // state at the stop time
  double stop_time = 0.0;
  double tau_abs = kInfinity;
  std::uint64_t transitions = 0;
  bool stopped_by_visitor = false;
};

// Core loop: runs one path from (x0, t0) until absorption, the horizon, or a
// visitor stop. The random draws consumed depend only on the model and the
// stream, never on the horizon for event-driven models, so two runs with
// different horizons agree on their common prefix.
template <SimulatableModel M, class Visitor>
RunResult run_path(const M& model, AbsorbedState x0, double t0, double horizon, Rng& rng,
                   const StepControls& controls, Visitor&& visit) {
  RunResult out;
  AbsorbedState s = std::move(x0);
  double t = t0;
  while (s.alive()) {
    Transition tr = model.next(s, t, horizon, rng, controls);
    if (!(tr.time > horizon)) {
      if (++out.transitions > controls.max_events)
        throw SimulationFault("run_path: max events per path exceeded", PathOutcome{});
      if (visit.segment(s, t, tr.time)) {
        out.final_state = model.evolve(s, tr.time - t);
        out.stop_time = tr.time;
        out.stopped_by_visitor = true;
        return out;
      }
      if (tr.after.alive() && !tr.after.finite())
        throw SimulationFault("run_path: non-finite state", PathOutcome{});
      const bool stop = visit.transition(s, tr);
      t = tr.time;
      s = std::move(tr.after);
      if (!s.alive()) out.tau_abs = t;
      if (stop) {
        out.final_state = s;
        out.stop_time = t;
        out.stopped_by_visitor = true;
        return out;
      }
    } else {
      const bool stop = visit.segment(s, t, horizon);
      out.final_state = model.evolve(s, horizon - t);
      out.stop_time = horizon;
      out.stopped_by_visitor = stop;
      return out;
    }
  }
  out.final_state = s;
  out.stop_time = t;
  return out;
}

}  // namespace qsdlab
