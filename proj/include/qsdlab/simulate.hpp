#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "models/model_spec.hpp"
#include "process.hpp"

namespace qsdlab {

namespace detail {

// Records the sparse skeleton: the start, every transition, and the
// user sampling grid.
template <class M>
struct SkeletonRecorder {
  const M& model;
  std::span<const double> grid;
  PathOutcome& out;
  std::size_t next_grid = 0;

  void push(double t, AbsorbedState s) {
    if (!out.skeleton.empty() && !(t > out.skeleton.back().time)) return;
    out.skeleton.push_back({t, std::move(s)});
  }

  bool segment(const AbsorbedState& s, double t0, double t1) {
    while (next_grid < grid.size() && grid[next_grid] < t1) {
      const double g = grid[next_grid++];
      if (g >= t0) push(g, model.evolve(s, g - t0));
    }
    return false;
  }

  // The final segment of a surviving path is closed at the horizon.
  void close(const AbsorbedState& s, double t0, double horizon) {
    while (next_grid < grid.size() && grid[next_grid] <= horizon) {
      const double g = grid[next_grid++];
      if (g >= t0) push(g, model.evolve(s, g - t0));
    }
  }

  bool transition(const AbsorbedState&, const Transition& tr) {
    if (tr.event) out.events.push_back(*tr.event);
    if (tr.event || !tr.after.alive()) push(tr.time, tr.after);
    return false;
  }
};

}  // namespace detail

// One trajectory up to `horizon`. The skeleton holds the start, every
// logged event, and the state at each time of `grid` (times in [0, horizon]).
template <SimulatableModel M>
PathOutcome simulate_path(const M& model, const AbsorbedState& x0, double horizon, const StepControls& controls,
                          RngStream stream, std::span<const double> grid = {}) {
  if (!x0.alive()) throw ValidationError("simulate_path: initial state must be alive");
  if (!(horizon > 0.0)) throw ValidationError("simulate_path: horizon must be positive");
  if (!std::is_sorted(grid.begin(), grid.end())) throw ValidationError("simulate_path: grid must be sorted");
  controls.validate();
  Rng rng(stream);
  PathOutcome out;
  out.seed = stream;
  out.skeleton.push_back({0.0, x0});
  detail::SkeletonRecorder<M> rec{model, grid, out};
  // Track the last pre-horizon state for closing the grid.
  struct Visitor {
    detail::SkeletonRecorder<M>& rec;
    AbsorbedState last;
    double last_t = 0.0;
    bool segment(const AbsorbedState& s, double t0, double t1) { return rec.segment(s, t0, t1); }
    bool transition(const AbsorbedState& b, const Transition& tr) {
      last = tr.after;
      last_t = tr.time;
      return rec.transition(b, tr);
    }
  } visit{rec, x0, 0.0};
  if (!grid.empty() && grid.front() == 0.0) rec.next_grid = 1;
  RunResult res;
  try {
    res = run_path(model, x0, 0.0, horizon, rng, controls, visit);
  } catch (const SimulationFault& f) {
    throw SimulationFault(f.what(), out);
  }
  out.tau_abs = res.tau_abs;
  if (res.final_state.alive()) {
    rec.close(visit.last, visit.last_t, horizon);
  } else {
    while (rec.next_grid < grid.size()) {
      const double g = grid[rec.next_grid++];
      if (g > out.tau_abs) rec.push(g, AbsorbedState::cemetery());
    }
  }
  return out;
}

inline PathOutcome simulate_path(const ModelSpec& model, const AbsorbedState& x0, double horizon,
                                 const StepControls& controls, RngStream stream, std::span<const double> grid = {}) {
  return std::visit([&](const auto& m) { return simulate_path(m, x0, horizon, controls, stream, grid); }, model);
}

}  // namespace qsdlab
