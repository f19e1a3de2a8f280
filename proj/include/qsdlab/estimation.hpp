#pragma once

// Monte Carlo estimators: survival curves, extinction rate, conditioned
// marginals (naive and Fleming-Viot), survival capacity, quasi-ergodic
// averages.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "measure.hpp"
#include "models/model_spec.hpp"
#include "parallel.hpp"
#include "process.hpp"

namespace qsdlab {

// Randomness and execution settings shared by every estimator. Particle i
// uses stream (seed, stream_base + i).
struct McContext {
  std::uint64_t seed = 0;
  std::uint64_t stream_base = 0;
  unsigned threads = 1;
  StepControls controls;

  RngStream stream(std::uint64_t i) const { return {seed, stream_base + i}; }
  McContext offset(std::uint64_t by) const {
    McContext c = *this;
    c.stream_base += by;
    return c;
  }
};

struct EstimateWithCI {
  double value = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  std::string method;
};

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<double> se;
  std::vector<std::size_t> alive;
  std::size_t n = 0;
};

// Absorption times of n independent paths from mu0 (inf when alive at horizon).
inline std::vector<double> absorption_times(const ModelSpec& model, const InitialLaw& mu0, double horizon, std::size_t n,
                                            const McContext& ctx) {
  std::vector<double> tau(n, kInfinity);
  std::visit(
      [&](const auto& m) {
        parallel_for(n, ctx.threads, [&](std::size_t i) {
          Rng rng(ctx.stream(i));
          const AbsorbedState& x0 = mu0.sample(rng);
          NullVisitor v;
          tau[i] = run_path(m, x0, 0.0, horizon, rng, ctx.controls, v).tau_abs;
        });
      },
      model);
  return tau;
}

inline SurvivalCurve survival_from_taus(const std::vector<double>& tau, const std::vector<double>& times) {
  SurvivalCurve c;
  c.times = times;
  c.n = tau.size();
  const double n = static_cast<double>(tau.size());
  for (double t : times) {
    std::size_t alive = 0;
    for (double s : tau) alive += s > t ? 1 : 0;
    const double p = static_cast<double>(alive) / n;
    c.alive.push_back(alive);
    c.survival.push_back(p);
    c.se.push_back(std::sqrt(p * (1.0 - p) / n));
  }
  return c;
}

// Fraction of the same n particles alive at each time, with binomial SEs.
inline SurvivalCurve estimate_survival_curve(const ModelSpec& model, const InitialLaw& mu0, const std::vector<double>& times,
                                             std::size_t n, const McContext& ctx) {
  if (times.empty() || !std::is_sorted(times.begin(), times.end()) ||
      std::adjacent_find(times.begin(), times.end()) != times.end())
    throw ValidationError("estimate_survival_curve: times must be strictly increasing");
  if (times.front() < 0.0) throw ValidationError("estimate_survival_curve: times must be >= 0");
  if (n < 100) throw ValidationError("estimate_survival_curve: need at least 100 particles");
  const auto tau = absorption_times(model, mu0, times.back(), n, ctx);
  SurvivalCurve c = survival_from_taus(tau, times);
  if (c.alive.front() == 0) throw DegenerateError("estimate_survival_curve: no survivors at the smallest time");
  return c;
}

struct FitWindow {
  // Default: drop the first 20% of the times and any point with fewer than
  // min_survivors survivors. An explicit [t_min, t_max] keeps every point
  // in range and rejects empty ones.
  std::optional<double> t_min, t_max;
  std::size_t min_survivors = 50;
};

// Exponential decay rate of the survival curve: least-squares slope of
// -log S over the window. The standard error propagates the binomial
// covariance of nested survival events,
//   Cov(log S(s), log S(t)) = (1 - S(s)) / (n S(s)),  s <= t,
// through the linear slope functional.
inline EstimateWithCI estimate_lambda0(const SurvivalCurve& curve, const FitWindow& window = {}) {
  std::vector<std::size_t> idx;
  const std::size_t m = curve.times.size();
  if (window.t_min || window.t_max) {
    const double lo = window.t_min.value_or(-kInfinity), hi = window.t_max.value_or(kInfinity);
    for (std::size_t k = 0; k < m; ++k)
      if (curve.times[k] >= lo && curve.times[k] <= hi) {
        if (!(curve.survival[k] > 0.0)) throw DegenerateError("estimate_lambda0: zero survival inside the window; shrink it");
        idx.push_back(k);
      }
  } else {
    const auto first = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(m)));
    for (std::size_t k = first; k < m; ++k) {
      const bool enough = curve.alive.empty() || curve.alive[k] >= window.min_survivors;
      if (curve.survival[k] > 0.0 && enough) idx.push_back(k);
    }
  }
  if (idx.size() < 4) throw DegenerateError("estimate_lambda0: fit window needs at least 4 points with positive survival");

  const std::size_t p = idx.size();
  double tbar = 0.0;
  for (auto k : idx) tbar += curve.times[k];
  tbar /= static_cast<double>(p);
  double sxx = 0.0;
  for (auto k : idx) sxx += (curve.times[k] - tbar) * (curve.times[k] - tbar);
  if (!(sxx > 0.0)) throw DegenerateError("estimate_lambda0: fit window has no time spread");
  std::vector<double> coef(p);
  double slope = 0.0;
  for (std::size_t a = 0; a < p; ++a) {
    coef[a] = (curve.times[idx[a]] - tbar) / sxx;
    slope += coef[a] * (-std::log(curve.survival[idx[a]]));
  }
  double var = 0.0;
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) {
      const std::size_t k = idx[std::min(a, b)];
      const double s = curve.survival[k];
      const double v = (curve.se[k] / s) * (curve.se[k] / s);
      var += coef[a] * coef[b] * v;
    }
  return {slope, std::sqrt(std::max(var, 0.0)), curve.n, "ols-log-survival"};
}

enum class McneMethod { naive, fleming_viot };

inline const char* to_string(McneMethod m) { return m == McneMethod::naive ? "naive" : "fleming_viot"; }

// Survivors at time t of n independent paths, equal weights.
template <SimulatableModel M>
EmpiricalMeasure mcne_naive(const M& model, const InitialLaw& mu0, double t, std::size_t n, const McContext& ctx) {
  std::vector<AbsorbedState> finals(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    Rng rng(ctx.stream(i));
    const AbsorbedState& x0 = mu0.sample(rng);
    NullVisitor v;
    finals[i] = run_path(model, x0, 0.0, t, rng, ctx.controls, v).final_state;
  });
  std::vector<AbsorbedState> alive;
  for (auto& s : finals)
    if (s.alive()) alive.push_back(std::move(s));
  return EmpiricalMeasure::uniform(std::move(alive), n, t, "naive");
}

// Fleming-Viot system: n particles evolve independently; a particle killed at
// time s jumps onto the current state of a uniformly chosen other particle.
// Events are processed one at a time in (time, index) order, so total death
// cannot happen and the result is seed-deterministic.
template <SimulatableModel M>
EmpiricalMeasure mcne_fleming_viot(const M& model, const InitialLaw& mu0, double t, std::size_t n, const McContext& ctx) {
  if (n < 2) throw ValidationError("fleming_viot: need at least two particles");
  struct Particle {
    AbsorbedState state;
    double t_last = 0.0;
    Transition pending;
  };
  std::vector<Rng> rngs;
  rngs.reserve(n);
  std::vector<Particle> ps(n);
  using Key = std::pair<double, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> queue;
  for (std::size_t i = 0; i < n; ++i) {
    rngs.emplace_back(ctx.stream(i));
    ps[i].state = mu0.sample(rngs[i]);
    ps[i].pending = model.next(ps[i].state, 0.0, t, rngs[i], ctx.controls);
    if (!(ps[i].pending.time > t)) queue.push({ps[i].pending.time, i});
  }
  std::uint64_t resamples = 0, events = 0;
  const std::uint64_t budget = ctx.controls.max_events * static_cast<std::uint64_t>(n);
  while (!queue.empty()) {
    const auto [time, i] = queue.top();
    queue.pop();
    if (++events > budget) throw SimulationFault("fleming_viot: event budget exhausted", PathOutcome{});
    Particle& p = ps[i];
    if (p.pending.after.alive()) {
      if (!p.pending.after.finite()) throw SimulationFault("fleming_viot: non-finite state", PathOutcome{});
      p.state = std::move(p.pending.after);
    } else {
      const auto k = static_cast<std::size_t>(rngs[i].uniform_index(n - 1));
      const std::size_t j = k < i ? k : k + 1;
      p.state = model.evolve(ps[j].state, time - ps[j].t_last);
      ++resamples;
    }
    p.t_last = time;
    p.pending = model.next(p.state, time, t, rngs[i], ctx.controls);
    if (!(p.pending.time > t)) queue.push({p.pending.time, i});
  }
  std::vector<AbsorbedState> states;
  states.reserve(n);
  for (auto& p : ps) states.push_back(model.evolve(p.state, t - p.t_last));
  auto m = EmpiricalMeasure::uniform(std::move(states), n, t, "fleming_viot");
  m.resampling_count = resamples;
  return m;
}

// Conditioned marginal mu A_t.
inline EmpiricalMeasure estimate_mcne(const ModelSpec& model, const InitialLaw& mu0, double t, std::size_t n,
                                      McneMethod method, const McContext& ctx) {
  if (n < 1000) throw ValidationError("estimate_mcne: need at least 1000 particles");
  if (t < 0.0) throw ValidationError("estimate_mcne: t must be >= 0");
  EmpiricalMeasure m = std::visit(
      [&](const auto& mm) {
        return method == McneMethod::naive ? mcne_naive(mm, mu0, t, n, ctx) : mcne_fleming_viot(mm, mu0, t, n, ctx);
      },
      model);
  if (m.degenerate()) throw DegenerateError("estimate_mcne: no survivors at t; reduce t or raise n");
  return m;
}

// eta_t(x) = exp(lambda0 t) P_x(t < tau), with a delta-method SE combining
// the binomial error of the survival estimate and the error of lambda0.
inline EstimateWithCI eta_from_survival(double survival, double survival_se, double t, const EstimateWithCI& lambda0,
                                        std::size_t n) {
  if (!(survival > 0.0)) throw DegenerateError("estimate_eta: no survivors at t");
  const double g = std::exp(lambda0.value * t);
  const double value = g * survival;
  const double var = g * g * (survival_se * survival_se + (t * survival * lambda0.se) * (t * survival * lambda0.se));
  return {value, std::sqrt(var), n, "exp(lambda0 t) S_x(t)"};
}

inline EstimateWithCI estimate_eta(const ModelSpec& model, const AbsorbedState& x, double t, const EstimateWithCI& lambda0,
                                   std::size_t n, const McContext& ctx) {
  if (n < 100) throw ValidationError("estimate_eta: need at least 100 particles");
  const auto tau = absorption_times(model, InitialLaw::point(x), t, n, ctx);
  const SurvivalCurve c = survival_from_taus(tau, {t});
  return eta_from_survival(c.survival[0], c.se[0], t, lambda0, n);
}

using StateFunction = std::function<double(const AbsorbedState&)>;

struct QuasiErgodicResult {
  EstimateWithCI average;
  std::vector<double> path_averages;  // one per surviving path
  std::size_t n_survived = 0;

  // Fraction of surviving paths whose time average deviates from `target`
  // by more than eps, with binomial SE.
  EstimateWithCI deviation_probability(double target, double eps) const {
    if (path_averages.empty()) throw DegenerateError("deviation_probability: no surviving paths");
    std::size_t k = 0;
    for (double a : path_averages) k += std::abs(a - target) > eps ? 1 : 0;
    const double n = static_cast<double>(path_averages.size());
    const double p = static_cast<double>(k) / n;
    return {p, std::sqrt(p * (1.0 - p) / n), path_averages.size(), "deviation-frequency"};
  }
};

namespace detail {

// Time integral of f along one path on [0, t]: exact on piecewise-constant
// paths, trapezoid on the nodes t k / steps otherwise.
template <class M>
struct PathIntegral {
  const M& model;
  const StateFunction& f;
  bool exact;
  double horizon;
  std::size_t steps;
  double integral = 0.0;
  double prev_value = 0.0;
  double prev_time = 0.0;
  std::size_t next_node = 1;

  bool segment(const AbsorbedState& s, double t0, double t1) {
    if (exact) {
      integral += f(s) * (t1 - t0);
      return false;
    }
    while (next_node <= steps) {
      const double g = horizon * static_cast<double>(next_node) / static_cast<double>(steps);
      if (g > t1) break;
      const double v = f(model.evolve(s, g - t0));
      integral += 0.5 * (prev_value + v) * (g - prev_time);
      prev_value = v;
      prev_time = g;
      ++next_node;
    }
    return false;
  }
  bool transition(const AbsorbedState&, const Transition&) { return false; }
};

}  // namespace detail

inline QuasiErgodicResult quasi_ergodic_average(const ModelSpec& model, const InitialLaw& mu0, const StateFunction& f,
                                                double t, std::size_t n, const McContext& ctx) {
  if (!(t > 0.0)) throw ValidationError("quasi_ergodic_average: t must be positive");
  std::vector<double> avg(n, 0.0);
  std::vector<char> survived(n, 0);
  std::visit(
      [&](const auto& m) {
        using Model = std::decay_t<decltype(m)>;
        const bool exact = m.piecewise_constant();
        const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(t / ctx.controls.dt)));
        parallel_for(n, ctx.threads, [&](std::size_t i) {
          Rng rng(ctx.stream(i));
          const AbsorbedState& x0 = mu0.sample(rng);
          detail::PathIntegral<Model> acc{m, f, exact, t, steps};
          if (!exact) acc.prev_value = f(x0);
          const RunResult r = run_path(m, x0, 0.0, t, rng, ctx.controls, acc);
          if (r.final_state.alive()) {
            survived[i] = 1;
            avg[i] = acc.integral / t;
          }
        });
      },
      model);
  QuasiErgodicResult out;
  for (std::size_t i = 0; i < n; ++i)
    if (survived[i]) out.path_averages.push_back(avg[i]);
  out.n_survived = out.path_averages.size();
  if (out.n_survived == 0) throw DegenerateError("quasi_ergodic_average: no surviving paths");
  double mean = 0.0;
  for (double a : out.path_averages) mean += a;
  mean /= static_cast<double>(out.n_survived);
  double var = 0.0;
  for (double a : out.path_averages) var += (a - mean) * (a - mean);
  const double ns = static_cast<double>(out.n_survived);
  const double se = out.n_survived > 1 ? std::sqrt(var / (ns - 1.0) / ns) : 0.0;
  out.average = {mean, se, out.n_survived, "time-average over survivors"};
  return out;
}

}  // namespace qsdlab
