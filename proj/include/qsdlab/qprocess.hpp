#pragma once

// Q-process: paths conditioned on never being absorbed. Continuous-space
// models are reached through finite-horizon rejection; finite chains also
// through the exact h-transform.

#include <algorithm>
#include <cmath>
#include <vector>

#include "estimation.hpp"
#include "oracle.hpp"

namespace qsdlab {

struct QProcessRun {
  EmpiricalMeasure marginal;
  double t = 0.0;
  double horizon = 0.0;
  double acceptance = 0.0;
  std::size_t launched = 0;
  std::size_t accepted = 0;
};

// Streams at or above this offset are reserved for pilot runs so they never
// overlap production particles.
inline constexpr std::uint64_t kPilotStreamOffset = std::uint64_t{1} << 40;
inline constexpr double kAcceptanceFloor = 1e-3;

namespace detail {

template <class M>
struct MarginalAt {
  const M& model;
  double t;
  std::optional<AbsorbedState> at_t;

  bool segment(const AbsorbedState& s, double t0, double t1) {
    if (!at_t && t0 <= t && t <= t1) at_t = model.evolve(s, t - t0);
    return false;
  }
  bool transition(const AbsorbedState&, const Transition&) { return false; }
};

// Runs particles [first, first + count) to the horizon; slot i holds the
// state at t when the particle survives the horizon.
template <class M>
std::vector<std::optional<AbsorbedState>> conditioned_batch(const M& model, const InitialLaw& mu0, double t, double horizon,
                                                            std::size_t first, std::size_t count, const McContext& ctx) {
  std::vector<std::optional<AbsorbedState>> out(count);
  parallel_for(count, ctx.threads, [&](std::size_t k) {
    Rng rng(ctx.stream(first + k));
    const AbsorbedState& x0 = mu0.sample(rng);
    MarginalAt<M> v{model, t, std::nullopt};
    const RunResult r = run_path(model, x0, 0.0, horizon, rng, ctx.controls, v);
    if (r.final_state.alive()) out[k] = std::move(v.at_t);
  });
  return out;
}

}  // namespace detail

// Survival fraction at the horizon on a pilot set of particles.
inline double pilot_acceptance(const ModelSpec& model, const InitialLaw& mu0, double horizon, std::size_t n,
                               const McContext& ctx) {
  const auto tau = absorption_times(model, mu0, horizon, n, ctx.offset(kPilotStreamOffset));
  std::size_t alive = 0;
  for (double s : tau) alive += s > horizon ? 1 : 0;
  return static_cast<double>(alive) / static_cast<double>(n);
}

// Marginal at t of paths from mu0 conditioned on survival up to the horizon,
// from n launched particles.
inline QProcessRun simulate_qprocess_rejection(const ModelSpec& model, const InitialLaw& mu0, double t, double horizon,
                                               std::size_t n, const McContext& ctx) {
  if (!(t >= 0.0 && t < horizon)) throw ValidationError("qprocess: need 0 <= t < T");
  if (n == 0) throw ValidationError("qprocess: need at least one particle");
  const double pilot = pilot_acceptance(model, mu0, horizon, std::min<std::size_t>(n, 2000), ctx);
  if (pilot < kAcceptanceFloor)
    throw DegenerateError("qprocess: expected acceptance below 1e-3; increase n or lower T");
  const auto batch = std::visit([&](const auto& m) { return detail::conditioned_batch(m, mu0, t, horizon, 0, n, ctx); }, model);
  std::vector<AbsorbedState> kept;
  for (const auto& s : batch)
    if (s) kept.push_back(*s);
  if (kept.empty()) throw DegenerateError("qprocess: no path survived the horizon; increase n or lower T");
  QProcessRun run;
  run.t = t;
  run.horizon = horizon;
  run.launched = n;
  run.accepted = kept.size();
  run.acceptance = static_cast<double>(kept.size()) / static_cast<double>(n);
  run.marginal = EmpiricalMeasure::uniform(std::move(kept), n, t, "qprocess-rejection");
  return run;
}

// Same, launching particles in index order until exactly n_accepted are kept.
inline QProcessRun simulate_qprocess_rejection_accepted(const ModelSpec& model, const InitialLaw& mu0, double t,
                                                        double horizon, std::size_t n_accepted, const McContext& ctx,
                                                        std::size_t max_launch = 100'000'000) {
  if (!(t >= 0.0 && t < horizon)) throw ValidationError("qprocess: need 0 <= t < T");
  if (n_accepted == 0) throw ValidationError("qprocess: need n_accepted >= 1");
  const double pilot = pilot_acceptance(model, mu0, horizon, 2000, ctx);
  if (pilot < kAcceptanceFloor)
    throw DegenerateError("qprocess: expected acceptance below 1e-3; increase n or lower T");
  std::vector<AbsorbedState> kept;
  std::size_t launched = 0;
  while (kept.size() < n_accepted) {
    const double need = static_cast<double>(n_accepted - kept.size());
    const auto count = static_cast<std::size_t>(std::ceil(1.1 * need / pilot)) + 64;
    if (launched + count > max_launch) throw DegenerateError("qprocess: launch budget exhausted before reaching n_accepted");
    const auto batch =
        std::visit([&](const auto& m) { return detail::conditioned_batch(m, mu0, t, horizon, launched, count, ctx); }, model);
    std::size_t used = 0;
    for (const auto& s : batch) {
      ++used;
      if (s) {
        kept.push_back(*s);
        if (kept.size() == n_accepted) break;
      }
    }
    launched += used;
  }
  QProcessRun run;
  run.t = t;
  run.horizon = horizon;
  run.launched = launched;
  run.accepted = kept.size();
  run.acceptance = static_cast<double>(kept.size()) / static_cast<double>(launched);
  run.marginal = EmpiricalMeasure::uniform(std::move(kept), launched, t, "qprocess-rejection");
  return run;
}

// eta * mu, renormalized: the initial law under which the Q-process
// reproduces the conditioned law started from mu.
inline std::vector<double> eta_biased(const std::vector<double>& mu, const std::vector<double>& eta) {
  if (mu.size() != eta.size()) throw ValidationError("eta_biased: size mismatch");
  std::vector<double> b(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) b[i] = mu[i] * eta[i];
  const double s = sum(b);
  if (!(s > 0.0)) throw DomainError("eta_biased: eta vanishes on the support of mu");
  for (double& v : b) v /= s;
  return b;
}

// Exact law of the Q-process at t started from the law mu.
inline std::vector<double> qprocess_marginal_exact(const SubMarkovChain& chain, const SpectralTriple& triple,
                                                   const std::vector<double>& mu, double t) {
  const Matrix q = q_generator(chain, triple);
  auto v = expm_action(q, mu, t, Side::left);
  for (double& y : v) y = std::max(y, 0.0);
  detail::normalize_l1(v);
  return v;
}

struct BetaOptions {
  double run_length = 100.0;
  double burn_in = 10.0;
  std::size_t paths = 64;
  // Simulated models only: survival is required this far past the end of
  // the observation window, and states are recorded every sample_dt.
  double lookahead = 10.0;
  double sample_dt = 0.1;
};

// Occupation measure of the Q-process after burn-in for a finite chain:
// Gillespie paths of the h-transformed generator, time-weighted per state.
inline EmpiricalMeasure estimate_beta_chain(const SubMarkovChain& chain, const SpectralTriple& triple, std::size_t x,
                                            const BetaOptions& opt, const McContext& ctx) {
  if (!(opt.burn_in < opt.run_length)) throw UsageError("estimate_beta: burn-in must be shorter than the run length");
  if (x >= chain.size()) throw ValidationError("estimate_beta: start state out of range");
  if (opt.paths == 0) throw ValidationError("estimate_beta: need at least one path");
  const ChainModel q(SubMarkovChain(q_generator(chain, triple)));
  const std::size_t n = chain.size();
  std::vector<std::vector<double>> occ(opt.paths, std::vector<double>(n, 0.0));
  parallel_for(opt.paths, ctx.threads, [&](std::size_t i) {
    Rng rng(ctx.stream(i));
    struct Occupation {
      std::vector<double>& time_in;
      double from;
      bool segment(const AbsorbedState& s, double t0, double t1) {
        const double lo = std::max(t0, from);
        if (t1 > lo) time_in[s.index()] += t1 - lo;
        return false;
      }
      bool transition(const AbsorbedState&, const Transition&) { return false; }
    } v{occ[i], opt.burn_in};
    run_path(q, AbsorbedState::chain_state(x), 0.0, opt.run_length, rng, ctx.controls, v);
  });
  std::vector<double> total(n, 0.0);
  for (const auto& o : occ)
    for (std::size_t j = 0; j < n; ++j) total[j] += o[j];
  detail::normalize_l1(total);
  EmpiricalMeasure m;
  for (std::size_t j = 0; j < n; ++j)
    if (total[j] > 0.0) {
      m.particles.push_back(AbsorbedState::chain_state(j));
      m.weights.push_back(total[j]);
    }
  m.n_launched = opt.paths;
  m.n_survived = opt.paths;
  m.time = opt.run_length;
  m.method = "htransform-occupation";
  return m;
}

// Simulated models: paths that survive run_length + lookahead, sampled every
// sample_dt on [burn_in, run_length]. This replaces the infinite-horizon
// conditioning by a finite lookahead and is an approximation.
inline EmpiricalMeasure estimate_beta_rejection(const ModelSpec& model, const InitialLaw& mu0, const BetaOptions& opt,
                                                const McContext& ctx) {
  if (!(opt.burn_in < opt.run_length)) throw UsageError("estimate_beta: burn-in must be shorter than the run length");
  if (!(opt.sample_dt > 0.0) || !(opt.lookahead >= 0.0)) throw ValidationError("estimate_beta: bad sampling options");
  const double horizon = opt.run_length + opt.lookahead;
  const auto nodes = static_cast<std::size_t>(std::floor((opt.run_length - opt.burn_in) / opt.sample_dt + 1e-9)) + 1;
  std::vector<std::vector<AbsorbedState>> samples(opt.paths);
  std::visit(
      [&](const auto& m) {
        using Model = std::decay_t<decltype(m)>;
        parallel_for(opt.paths, ctx.threads, [&](std::size_t i) {
          Rng rng(ctx.stream(i));
          const AbsorbedState& x0 = mu0.sample(rng);
          struct Sampler {
            const Model& model;
            double first, step;
            std::size_t nodes, next = 0;
            std::vector<AbsorbedState> got;
            bool segment(const AbsorbedState& s, double t0, double t1) {
              while (next < nodes) {
                const double g = first + step * static_cast<double>(next);
                if (g > t1) break;
                if (g >= t0) got.push_back(model.evolve(s, g - t0));
                ++next;
              }
              return false;
            }
            bool transition(const AbsorbedState&, const Transition&) { return false; }
          } v{m, opt.burn_in, opt.sample_dt, nodes, 0, {}};
          const RunResult r = run_path(m, x0, 0.0, horizon, rng, ctx.controls, v);
          if (r.final_state.alive()) samples[i] = std::move(v.got);
        });
      },
      model);
  std::vector<AbsorbedState> all;
  std::size_t survived = 0;
  for (auto& s : samples)
    if (!s.empty()) {
      ++survived;
      for (auto& x : s) all.push_back(std::move(x));
    }
  if (survived == 0) throw DegenerateError("estimate_beta: no path survived the lookahead horizon");
  auto m = EmpiricalMeasure::uniform(std::move(all), opt.paths, opt.run_length, "sliding-horizon-rejection");
  m.n_survived = survived;
  return m;
}

}  // namespace qsdlab
