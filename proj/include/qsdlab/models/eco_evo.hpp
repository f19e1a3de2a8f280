#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "../process.hpp"
#include "../rate_functions.hpp"
#include "../regions.hpp"

namespace qsdlab {

// Logistic Feller diffusion N with trait-dependent growth r(X), coupled to a
// jump diffusion X in R^d, fractional catastrophes on N, mutations on X and
// total catastrophes (killing) at rate rho_c(X).
//
// Reference measures: nu_P is Lebesgue on (0, 1] plus an optional atom at 1,
// nu_W is Lebesgue on R^d.
struct EcoEvoParams {
  std::size_t dim = 1;
  RadialFunction r = RadialFunction::constant(1.0);  // growth rate, may be negative
  double c = 1.0;                                    // competition
  double sigma_N = 1.0;
  double b_linear = 0.0;                             // b(x, n) = -b_linear x
  double sigma_X = 0.0;
  // k_c(n, x, p) = cat_density on (cat_p_lo, cat_p_hi], plus cat_atom_at_one on {1}.
  double cat_density = 0.0;
  double cat_p_lo = 0.0;
  double cat_p_hi = 1.0;
  double cat_atom_at_one = 0.0;
  JumpKernel mutation;                               // k_m(n, x, w)
  RadialFunction rho_c = RadialFunction::constant(0.0);
  // k^vee per compact [1/l, l] x closed ball(0, l): entries are (l, bound)
  // on the catastrophe + mutation rate.
  std::vector<RegionBounds::Entry> jump_bounds;

  double catastrophe_rate() const { return cat_density * (cat_p_hi - cat_p_lo) + cat_atom_at_one; }
  double mutation_rate(const Point& x) const { return mutation.empty() ? 0.0 : mutation.rate(x); }

  void validate() const {
    if (!(c > 0.0)) throw DomainError("eco-evo: competition c must be positive");
    if (sigma_N < 0.0 || sigma_X < 0.0) throw DomainError("eco-evo: diffusion coefficients must be nonnegative");
    if (cat_density < 0.0 || cat_atom_at_one < 0.0) throw DomainError("eco-evo: negative catastrophe rate");
    if (cat_p_lo < 0.0 || cat_p_hi > 1.0 || cat_p_lo > cat_p_hi)
      throw DomainError("eco-evo: catastrophe fractions must satisfy 0 <= p_lo <= p_hi <= 1");
    if (!mutation.empty() && mutation.dimension() != dim) throw ValidationError("eco-evo: mutation kernel dimension mismatch");
    if (!rho_c.nonnegative()) throw DomainError("eco-evo: rho_c must be nonnegative");
  }

  void with_default_bounds(double max_level = 64.0) {
    jump_bounds.clear();
    for (double l = 1.0; l <= max_level; l *= 2.0)
      jump_bounds.push_back({l, catastrophe_rate() + (mutation.empty() ? 0.0 : mutation.sup_rate_on_ball(l))});
  }

  // Asserts (kv) on the smallest declared compact holding (n, x).
  void check_bound(double n, const Point& x, double rate) const {
    const double rx = norm2(x);
    for (const auto& e : jump_bounds) {
      if (n >= 1.0 / e.radius && n <= e.radius && rx <= e.radius) {
        if (rate > e.bound * (1.0 + 1e-12))
          throw BoundViolation("eco-evo: jump rate exceeds declared k^vee on compact level " + std::to_string(e.radius));
        return;
      }
    }
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "eco_evo(d=" << dim << ",r=" << r.describe() << ",c=" << c << ",sN=" << sigma_N << ",b=" << b_linear
       << ",sX=" << sigma_X << ",kc=" << cat_density << "[" << cat_p_lo << "," << cat_p_hi << "]+" << cat_atom_at_one
       << ",km=" << mutation.describe() << ",rho_c=" << rho_c.describe() << ",kv=";
    for (const auto& e : jump_bounds) os << "(" << e.radius << "," << e.bound << ")";
    os << ")";
    return os.str();
  }
};

// One Euler-Maruyama step for (N, X) of length at most dt, cut short by the
// first jump or killing event (drawn with rates frozen at the pre-step state)
// and by t_limit. N <= 0 after the diffusive move absorbs.
inline Transition ecoevo_step(const EcoEvoParams& p, const AbsorbedState& s, double t, double dt, double t_limit,
                              Rng& rng, bool full_truncation = true) {
  const double n = s.n();
  const Point& x = s.x();
  if (!(n > 0.0)) throw DomainError("ecoevo_step: population must be positive");
  const double k_cat = p.catastrophe_rate();
  const double k_mut = p.mutation_rate(x);
  const double k_kill = p.rho_c(x);
  p.check_bound(n, x, k_cat + k_mut);
  const double total = k_cat + k_mut + k_kill;
  const double wait = sample_waiting_time(total, rng);
  // Steps end on t_limit exactly; past it (t >= t_limit) a full dt is taken.
  double step_end = t_limit > t ? std::min(t + dt, t_limit) : t + dt;
  bool event = false;
  if (t + wait < step_end) {
    step_end = t + wait;
    event = true;
  }
  const double tau = step_end - t;

  const double sq = std::sqrt(tau);
  const double root_n = full_truncation ? std::sqrt(std::max(n, 0.0)) : std::sqrt(n);
  const double growth = p.r(x);
  double n_new = n + (growth - p.c * n) * n * tau + p.sigma_N * root_n * sq * rng.normal();
  Point x_new = x;
  for (std::size_t i = 0; i < x_new.size(); ++i)
    x_new[i] += -p.b_linear * x[i] * tau + p.sigma_X * sq * rng.normal();

  Transition tr;
  tr.time = step_end;
  if (!std::isfinite(n_new)) {
    tr.after = AbsorbedState(std::move(x_new), n_new);
    return tr;
  }
  if (n_new <= 0.0) {
    tr.after = AbsorbedState::cemetery();
    tr.event = JumpEvent{tr.time, EventKind::extinction, {}};
    return tr;
  }
  if (!event) {
    tr.after = AbsorbedState(std::move(x_new), n_new);
    return tr;
  }
  const double u = rng.uniform() * total;
  if (u < k_cat) {
    double frac = 1.0;
    if (rng.uniform() * k_cat >= p.cat_atom_at_one) frac = rng.uniform(p.cat_p_lo, p.cat_p_hi);
    const double n_after = (1.0 - frac) * n_new;
    if (frac >= 1.0 || n_after <= 0.0) {
      tr.after = AbsorbedState::cemetery();
      tr.event = JumpEvent{tr.time, EventKind::catastrophe, {frac}};
    } else {
      tr.after = AbsorbedState(std::move(x_new), n_after);
      tr.event = JumpEvent{tr.time, EventKind::catastrophe, {frac}};
    }
  } else if (u < k_cat + k_mut) {
    Point w = p.mutation.sample(x, rng);
    for (std::size_t i = 0; i < x_new.size(); ++i) x_new[i] += w[i];
    tr.after = AbsorbedState(std::move(x_new), n_new);
    tr.event = JumpEvent{tr.time, EventKind::state_jump, std::move(w)};
  } else {
    tr.after = AbsorbedState::cemetery();
    tr.event = JumpEvent{tr.time, EventKind::extinction, {}};
  }
  return tr;
}

class EcoEvoModel {
 public:
  explicit EcoEvoModel(EcoEvoParams p) : p_(std::move(p)) { p_.validate(); }

  const EcoEvoParams& params() const { return p_; }

  Transition next(const AbsorbedState& s, double t, double t_limit, Rng& rng, const StepControls& c) const {
    return ecoevo_step(p_, s, t, c.dt, t_limit, rng, c.full_truncation);
  }

  // Left-continuous between Euler nodes.
  AbsorbedState evolve(const AbsorbedState& s, double) const { return s; }
  bool piecewise_constant() const { return true; }
  std::string describe() const { return p_.describe(); }

 private:
  EcoEvoParams p_;
};

}  // namespace qsdlab
