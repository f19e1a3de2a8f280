#pragma once

#include <sstream>
#include <string>
#include <variant>

#include "../process.hpp"
#include "../rate_functions.hpp"
#include "../regions.hpp"

namespace qsdlab {

// Uniform jumps on a ball with a two-level killing rate:
//   h(x, w) = h_J 1{|w| < R},  rho_J = h_J Leb(B(0, R)),
//   rho_e = rho_e1 on B(0, R) and rho_e2 >= rho_e1 + rho_J outside.
struct UniformBallParams {
  std::size_t dim = 1;
  double h_J = 0.5;
  double R = 1.0;
  double rho_e1 = 0.5;
  double rho_e2 = 1.6;

  double rho_J() const { return h_J * ball_volume(dim, R); }
  // inf over x of rho_J + rho_e
  double rho_sb() const { return rho_J() + std::min(rho_e1, rho_e2); }

  void validate() const {
    if (dim == 0) throw ValidationError("uniform ball: dimension must be >= 1");
    if (!(h_J > 0.0) || !(R > 0.0) || !(rho_e1 > 0.0)) throw DomainError("uniform ball: h_J, R and rho_e1 must be positive");
    if (rho_e2 < rho_e1 + rho_J() - 1e-12)
      throw ValidationError("uniform ball: requires rho_e2 >= rho_e1 + rho_J");
  }
};

struct PureJumpParams {
  std::size_t dim = 1;
  JumpKernel kernel;
  RadialFunction rho_e;
  RegionBounds bounds;  // bounds on rho_J + rho_e per declared compact
  std::optional<UniformBallParams> uniform_ball;

  double rho_J(const Point& x) const { return kernel.empty() ? 0.0 : kernel.rate(x); }
  double total_rate(const Point& x) const { return rho_J(x) + rho_e(x); }

  void validate() const {
    if (!kernel.empty() && kernel.dimension() != dim) throw ValidationError("pure jump: kernel dimension mismatch");
    if (!rho_e.nonnegative()) throw DomainError("pure jump: rho_e must be nonnegative");
    if (uniform_ball) uniform_ball->validate();
  }

  static PureJumpParams from_uniform_ball(const UniformBallParams& u) {
    u.validate();
    PureJumpParams p;
    p.dim = u.dim;
    p.kernel = JumpKernel::uniform_ball(u.dim, u.h_J, u.R);
    p.rho_e = RadialFunction::piecewise({u.R}, {u.rho_e1, u.rho_e2});
    p.uniform_ball = u;
    p.bounds = RegionBounds::doubling([&](double r) { return p.kernel.sup_rate_on_ball(r) + p.rho_e.sup_on_ball(r); }, 64.0);
    return p;
  }

  std::string describe() const {
    std::ostringstream os;
    os << "pure_jump(d=" << dim << "," << kernel.describe() << ",rho_e=" << rho_e.describe() << "," << bounds.describe() << ")";
    return os.str();
  }
};

struct PureJumpOutcome {
  double waiting_time;
  bool killed;
  Point jump;  // empty when killed
};

// One event of the pure-jump process from x: Exp(rho_J + rho_e) waiting
// time, killed with probability rho_e/(rho_J + rho_e), otherwise a jump
// w ~ h(x, .)/rho_J(x).
inline PureJumpOutcome pure_jump_step(const PureJumpParams& p, const Point& x, Rng& rng) {
  const double rj = p.rho_J(x);
  const double re = p.rho_e(x);
  const double total = rj + re;
  if (!(total > 0.0)) throw DomainError("pure_jump_step: total event rate must be positive");
  p.bounds.check(x, total);
  PureJumpOutcome out{sample_waiting_time(total, rng), false, {}};
  if (rng.uniform() * total < re) {
    out.killed = true;
    return out;
  }
  out.jump = p.kernel.sample(x, rng);
  return out;
}

class PureJumpModel {
 public:
  explicit PureJumpModel(PureJumpParams p) : p_(std::move(p)) { p_.validate(); }

  const PureJumpParams& params() const { return p_; }

  Transition next(const AbsorbedState& s, double t, double, Rng& rng, const StepControls&) const {
    const auto step = pure_jump_step(p_, s.x(), rng);
    Transition tr;
    tr.time = t + step.waiting_time;
    if (step.killed) {
      tr.after = AbsorbedState::cemetery();
      tr.event = JumpEvent{tr.time, EventKind::extinction, {}};
    } else {
      Point y = s.x();
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += step.jump[i];
      tr.after = AbsorbedState(std::move(y));
      tr.event = JumpEvent{tr.time, EventKind::state_jump, step.jump};
    }
    return tr;
  }

  AbsorbedState evolve(const AbsorbedState& s, double) const { return s; }
  bool piecewise_constant() const { return true; }
  std::string describe() const { return p_.describe(); }

 private:
  PureJumpParams p_;
};

}  // namespace qsdlab
