#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "../process.hpp"
#include "../rate_functions.hpp"
#include "../regions.hpp"
#include "pure_jump.hpp"

namespace qsdlab {

// Pure-jump process in R^d where each jump moves a single coordinate.
// coord_kernels[i] is the one-dimensional size density h_i(x, .).
struct CoordJumpParams {
  std::vector<JumpKernel> coord_kernels;
  RadialFunction rho_e = RadialFunction::constant(0.0);
  // Envelope for h_i(x, w) <= h_max * rho_J(x); 0 selects the per-kernel default.
  double envelope = 0.0;
  RegionBounds bounds;

  std::size_t dim() const { return coord_kernels.size(); }

  double rho_J_coord(const Point& x, std::size_t i) const { return coord_kernels[i].rate(x); }
  double rho_J(const Point& x) const {
    double r = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) r += rho_J_coord(x, i);
    return r;
  }

  // inf over x and i of rho_J^i + rho_e (kernels with radial modulations use
  // their infima, a lower bound).
  double rho_sb() const {
    double m = kInfinity;
    for (const auto& k : coord_kernels) m = std::min(m, k.inf_rate());
    return m + rho_e.infimum();
  }

  void validate() const {
    if (coord_kernels.empty()) throw ValidationError("coordinate jump: need at least one coordinate");
    for (const auto& k : coord_kernels)
      if (k.dimension() != 1) throw ValidationError("coordinate jump: per-coordinate kernels must be one-dimensional");
    if (!rho_e.nonnegative()) throw DomainError("coordinate jump: rho_e must be nonnegative");
    if (envelope < 0.0) throw DomainError("coordinate jump: negative envelope");
  }

  // d identical coordinates with uniform jumps on (-R, R) at density h.
  static CoordJumpParams symmetric(std::size_t d, double h, double R, RadialFunction rho_e) {
    CoordJumpParams p;
    p.coord_kernels.assign(d, JumpKernel::uniform_ball(1, h, R));
    p.rho_e = std::move(rho_e);
    p.bounds = RegionBounds::doubling(
        [&](double r) {
          double s = p.rho_e.sup_on_ball(r);
          for (const auto& k : p.coord_kernels) s += k.sup_rate_on_ball(r);
          return s;
        },
        64.0, p.rho_e.norm_kind());
    return p;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "coord_jump(d=" << dim() << ",env=" << envelope;
    for (const auto& k : coord_kernels) os << "," << k.describe();
    os << ",rho_e=" << rho_e.describe() << "," << bounds.describe() << ")";
    return os.str();
  }
};

struct CoordJumpOutcome {
  double waiting_time;
  bool killed;
  std::size_t coordinate;
  double size;
};

// As pure_jump_step, with the coordinate drawn with probability
// rho_J^i / rho_J. For d = 1 no direction draw is made, so the stream of
// random numbers matches pure_jump_step exactly.
inline CoordJumpOutcome coord_jump_step(const CoordJumpParams& p, const Point& x, Rng& rng) {
  const std::size_t d = p.dim();
  const double rj = p.rho_J(x);
  const double re = p.rho_e(x);
  const double total = rj + re;
  if (!(total > 0.0)) throw DomainError("coord_jump_step: total event rate must be positive");
  p.bounds.check(x, total);
  CoordJumpOutcome out{sample_waiting_time(total, rng), false, 0, 0.0};
  if (rng.uniform() * total < re) {
    out.killed = true;
    return out;
  }
  std::size_t i = 0;
  if (d > 1) {
    double u = rng.uniform() * rj;
    for (; i + 1 < d; ++i) {
      const double ri = p.rho_J_coord(x, i);
      if (u < ri) break;
      u -= ri;
    }
  }
  out.coordinate = i;
  const JumpKernel& k = p.coord_kernels[i];
  if (p.envelope > 0.0) {
    // h_i(x, w) <= envelope * rho_J(x), uniform proposals on the support.
    const double bound = p.envelope * rj;
    for (;;) {
      const double w = rng.uniform(k.box_lo()[0], k.box_hi()[0]);
      const double h = k.density(x, Point{w});
      if (h > bound * (1.0 + 1e-12)) throw BoundViolation("coord_jump_step: density exceeds declared envelope");
      if (rng.uniform() * bound < h) {
        out.size = w;
        break;
      }
    }
  } else {
    out.size = k.sample(x, rng)[0];
  }
  return out;
}

class CoordJumpModel {
 public:
  explicit CoordJumpModel(CoordJumpParams p) : p_(std::move(p)) { p_.validate(); }

  const CoordJumpParams& params() const { return p_; }

  Transition next(const AbsorbedState& s, double t, double, Rng& rng, const StepControls&) const {
    const auto step = coord_jump_step(p_, s.x(), rng);
    Transition tr;
    tr.time = t + step.waiting_time;
    if (step.killed) {
      tr.after = AbsorbedState::cemetery();
      tr.event = JumpEvent{tr.time, EventKind::extinction, {}};
      return tr;
    }
    Point y = s.x();
    y[step.coordinate] += step.size;
    Point disp(p_.dim(), 0.0);
    disp[step.coordinate] = step.size;
    tr.after = AbsorbedState(std::move(y));
    tr.event = JumpEvent{tr.time, EventKind::state_jump, std::move(disp)};
    return tr;
  }

  AbsorbedState evolve(const AbsorbedState& s, double) const { return s; }
  bool piecewise_constant() const { return true; }
  std::string describe() const { return p_.describe(); }

 private:
  CoordJumpParams p_;
};

// T_J^d ∧ tau: the first time every coordinate has jumped at least once, or
// the absorption time if that comes first. Returns {time, absorbed}.
struct AllCoordinatesJumped {
  double time;
  bool absorbed;
};

inline AllCoordinatesJumped time_all_coordinates_jumped(const CoordJumpParams& p, Point x, Rng& rng,
                                                        std::uint64_t max_events = 10'000'000) {
  std::vector<char> touched(p.dim(), 0);
  std::size_t remaining = p.dim();
  double t = 0.0;
  for (std::uint64_t e = 0; e < max_events; ++e) {
    const auto step = coord_jump_step(p, x, rng);
    t += step.waiting_time;
    if (step.killed) return {t, true};
    x[step.coordinate] += step.size;
    if (!touched[step.coordinate]) {
      touched[step.coordinate] = 1;
      if (--remaining == 0) return {t, false};
    }
  }
  throw SimulationFault("time_all_coordinates_jumped: event budget exhausted", PathOutcome{});
}

}  // namespace qsdlab
