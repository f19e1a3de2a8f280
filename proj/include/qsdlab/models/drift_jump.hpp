#pragma once

#include <sstream>
#include <string>

#include "../process.hpp"
#include "../rate_functions.hpp"
#include "../regions.hpp"

namespace qsdlab {

// Piecewise-deterministic process: constant drift -v e_1 between jumps,
// jumps with size density h(x, .), killing at rate rho_e(x).
struct DriftJumpParams {
  std::size_t dim = 1;
  double v = 1.0;
  JumpKernel kernel;
  RadialFunction rho_e;
  // Favorable-jump ball B(S e_1, delta_S) and its declared density floor.
  double S = 0.0;
  double delta_S = 0.0;
  double h_floor = 0.0;
  // Bounds on rho_J + rho_e per declared compact; thinning uses these.
  RegionBounds bounds;

  double rho_J(const Point& x) const { return kernel.empty() ? 0.0 : kernel.rate(x); }
  double total_rate(const Point& x) const { return rho_J(x) + rho_e(x); }

  void validate() const {
    if (!(v > 0.0)) throw DomainError("drift jump: speed v must be positive");
    if (!kernel.empty() && kernel.dimension() != dim) throw ValidationError("drift jump: kernel dimension mismatch");
    if (!rho_e.nonnegative()) throw DomainError("drift jump: rho_e must be nonnegative");
    if (bounds.empty()) throw ValidationError("drift jump: thinning needs declared rate bounds");
    if (delta_S < 0.0 || (delta_S > 0.0 && !(delta_S < S))) throw ValidationError("drift jump: need 0 < delta_S < S");
  }

  void with_default_bounds(double max_radius = 1024.0) {
    bounds = RegionBounds::doubling([&](double r) { return kernel.sup_rate_on_ball(r) + rho_e.sup_on_ball(r); },
                                    max_radius, rho_e.norm_kind());
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "drift_jump(d=" << dim << ",v=" << v << "," << kernel.describe() << ",rho_e=" << rho_e.describe() << ",S=" << S
       << ",dS=" << delta_S << ",hmin=" << h_floor << "," << bounds.describe() << ")";
    return os.str();
  }
};

// x - v s e_1
inline Point drift_jump_flow(const DriftJumpParams& p, const Point& x, double s) {
  Point y = x;
  y[0] -= p.v * s;
  return y;
}

namespace detail {

// Time for x - v s e_1 to leave the closed ball of radius r (x inside).
inline double flow_exit_time(const Point& x, double v, double r, Norm norm) {
  if (norm == Norm::sup) return std::max(0.0, (x[0] + r) / v);
  double rest = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) rest += x[i] * x[i];
  const double disc = std::max(0.0, r * r - rest);
  return std::max(0.0, (x[0] + std::sqrt(disc)) / v);
}

}  // namespace detail

class DriftJumpModel {
 public:
  explicit DriftJumpModel(DriftJumpParams p) : p_(std::move(p)) { p_.validate(); }

  const DriftJumpParams& params() const { return p_; }

  // Thinning along the flow, one declared compact at a time: inside the
  // smallest ball D_k holding the current point the bound of D_k applies
  // until the flow leaves D_k.
  Transition next(const AbsorbedState& s, double t, double, Rng& rng, const StepControls&) const {
    Point x = s.x();
    double elapsed = 0.0;
    const auto& regions = p_.bounds.entries();
    auto k0 = p_.bounds.region_of(x);
    if (!k0) throw BoundViolation("drift jump: state outside every declared compact");
    std::size_t k = *k0;
    auto rate_at = [&](const Point& y) { return p_.total_rate(y); };
    auto flow = [&](const Point& y, double ds) { return drift_jump_flow(p_, y, ds); };
    for (;;) {
      const double exit = detail::flow_exit_time(x, p_.v, regions[k].radius, p_.bounds.norm_kind());
      const auto hit = thinning_next_jump(rate_at, regions[k].bound, flow, x, exit, rng);
      if (hit) {
        Transition tr;
        tr.time = t + elapsed + hit->time;
        const Point& y = hit->pre_jump;
        const double re = p_.rho_e(y);
        const double total = rate_at(y);
        if (rng.uniform() * total < re) {
          tr.after = AbsorbedState::cemetery();
          tr.event = JumpEvent{tr.time, EventKind::extinction, {}};
        } else {
          Point w = p_.kernel.sample(y, rng);
          Point z = y;
          for (std::size_t i = 0; i < z.size(); ++i) z[i] += w[i];
          tr.after = AbsorbedState(std::move(z));
          tr.event = JumpEvent{tr.time, EventKind::state_jump, std::move(w)};
        }
        return tr;
      }
      x = flow(x, exit);
      elapsed += exit;
      if (++k >= regions.size()) throw BoundViolation("drift jump: flow left the outermost declared compact");
    }
  }

  AbsorbedState evolve(const AbsorbedState& s, double elapsed) const {
    if (!s.alive()) return s;
    return AbsorbedState(drift_jump_flow(p_, s.x(), elapsed));
  }
  bool piecewise_constant() const { return false; }
  std::string describe() const { return p_.describe(); }

 private:
  DriftJumpParams p_;
};

}  // namespace qsdlab
