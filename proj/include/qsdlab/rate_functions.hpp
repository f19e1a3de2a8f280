#pragma once

// Catalogue of rate functions and jump kernels.
//
// Models are assembled from a closed set of named building blocks instead of
// user expressions, so every bound used for thinning or rejection can be
// computed and validated up front.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "state.hpp"

namespace qsdlab {

// Functions of the radius r = |x| (Euclidean or sup norm).
struct ConstantRate {
  double value = 0.0;
};

// sum_k coeffs[k] r^k
struct PolynomialRate {
  std::vector<double> coeffs;
};

// values[k] on {radii[k-1] <= r < radii[k]}; values.size() == radii.size() + 1.
// Balls are open: a point at exactly radii[k] takes values[k+1].
struct PiecewiseRadialRate {
  std::vector<double> radii;
  std::vector<double> values;
};

class RadialFunction {
 public:
  using Form = std::variant<ConstantRate, PolynomialRate, PiecewiseRadialRate>;

  RadialFunction() : form_(ConstantRate{0.0}) {}
  RadialFunction(Form form, Norm norm = Norm::euclidean) : form_(std::move(form)), norm_(norm) { validate(); }

  static RadialFunction constant(double v) { return RadialFunction(ConstantRate{v}); }
  static RadialFunction polynomial(std::vector<double> c, Norm norm = Norm::euclidean) {
    return RadialFunction(PolynomialRate{std::move(c)}, norm);
  }
  static RadialFunction piecewise(std::vector<double> radii, std::vector<double> values, Norm norm = Norm::euclidean) {
    return RadialFunction(PiecewiseRadialRate{std::move(radii), std::move(values)}, norm);
  }

  double at_radius(double r) const {
    return std::visit(
        [r](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantRate>) {
            return f.value;
          } else if constexpr (std::is_same_v<T, PolynomialRate>) {
            double acc = 0.0;
            for (auto it = f.coeffs.rbegin(); it != f.coeffs.rend(); ++it) acc = acc * r + *it;
            return acc;
          } else {
            const auto k = static_cast<std::size_t>(std::upper_bound(f.radii.begin(), f.radii.end(), r) - f.radii.begin());
            return f.values[k];
          }
        },
        form_);
  }

  double operator()(const Point& x) const { return at_radius(norm(x, norm_)); }

  bool nonnegative() const {
    return std::visit(
        [](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantRate>) {
            return f.value >= 0.0;
          } else if constexpr (std::is_same_v<T, PolynomialRate>) {
            return std::all_of(f.coeffs.begin(), f.coeffs.end(), [](double c) { return c >= 0.0; });
          } else {
            return std::all_of(f.values.begin(), f.values.end(), [](double c) { return c >= 0.0; });
          }
        },
        form_);
  }

  // Supremum over the closed ball of radius r. Only defined for rate-like
  // (nonnegative) functions, which are then nondecreasing in r for the
  // polynomial form.
  double sup_on_ball(double r) const {
    if (!nonnegative()) throw DomainError("sup_on_ball: rate function has negative parts");
    return std::visit(
        [&](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantRate>) {
            return f.value;
          } else if constexpr (std::is_same_v<T, PolynomialRate>) {
            return at_radius(r);
          } else {
            double m = f.values[0];
            for (std::size_t k = 0; k < f.radii.size(); ++k)
              if (f.radii[k] <= r) m = std::max(m, f.values[k + 1]);
            return m;
          }
        },
        form_);
  }

  // Global infimum for nonnegative functions.
  double infimum() const {
    if (!nonnegative()) throw DomainError("infimum: rate function has negative parts");
    return std::visit(
        [](const auto& f) -> double {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantRate>) {
            return f.value;
          } else if constexpr (std::is_same_v<T, PolynomialRate>) {
            return f.coeffs.empty() ? 0.0 : f.coeffs[0];
          } else {
            return *std::min_element(f.values.begin(), f.values.end());
          }
        },
        form_);
  }

  // Adds a constant everywhere.
  RadialFunction shifted(double c) const {
    RadialFunction out = *this;
    std::visit(
        [c](auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantRate>) {
            f.value += c;
          } else if constexpr (std::is_same_v<T, PolynomialRate>) {
            if (f.coeffs.empty()) f.coeffs.push_back(0.0);
            f.coeffs[0] += c;
          } else {
            for (double& v : f.values) v += c;
          }
        },
        out.form_);
    return out;
  }

  Norm norm_kind() const { return norm_; }
  const Form& form() const { return form_; }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, ConstantRate>) {
            os << "constant:" << f.value;
          } else if constexpr (std::is_same_v<T, PolynomialRate>) {
            os << "polynomial:";
            for (std::size_t k = 0; k < f.coeffs.size(); ++k) os << (k ? "," : "") << f.coeffs[k];
          } else {
            os << "piecewise_radial:";
            for (std::size_t k = 0; k < f.radii.size(); ++k) os << (k ? "," : "") << f.radii[k];
            os << ":";
            for (std::size_t k = 0; k < f.values.size(); ++k) os << (k ? "," : "") << f.values[k];
          }
        },
        form_);
    os << "@" << to_string(norm_);
    return os.str();
  }

 private:
  void validate() const {
    if (const auto* p = std::get_if<PiecewiseRadialRate>(&form_)) {
      if (p->values.size() != p->radii.size() + 1)
        throw ValidationError("piecewise_radial: need one more value than radii");
      if (!std::is_sorted(p->radii.begin(), p->radii.end()))
        throw ValidationError("piecewise_radial: radii must be increasing");
    }
  }

  Form form_;
  Norm norm_ = Norm::euclidean;
};

inline double unit_ball_volume(std::size_t d) {
  return std::pow(std::numbers::pi, 0.5 * static_cast<double>(d)) / std::tgamma(0.5 * static_cast<double>(d) + 1.0);
}

inline double ball_volume(std::size_t d, double r) { return unit_ball_volume(d) * std::pow(r, static_cast<double>(d)); }

// Density `height` on the open Euclidean ball B(center, radius), scaled by a
// radial modulation of the *current state*.
struct BallComponent {
  double height = 0.0;
  Point center;
  double radius = 0.0;
  RadialFunction modulation = RadialFunction::constant(1.0);
};

// Jump-size density h(x, w) as a finite sum of ball components, plus the
// declared envelope h_max with h(x, w) <= h_max * rate(x).
class JumpKernel {
 public:
  JumpKernel() = default;
  JumpKernel(std::size_t dim, std::vector<BallComponent> comps, double envelope = 0.0)
      : dim_(dim), comps_(std::move(comps)) {
    for (const auto& c : comps_) {
      if (c.center.size() != dim_) throw ValidationError("jump kernel: component center has wrong dimension");
      if (c.height < 0.0 || c.radius <= 0.0) throw DomainError("jump kernel: negative height or nonpositive radius");
      if (!c.modulation.nonnegative()) throw DomainError("jump kernel: modulation must be nonnegative");
    }
    envelope_ = envelope > 0.0 ? envelope : default_envelope();
    lo_.assign(dim_, 0.0);
    hi_.assign(dim_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& c : comps_) {
        lo = std::min(lo, c.center[i] - c.radius);
        hi = std::max(hi, c.center[i] + c.radius);
      }
      lo_[i] = comps_.empty() ? 0.0 : lo;
      hi_[i] = comps_.empty() ? 0.0 : hi;
    }
  }

  // h(x, w) = h_J on B(0, R).
  static JumpKernel uniform_ball(std::size_t dim, double h_J, double R) {
    return JumpKernel(dim, {BallComponent{h_J, Point(dim, 0.0), R, RadialFunction::constant(1.0)}});
  }

  std::size_t dimension() const { return dim_; }
  bool empty() const { return comps_.empty(); }
  const std::vector<BallComponent>& components() const { return comps_; }
  double envelope() const { return envelope_; }

  double density(const Point& x, const Point& w) const {
    double h = 0.0;
    for (const auto& c : comps_) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) d2 += (w[i] - c.center[i]) * (w[i] - c.center[i]);
      if (d2 < c.radius * c.radius) h += c.height * c.modulation(x);
    }
    return h;
  }

  double rate(const Point& x) const {
    double r = 0.0;
    for (const auto& c : comps_) r += c.height * c.modulation(x) * ball_volume(dim_, c.radius);
    return r;
  }

  double sup_rate_on_ball(double radius) const {
    double r = 0.0;
    for (const auto& c : comps_) r += c.height * c.modulation.sup_on_ball(radius) * ball_volume(dim_, c.radius);
    return r;
  }

  double inf_rate() const {
    double r = 0.0;
    for (const auto& c : comps_) r += c.height * c.modulation.infimum() * ball_volume(dim_, c.radius);
    return r;
  }

  // Largest |w| with positive density.
  double support_radius() const {
    double r = 0.0;
    for (const auto& c : comps_) r = std::max(r, norm2(c.center) + c.radius);
    return r;
  }

  const Point& box_lo() const { return lo_; }
  const Point& box_hi() const { return hi_; }

  // Draws w ~ h(x, .)/rate(x) by rejection: uniform proposals on the support
  // box accepted with probability h(x, w) / (h_max * rate(x)).
  Point sample(const Point& x, Rng& rng) const {
    const double bound = envelope_ * rate(x);
    if (!(bound > 0.0)) throw DomainError("jump kernel: sampling from a zero-rate kernel");
    Point w(dim_);
    for (;;) {
      for (std::size_t i = 0; i < dim_; ++i) w[i] = rng.uniform(lo_[i], hi_[i]);
      const double h = density(x, w);
      if (h > bound * (1.0 + 1e-12))
        throw BoundViolation("jump kernel: density exceeds declared envelope h_max * rate");
      if (rng.uniform() * bound < h) return w;
    }
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "kernel(d=" << dim_ << ",env=" << envelope_;
    for (const auto& c : comps_) {
      os << ";ball(h=" << c.height << ",r=" << c.radius << ",c=";
      for (std::size_t i = 0; i < c.center.size(); ++i) os << (i ? "," : "") << c.center[i];
      os << ",m=" << c.modulation.describe() << ")";
    }
    os << ")";
    return os.str();
  }

 private:
  // sum_k m_k h_k <= max_k(1/vol_k) * sum_k m_k h_k vol_k, pointwise in x.
  double default_envelope() const {
    double e = 0.0;
    for (const auto& c : comps_) e = std::max(e, 1.0 / ball_volume(dim_, c.radius));
    return e;
  }

  std::size_t dim_ = 0;
  std::vector<BallComponent> comps_;
  double envelope_ = 0.0;
  Point lo_, hi_;
};

}  // namespace qsdlab
