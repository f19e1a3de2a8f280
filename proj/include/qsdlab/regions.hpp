#pragma once

// Declared compacts: nested balls carrying rate bounds, and the confinement
// regions used by the audits.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "state.hpp"

namespace qsdlab {

// Nested closed balls D_k = B(0, radius_k) with a declared upper bound on the
// total event rate on each.
class RegionBounds {
 public:
  struct Entry {
    double radius;
    double bound;
  };

  RegionBounds() = default;
  RegionBounds(std::vector<Entry> entries, Norm norm = Norm::euclidean) : entries_(std::move(entries)), norm_(norm) {
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.radius < b.radius; });
    for (const auto& e : entries_)
      if (!(e.radius > 0.0) || e.bound < 0.0) throw ValidationError("RegionBounds: radius must be > 0 and bound >= 0");
  }

  // Bounds computed from a sup-on-ball functional over radii 1, 2, 4, ...
  template <class SupOnBall>
  static RegionBounds doubling(SupOnBall&& sup_on_ball, double max_radius, Norm norm = Norm::euclidean) {
    std::vector<Entry> e;
    for (double r = 1.0; r <= max_radius * 2.0; r *= 2.0) e.push_back({r, sup_on_ball(r)});
    return RegionBounds(std::move(e), norm);
  }

  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }
  Norm norm_kind() const { return norm_; }

  // Index of the smallest declared ball containing x.
  std::optional<std::size_t> region_of(const Point& x) const {
    const double r = norm(x, norm_);
    for (std::size_t k = 0; k < entries_.size(); ++k)
      if (r <= entries_[k].radius) return k;
    return std::nullopt;
  }

  // Asserts rate <= declared bound whenever x lies in a declared compact.
  void check(const Point& x, double rate) const {
    if (const auto k = region_of(x)) {
      if (rate > entries_[*k].bound * (1.0 + 1e-12))
        throw BoundViolation("rate " + std::to_string(rate) + " exceeds declared bound " +
                             std::to_string(entries_[*k].bound) + " on compact of radius " +
                             std::to_string(entries_[*k].radius));
    }
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "bounds@" << to_string(norm_);
    for (const auto& e : entries_) os << "(" << e.radius << "," << e.bound << ")";
    return os.str();
  }

 private:
  std::vector<Entry> entries_;
  Norm norm_ = Norm::euclidean;
};

// Closed ball in a chosen norm.
struct BallRegion {
  Point center;
  double radius = 0.0;
  Norm norm = Norm::euclidean;
  bool open = false;
};

// Closed box [lo, hi].
struct BoxRegion {
  Point lo, hi;
};

// Set of finite-chain states.
struct StateSetRegion {
  std::set<std::size_t> states;
};

// Eco-evolutionary compact [1/l, l] x closed ball(0, l).
struct PopulationRegion {
  double level = 1.0;
};

class Region {
 public:
  using Shape = std::variant<BallRegion, BoxRegion, StateSetRegion, PopulationRegion>;

  Region() : shape_(BallRegion{}) {}
  Region(Shape s) : shape_(std::move(s)) {}

  static Region ball(Point center, double radius, Norm norm = Norm::euclidean) {
    return Region(BallRegion{std::move(center), radius, norm, false});
  }
  static Region open_ball(Point center, double radius, Norm norm = Norm::euclidean) {
    return Region(BallRegion{std::move(center), radius, norm, true});
  }
  static Region states(std::set<std::size_t> s) { return Region(StateSetRegion{std::move(s)}); }

  bool contains(const AbsorbedState& s) const {
    if (!s.alive()) return false;
    return std::visit(
        [&](const auto& r) -> bool {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, BallRegion>) {
            Point d = s.x();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] -= r.center.at(i);
            const double nd = norm(d, r.norm);
            return r.open ? nd < r.radius : nd <= r.radius;
          } else if constexpr (std::is_same_v<T, BoxRegion>) {
            for (std::size_t i = 0; i < s.x().size(); ++i)
              if (s.x()[i] < r.lo.at(i) || s.x()[i] > r.hi.at(i)) return false;
            return true;
          } else if constexpr (std::is_same_v<T, StateSetRegion>) {
            return r.states.count(s.index()) > 0;
          } else {
            if (s.n() < 1.0 / r.level || s.n() > r.level) return false;
            return norm2(s.x()) <= r.level;
          }
        },
        shape_);
  }

  // Convex regions: a straight segment with both endpoints inside stays inside.
  bool convex() const { return !std::holds_alternative<StateSetRegion>(shape_); }

  const Shape& shape() const { return shape_; }

  // Lebesgue volume where defined (balls and boxes); state count for sets.
  double volume() const {
    return std::visit(
        [](const auto& r) -> double {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, BallRegion>) {
            const auto d = static_cast<double>(r.center.size());
            if (r.norm == Norm::sup) return std::pow(2.0 * r.radius, d);
            return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0) * std::pow(r.radius, d);
          } else if constexpr (std::is_same_v<T, BoxRegion>) {
            double v = 1.0;
            for (std::size_t i = 0; i < r.lo.size(); ++i) v *= r.hi[i] - r.lo[i];
            return v;
          } else if constexpr (std::is_same_v<T, StateSetRegion>) {
            return static_cast<double>(r.states.size());
          } else {
            throw UsageError("Region: volume undefined for population compacts");
          }
        },
        shape_);
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& r) {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, BallRegion>) {
            os << (r.open ? "open_ball(" : "ball(") << r.radius << "," << to_string(r.norm) << ",c=";
            for (std::size_t i = 0; i < r.center.size(); ++i) os << (i ? "," : "") << r.center[i];
            os << ")";
          } else if constexpr (std::is_same_v<T, BoxRegion>) {
            os << "box(";
            for (std::size_t i = 0; i < r.lo.size(); ++i) os << (i ? "," : "") << r.lo[i] << ":" << r.hi[i];
            os << ")";
          } else if constexpr (std::is_same_v<T, StateSetRegion>) {
            os << "states(";
            bool first = true;
            for (auto s : r.states) {
              os << (first ? "" : ",") << s;
              first = false;
            }
            os << ")";
          } else {
            os << "population(" << r.level << ")";
          }
        },
        shape_);
    return os.str();
  }

 private:
  Shape shape_;
};

}  // namespace qsdlab
