#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace qsdlab {

using Point = std::vector<double>;

// A live point of the state space, or the cemetery.
//
// `x` holds the spatial coordinates (for finite chains, x[0] is the state
// index). `n` is the population size of the eco-evolutionary model and is
// zero elsewhere.
class AbsorbedState {
 public:
  AbsorbedState() = default;
  explicit AbsorbedState(Point x, double n = 0.0) : x_(std::move(x)), n_(n), alive_(true) {}

  static AbsorbedState cemetery() { return AbsorbedState{}; }
  static AbsorbedState chain_state(std::size_t index) { return AbsorbedState(Point{static_cast<double>(index)}); }

  bool alive() const { return alive_; }
  bool is_cemetery() const { return !alive_; }

  const Point& x() const { return x_; }
  Point& x() { return x_; }
  double n() const { return n_; }
  void set_n(double n) { n_ = n; }
  std::size_t dimension() const { return x_.size(); }
  std::size_t index() const { return static_cast<std::size_t>(x_.at(0)); }

  void kill() {
    alive_ = false;
    x_.clear();
    n_ = 0.0;
  }

  bool finite() const {
    if (!std::isfinite(n_)) return false;
    for (double v : x_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const AbsorbedState&, const AbsorbedState&) = default;

 private:
  Point x_;
  double n_ = 0.0;
  bool alive_ = false;
};

inline double norm2(const Point& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double norm_inf(const Point& x) {
  double s = 0.0;
  for (double v : x) s = std::max(s, std::abs(v));
  return s;
}

enum class Norm { euclidean, sup };

inline double norm(const Point& x, Norm kind) { return kind == Norm::euclidean ? norm2(x) : norm_inf(x); }

inline const char* to_string(Norm kind) { return kind == Norm::euclidean ? "l2" : "linf"; }

}  // namespace qsdlab
