#pragma once

// Empirical measures, initial laws, shared partitions and TV distances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "state.hpp"

namespace qsdlab {

// Weighted sample of live states. An empty measure (no survivors) is an
// explicit degenerate value and must not be used as a law.
struct EmpiricalMeasure {
  std::vector<AbsorbedState> particles;
  std::vector<double> weights;
  std::size_t n_launched = 0;
  std::size_t n_survived = 0;
  double time = 0.0;
  std::uint64_t resampling_count = 0;
  std::string method;

  bool degenerate() const { return n_survived == 0 || particles.empty(); }

  void require_nondegenerate(const char* who) const {
    if (degenerate()) throw DegenerateError(std::string(who) + ": empirical measure has no survivors");
  }

  // Equal weights over `states`.
  static EmpiricalMeasure uniform(std::vector<AbsorbedState> states, std::size_t launched, double time, std::string method) {
    EmpiricalMeasure m;
    m.n_survived = states.size();
    m.weights.assign(states.size(), states.empty() ? 0.0 : 1.0 / static_cast<double>(states.size()));
    m.particles = std::move(states);
    m.n_launched = launched;
    m.time = time;
    m.method = std::move(method);
    return m;
  }

  // 1 / sum w^2
  double effective_size() const {
    double s = 0.0;
    for (double w : weights) s += w * w;
    return s > 0.0 ? 1.0 / s : 0.0;
  }

  double mean_coordinate(std::size_t i) const {
    double m = 0.0;
    for (std::size_t k = 0; k < particles.size(); ++k) m += weights[k] * particles[k].x().at(i);
    return m;
  }
};

// Initial distribution mu0: finitely many weighted atoms.
class InitialLaw {
 public:
  InitialLaw() = default;
  InitialLaw(std::vector<AbsorbedState> atoms, std::vector<double> weights) : atoms_(std::move(atoms)) {
    if (atoms_.empty() || weights.size() != atoms_.size()) throw ValidationError("InitialLaw: need one weight per atom");
    double acc = 0.0;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      if (!atoms_[k].alive()) throw ValidationError("InitialLaw: atoms must be live states");
      if (weights[k] < 0.0 || !std::isfinite(weights[k])) throw DomainError("InitialLaw: weights must be finite and >= 0");
      acc += weights[k];
      cumulative_.push_back(acc);
    }
    if (!(acc > 0.0)) throw DomainError("InitialLaw: total weight must be positive");
    for (double& c : cumulative_) c /= acc;
    cumulative_.back() = 1.0;
  }

  static InitialLaw point(AbsorbedState x) { return InitialLaw({std::move(x)}, {1.0}); }
  static InitialLaw point(Point x) { return point(AbsorbedState(std::move(x))); }

  // Law on chain states from a probability vector.
  static InitialLaw on_states(const std::vector<double>& probs) {
    std::vector<AbsorbedState> atoms;
    std::vector<double> w;
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (probs[i] > 0.0) {
        atoms.push_back(AbsorbedState::chain_state(i));
        w.push_back(probs[i]);
      }
    return InitialLaw(std::move(atoms), std::move(w));
  }

  static InitialLaw from_measure(const EmpiricalMeasure& m) {
    m.require_nondegenerate("InitialLaw::from_measure");
    return InitialLaw(m.particles, m.weights);
  }

  // One uniform draw when there is more than one atom, none otherwise.
  const AbsorbedState& sample(Rng& rng) const {
    if (atoms_.size() == 1) return atoms_.front();
    const double u = rng.uniform();
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    return atoms_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

  const std::vector<AbsorbedState>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }

 private:
  std::vector<AbsorbedState> atoms_;
  std::vector<double> cumulative_;
};

// Shared partition used to compare measures. Either discrete (chain states,
// optionally grouped into cells) or a product grid over selected coordinates;
// coordinate -1 denotes the population size N.
class Partition {
 public:
  struct Axis {
    int coordinate = 0;
    std::vector<double> edges;  // interior edges, increasing; cells are open-ended at both extremes
  };

  static Partition discrete(std::size_t n_states, std::vector<std::size_t> group = {}) {
    Partition p;
    p.discrete_ = true;
    if (group.empty()) {
      group.resize(n_states);
      for (std::size_t i = 0; i < n_states; ++i) group[i] = i;
    }
    if (group.size() != n_states) throw ValidationError("Partition: group map size mismatch");
    p.group_ = std::move(group);
    p.cells_ = p.group_.empty() ? 0 : *std::max_element(p.group_.begin(), p.group_.end()) + 1;
    return p;
  }

  // Contiguous blocks of `block` chain states.
  static Partition discrete_blocks(std::size_t n_states, std::size_t block) {
    if (block == 0) throw ValidationError("Partition: block size must be positive");
    std::vector<std::size_t> g(n_states);
    for (std::size_t i = 0; i < n_states; ++i) g[i] = i / block;
    return discrete(n_states, std::move(g));
  }

  static Partition grid(std::vector<Axis> axes) {
    Partition p;
    p.axes_ = std::move(axes);
    p.cells_ = 1;
    for (const auto& a : p.axes_) {
      if (!std::is_sorted(a.edges.begin(), a.edges.end())) throw ValidationError("Partition: edges must be increasing");
      p.cells_ *= a.edges.size() + 1;
    }
    return p;
  }

  // Edges at pooled sample quantiles of both measures, `bins` per axis.
  static Partition pooled_quantiles(const EmpiricalMeasure& a, const EmpiricalMeasure& b, std::size_t bins,
                                    std::vector<int> coordinates = {0}) {
    if (bins < 16 || bins > 256) throw ValidationError("Partition: pooled-quantile bins must be in [16, 256]");
    a.require_nondegenerate("pooled_quantiles");
    b.require_nondegenerate("pooled_quantiles");
    std::vector<Axis> axes;
    for (int c : coordinates) {
      std::vector<double> pooled;
      pooled.reserve(a.particles.size() + b.particles.size());
      for (const auto* m : {&a, &b})
        for (const auto& s : m->particles) pooled.push_back(value(s, c));
      std::sort(pooled.begin(), pooled.end());
      Axis axis{c, {}};
      for (std::size_t k = 1; k < bins; ++k) {
        const double e = pooled[k * pooled.size() / bins];
        if (axis.edges.empty() || e > axis.edges.back()) axis.edges.push_back(e);
      }
      axes.push_back(std::move(axis));
    }
    return grid(std::move(axes));
  }

  std::size_t cells() const { return cells_; }
  bool is_discrete() const { return discrete_; }
  const std::vector<Axis>& axes() const { return axes_; }

  std::size_t cell_of(const AbsorbedState& s) const {
    if (discrete_) {
      const std::size_t i = s.index();
      if (i >= group_.size()) throw ValidationError("Partition: state index out of range");
      return group_[i];
    }
    std::size_t cell = 0;
    for (const auto& a : axes_) {
      const double v = value(s, a.coordinate);
      const auto k = static_cast<std::size_t>(std::upper_bound(a.edges.begin(), a.edges.end(), v) - a.edges.begin());
      cell = cell * (a.edges.size() + 1) + k;
    }
    return cell;
  }

  std::vector<double> histogram(const EmpiricalMeasure& m) const {
    std::vector<double> h(cells_, 0.0);
    for (std::size_t k = 0; k < m.particles.size(); ++k) h[cell_of(m.particles[k])] += m.weights[k];
    return h;
  }

  // Aggregates an exact law on chain states into cells.
  std::vector<double> aggregate(std::span<const double> probs) const {
    if (!discrete_) throw UsageError("Partition: aggregate needs a discrete partition");
    if (probs.size() != group_.size()) throw UsageError("Partition: law size mismatch");
    std::vector<double> h(cells_, 0.0);
    for (std::size_t i = 0; i < probs.size(); ++i) h[group_[i]] += probs[i];
    return h;
  }

  std::string fingerprint() const {
    std::ostringstream os;
    os.precision(17);
    if (discrete_) {
      os << "discrete:";
      for (auto g : group_) os << g << ",";
    } else {
      for (const auto& a : axes_) {
        os << "axis" << a.coordinate << ":";
        for (double e : a.edges) os << e << ",";
        os << ";";
      }
    }
    return os.str();
  }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.discrete_ == b.discrete_ && a.group_ == b.group_ && a.cells_ == b.cells_ && a.fingerprint() == b.fingerprint();
  }

 private:
  static double value(const AbsorbedState& s, int coordinate) {
    return coordinate < 0 ? s.n() : s.x().at(static_cast<std::size_t>(coordinate));
  }

  bool discrete_ = false;
  std::vector<std::size_t> group_;
  std::vector<Axis> axes_;
  std::size_t cells_ = 0;
};

struct Histogram {
  std::string partition;  // fingerprint
  std::vector<double> probs;
  double effective_n = 0.0;  // 0 for exact laws

  static Histogram of(const EmpiricalMeasure& m, const Partition& p) {
    m.require_nondegenerate("Histogram::of");
    return {p.fingerprint(), p.histogram(m), m.effective_size()};
  }
  static Histogram exact(std::vector<double> probs, const Partition& p) { return {p.fingerprint(), std::move(probs), 0.0}; }
};

struct TvEstimate {
  double value = 0.0;
  double se = 0.0;  // delta-method standard error
};

// 1/2 sum |p - q| with the delta-method standard error of the sign-weighted
// linear statistic. Empirical TV is biased upward by O(sqrt(cells / n)).
inline TvEstimate tv_distance(const Histogram& a, const Histogram& b) {
  if (a.partition != b.partition || a.probs.size() != b.probs.size())
    throw UsageError("tv_distance: histograms built on different partitions");
  double tv = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t c = 0; c < a.probs.size(); ++c) {
    const double d = a.probs[c] - b.probs[c];
    tv += std::abs(d);
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    sa += sign * a.probs[c];
    sb += sign * b.probs[c];
  }
  double var = 0.0;
  // Var(sum_c s_c p_hat_c) = (sum_c s_c^2 p_c - (sum_c s_c p_c)^2) / n, with s_c^2 = 1.
  auto part = [](const Histogram& h, double signed_mass) {
    if (h.effective_n <= 0.0) return 0.0;
    return std::max(0.0, 1.0 - signed_mass * signed_mass) / h.effective_n;
  };
  var = part(a, sa) + part(b, sb);
  return {std::min(1.0, 0.5 * tv), 0.5 * std::sqrt(var)};
}

inline double tv_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b, const Partition& p) {
  a.require_nondegenerate("tv_distance");
  b.require_nondegenerate("tv_distance");
  return tv_distance(Histogram::of(a, p), Histogram::of(b, p)).value;
}

// TV between exact laws on the same state space.
inline double tv_exact(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw UsageError("tv_exact: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace qsdlab
