#pragma once

// Exact quantities on finite sub-Markov chains: QSD, extinction rate,
// survival capacity, the h-transformed (Q-process) generator and exact
// conditioned marginals. Every Monte Carlo estimator is checked against these.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "chain.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "models/pure_jump.hpp"

namespace qsdlab {

struct SpectralTriple {
  std::vector<double> alpha;  // QSD, sums to 1
  double lambda0 = 0.0;       // extinction rate
  std::vector<double> eta;    // survival capacity, <alpha, eta> = 1
  std::size_t iterations = 0;
};

struct EigOptions {
  double tol = 1e-12;
  std::size_t max_iterations = 1'000'000;
  // Iterations on one kernel power before squaring it.
  std::size_t iterations_per_power = 200;
};

namespace detail {

inline void normalize_l1(std::vector<double>& v) {
  const double s = sum(v);
  for (double& x : v) x /= s;
}

}  // namespace detail

// Perron triple by power iteration on K = exp(L h), h = 1 / (2 max|L_ii|).
// When successive iterates stall, K is squared (h doubled), which keeps the
// iteration count small on chains with a slow spectral gap.
inline SpectralTriple qsd_eig(const SubMarkovChain& chain, const EigOptions& opt = {}) {
  chain.require_irreducible();
  const std::size_t n = chain.size();
  const double m = chain.max_exit_rate();
  double h = m > 0.0 ? 1.0 / (2.0 * m) : 1.0;
  Matrix k = expm(chain.generator() * h);

  std::vector<double> alpha(n, 1.0 / static_cast<double>(n));
  std::vector<double> eta(n, 1.0);
  std::size_t it = 0;
  std::size_t on_power = 0;
  double perron = 1.0;
  for (;;) {
    if (it >= opt.max_iterations)
      throw ConvergenceError("qsd_eig: no convergence within max iterations (spectral gap too small)");
    ++it;
    ++on_power;
    std::vector<double> a = left_multiply(alpha, k);
    perron = sum(a);
    if (!(perron > 0.0)) throw UnderflowError("qsd_eig: kernel power underflowed; chain killing too strong");
    detail::normalize_l1(a);
    std::vector<double> e = right_multiply(k, eta);
    const double emax = *std::max_element(e.begin(), e.end());
    for (double& v : e) v /= emax;
    const double da = l1_distance(a, alpha);
    const double de = l1_distance(e, eta) / static_cast<double>(n);
    alpha = std::move(a);
    eta = std::move(e);
    if (da < opt.tol && de < opt.tol) break;
    if (on_power >= opt.iterations_per_power) {
      k = k * k;
      h *= 2.0;
      on_power = 0;
    }
  }

  // Rayleigh quotient; -log(perron) / h loses digits once h is large.
  auto rayleigh = [&] { return -dot(alpha, right_multiply(chain.generator(), eta)) / dot(alpha, eta); };
  double lambda = rayleigh();
  // Squaring K accumulates rounding in the vectors; one shifted inverse
  // iteration step on L + lambda I removes it.
  if (n > 1) {
    Matrix shifted = chain.generator();
    for (std::size_t i = 0; i < n; ++i) shifted(i, i) += lambda;
    Matrix transposed(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) transposed(i, j) = shifted(j, i);
    auto e = lu_solve(shifted, eta);
    auto a = lu_solve(transposed, alpha);
    const bool finite = !e.empty() && !a.empty() && std::all_of(e.begin(), e.end(), [](double v) { return std::isfinite(v); }) &&
                        std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
    if (finite && sum(a) != 0.0 && sum(e) != 0.0) {
      detail::normalize_l1(a);
      const double emax = *std::max_element(e.begin(), e.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
      for (double& v : e) v /= emax;
      if (std::all_of(a.begin(), a.end(), [](double v) { return v >= 0.0; }) &&
          std::all_of(e.begin(), e.end(), [](double v) { return v > 0.0; })) {
        alpha = std::move(a);
        eta = std::move(e);
        lambda = rayleigh();
      }
    }
  }

  SpectralTriple out;
  out.lambda0 = lambda;
  out.alpha = std::move(alpha);
  const double norm = dot(out.alpha, eta);
  for (double& v : eta) v /= norm;
  out.eta = std::move(eta);
  out.iterations = it;
  return out;
}

// Doob h-transform: L^Q_ij = L_ij eta_j / eta_i (i != j), L^Q_ii = L_ii + lambda0.
inline Matrix q_generator(const SubMarkovChain& chain, const SpectralTriple& triple, double tol = 1e-12) {
  const std::size_t n = chain.size();
  for (double v : triple.eta)
    if (!(v > tol)) throw ValidationError("q_generator: eta not bounded away from zero (ill-conditioned transform)");
  Matrix q(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) {
        q(i, j) = chain.generator()(i, j) * triple.eta[j] / triple.eta[i];
        off += q(i, j);
      }
    // Zero row sum by construction; equals L_ii + lambda0 up to rounding.
    q(i, i) = -off;
  }
  return q;
}

// beta_i proportional to alpha_i eta_i.
inline std::vector<double> quasi_ergodic_law(const SpectralTriple& triple) {
  std::vector<double> b(triple.alpha.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = triple.alpha[i] * triple.eta[i];
  detail::normalize_l1(b);
  return b;
}

// Stationary law of a conservative generator.
inline std::vector<double> stationary_law(const Matrix& conservative, const EigOptions& opt = {}) {
  return qsd_eig(SubMarkovChain(conservative), opt).alpha;
}

// mu exp(L t), unnormalized. Throws UnderflowError when the surviving mass
// drops below 1e-300.
inline std::vector<double> propagate_left(const SubMarkovChain& chain, std::vector<double> mu, double t) {
  if (mu.size() != chain.size()) throw ValidationError("propagate: distribution size mismatch");
  double log_scale = 0.0;
  auto v = expm_action(chain.generator(), std::move(mu), t, Side::left, [&](std::vector<double>& x) {
    const double s = sum(x);
    if (!(s > 0.0)) throw UnderflowError("mcne_exact: survival mass vanished; use a smaller t");
    log_scale += std::log(s);
    if (log_scale < std::log(1e-300)) throw UnderflowError("mcne_exact: survival mass below 1e-300; use a smaller t");
    for (double& y : x) y /= s;
  });
  const double scale = std::exp(log_scale);
  for (double& y : v) y *= scale;
  return v;
}

// exp(L t) f
inline std::vector<double> propagate_right(const SubMarkovChain& chain, std::vector<double> f, double t) {
  if (f.size() != chain.size()) throw ValidationError("propagate: vector size mismatch");
  return expm_action(chain.generator(), std::move(f), t, Side::right);
}

// Conditioned marginal mu A_t = mu exp(L t) / (mu exp(L t) 1).
inline std::vector<double> mcne_exact(const SubMarkovChain& chain, const std::vector<double>& mu0, double t) {
  if (mu0.size() != chain.size()) throw ValidationError("mcne_exact: distribution size mismatch");
  for (double v : mu0)
    if (v < 0.0) throw DomainError("mcne_exact: negative initial mass");
  std::vector<double> mu = mu0;
  const double s0 = sum(mu);
  if (!(s0 > 0.0)) throw DomainError("mcne_exact: initial law has no mass");
  for (double& v : mu) v /= s0;
  if (t == 0.0) return mu;
  auto v = expm_action(chain.generator(), std::move(mu), t, Side::left, [&, log_mass = 0.0](std::vector<double>& x) mutable {
    const double s = sum(x);
    if (!(s > 0.0)) throw UnderflowError("mcne_exact: survival mass vanished; use a smaller t");
    log_mass += std::log(s);
    if (log_mass < std::log(1e-300)) throw UnderflowError("mcne_exact: survival mass below 1e-300; use a smaller t");
    for (double& y : x) y /= s;
  });
  detail::normalize_l1(v);
  return v;
}

// P_mu(t < tau) exactly.
inline double survival_exact(const SubMarkovChain& chain, const std::vector<double>& mu0, double t) {
  return sum(propagate_left(chain, mu0, t));
}

// Exact marginals of the Q-process started at state x, at each time of t_grid.
inline std::vector<std::vector<double>> simulate_qprocess_htransform(const SubMarkovChain& chain,
                                                                     const SpectralTriple& triple, std::size_t x,
                                                                     const std::vector<double>& t_grid) {
  if (x >= chain.size()) throw ValidationError("htransform: start state out of range");
  const SubMarkovChain q(q_generator(chain, triple));
  std::vector<std::vector<double>> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    std::vector<double> delta(chain.size(), 0.0);
    delta[x] = 1.0;
    auto v = expm_action(q.generator(), std::move(delta), t, Side::left);
    for (double& y : v) y = std::max(y, 0.0);
    detail::normalize_l1(v);
    out.push_back(std::move(v));
  }
  return out;
}

// exp(L_D t) for the chain killed on leaving the state set D: entry (a, b)
// is P_{D[a]}(X_t = D[b], t < tau, X_s in D for s <= t).
inline Matrix taboo_kernel(const SubMarkovChain& chain, const std::vector<std::size_t>& inside, double t) {
  const SubMarkovChain sub = chain.restricted(inside);
  return expm(sub.generator() * t);
}

// Lattice for discretizing continuous-space models: points lo + k spacing
// along every axis, up to hi.
struct LatticeGrid {
  Point lo, hi;
  double spacing = 0.1;

  std::vector<std::size_t> shape() const {
    std::vector<std::size_t> s(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i)
      s[i] = static_cast<std::size_t>(std::floor((hi[i] - lo[i]) / spacing + 1e-9)) + 1;
    return s;
  }
};

// Sub-Markov chain on a lattice: L_xy = h(x, y - x) spacing^d for y != x,
// killing rho_e(x) plus the lattice jump mass that lands outside the grid.
inline SubMarkovChain discretize_pure_jump(const PureJumpParams& p, const LatticeGrid& grid) {
  const std::size_t d = p.dim;
  if (grid.lo.size() != d || grid.hi.size() != d) throw ValidationError("discretize: grid dimension mismatch");
  if (!(grid.spacing > 0.0)) throw ValidationError("discretize: spacing must be positive");
  if (!p.kernel.empty()) {
    double scale = p.kernel.support_radius();
    if (p.uniform_ball) scale = p.uniform_ball->R;
    if (grid.spacing > scale / 4.0) throw ValidationError("discretize: grid too coarse (spacing > jump radius / 4)");
  }
  const auto shape = grid.shape();
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<Point> pts(n, Point(d));
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t r = idx;
    for (std::size_t i = d; i-- > 0;) {
      pts[idx][i] = grid.lo[i] + static_cast<double>(r % shape[i]) * grid.spacing;
      r /= shape[i];
    }
  }
  const double cell = std::pow(grid.spacing, static_cast<double>(d));
  Matrix rates(n, n);
  std::vector<double> kill(n, 0.0);

  // Lattice offsets covering the kernel support.
  const double reach = p.kernel.empty() ? 0.0 : p.kernel.support_radius();
  const auto kmax = static_cast<long>(std::ceil(reach / grid.spacing));
  std::vector<std::vector<long>> offsets;
  if (!p.kernel.empty()) {
    std::vector<long> o(d, -kmax);
    for (;;) {
      offsets.push_back(o);
      std::size_t i = 0;
      while (i < d && ++o[i] > kmax) o[i++] = -kmax;
      if (i == d) break;
    }
  }
  for (std::size_t idx = 0; idx < n; ++idx) {
    const Point& x = pts[idx];
    double out_of_grid = 0.0;
    std::vector<long> coord(d);
    {
      std::size_t r = idx;
      for (std::size_t i = d; i-- > 0;) {
        coord[i] = static_cast<long>(r % shape[i]);
        r /= shape[i];
      }
    }
    for (const auto& o : offsets) {
      bool zero = true;
      Point w(d);
      for (std::size_t i = 0; i < d; ++i) {
        zero = zero && o[i] == 0;
        w[i] = static_cast<double>(o[i]) * grid.spacing;
      }
      if (zero) continue;
      const double mass = p.kernel.density(x, w) * cell;
      if (mass == 0.0) continue;
      bool inside = true;
      std::size_t target = 0;
      for (std::size_t i = 0; i < d; ++i) {
        const long c = coord[i] + o[i];
        if (c < 0 || c >= static_cast<long>(shape[i])) {
          inside = false;
          break;
        }
        target = target * shape[i] + static_cast<std::size_t>(c);
      }
      if (inside)
        rates(idx, target) += mass;
      else
        out_of_grid += mass;
    }
    kill[idx] = p.rho_e(x) + out_of_grid;
  }
  return SubMarkovChain::from_rates(rates, kill, std::move(pts));
}

}  // namespace qsdlab
