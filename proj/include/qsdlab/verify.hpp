#pragma once

// Numerical audits of the structural assumptions and theorem conclusions.
// Monte Carlo can support an inequality but not prove it, so a passing
// report reads "consistent with", never "verified".

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "estimation.hpp"
#include "regions.hpp"

namespace qsdlab {

struct EvidenceTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) {
    if (row.size() != columns.size()) throw UsageError("EvidenceTable: row width mismatch");
    rows.push_back(std::move(row));
  }
};

struct AuditReport {
  std::string tag;
  std::map<std::string, double> constants;
  bool pass = false;
  bool inconclusive = false;
  std::string verdict;
  std::string note;
  EvidenceTable evidence;
  std::uint64_t seed = 0;
  std::uint64_t stream_base = 0;
  std::string model_hash;
  // Wall time; kept out of the serialized report so files stay reproducible.
  double elapsed_seconds = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["audit"] = tag;
    j["pass"] = pass;
    j["inconclusive"] = inconclusive;
    j["verdict"] = verdict;
    if (!note.empty()) j["note"] = note;
    j["constants"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : constants) j["constants"][k] = v;
    j["seed"] = seed;
    j["stream_base"] = stream_base;
    j["model_hash"] = model_hash;
    j["evidence_rows"] = evidence.rows.size();
    return j;
  }

  std::string text() const {
    std::ostringstream os;
    os.precision(6);
    os << tag << ": " << verdict << "\n";
    for (const auto& [k, v] : constants) os << "  " << k << " = " << v << "\n";
    if (!note.empty()) os << "  note: " << note << "\n";
    os << "  seed " << seed << ", model " << model_hash << ", " << evidence.rows.size() << " evidence rows\n";
    return os.str();
  }
};

namespace detail {

inline AuditReport start_report(std::string tag, const std::string& hash, const McContext& ctx, std::vector<std::string> cols) {
  AuditReport r;
  r.tag = std::move(tag);
  r.model_hash = hash;
  r.seed = ctx.seed;
  r.stream_base = ctx.stream_base;
  r.evidence.columns = std::move(cols);
  return r;
}

inline void finish(AuditReport& r, bool pass, const std::string& claim) {
  r.pass = pass && !r.inconclusive;
  if (r.inconclusive)
    r.verdict = "inconclusive: " + claim;
  else
    r.verdict = (pass ? "consistent with " : "not consistent with ") + claim;
}

// Stops the path at the first state outside `region`. Straight flows
// between events stay inside a convex region when both ends do.
template <class M>
struct Confined {
  const M& model;
  const Region& region;
  bool left = false;

  bool segment(const AbsorbedState& s, double t0, double t1) {
    if (!model.piecewise_constant() && !region.contains(model.evolve(s, t1 - t0))) {
      left = true;
      return true;
    }
    return false;
  }
  bool transition(const AbsorbedState&, const Transition& tr) {
    if (tr.after.alive() && !region.contains(tr.after)) {
      left = true;
      return true;
    }
    return false;
  }
};

// Survival times of n paths from x, counting exit from `region` as death.
inline std::vector<double> confined_survival_times(const ModelSpec& model, const AbsorbedState& x, const Region& region,
                                                   double horizon, std::size_t n, const McContext& ctx) {
  std::vector<double> tau(n, kInfinity);
  std::visit(
      [&](const auto& m) {
        using Model = std::decay_t<decltype(m)>;
        parallel_for(n, ctx.threads, [&](std::size_t i) {
          Rng rng(ctx.stream(i));
          if (!region.contains(x)) {
            tau[i] = 0.0;
            return;
          }
          Confined<Model> v{m, region};
          const RunResult r = run_path(m, x, 0.0, horizon, rng, ctx.controls, v);
          tau[i] = v.left ? r.stop_time : r.tau_abs;
        });
      },
      model);
  return tau;
}

}  // namespace detail

// Low-discrepancy points (Halton, bases 2, 3, 5, ...) in a ball or box.
// Ball points are drawn from the bounding box and rejected outside.
inline std::vector<AbsorbedState> halton_points(const Region& region, std::size_t count) {
  static constexpr unsigned primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  Point lo, hi;
  if (const auto* b = std::get_if<BallRegion>(&region.shape())) {
    for (double c : b->center) {
      lo.push_back(c - b->radius);
      hi.push_back(c + b->radius);
    }
  } else if (const auto* bx = std::get_if<BoxRegion>(&region.shape())) {
    lo = bx->lo;
    hi = bx->hi;
  } else {
    throw UsageError("halton_points: needs a ball or box region");
  }
  const std::size_t d = lo.size();
  if (d > std::size(primes)) throw UsageError("halton_points: dimension too large");
  std::vector<AbsorbedState> out;
  for (std::uint64_t k = 1; out.size() < count; ++k) {
    if (k > 1000 * (count + 1)) throw DegenerateError("halton_points: region has no volume");
    Point x(d);
    for (std::size_t i = 0; i < d; ++i) {
      double f = 1.0, v = 0.0;
      for (std::uint64_t m = k; m > 0; m /= primes[i]) {
        f /= primes[i];
        v += f * static_cast<double>(m % primes[i]);
      }
      x[i] = lo[i] + v * (hi[i] - lo[i]);
    }
    AbsorbedState s(std::move(x));
    if (region.contains(s)) out.push_back(std::move(s));
  }
  return out;
}

// (A5): P_x(t < tau ^ T_{D_m}) >= c exp(-rho_sv t) for x in D_s. rho_sv is
// the fitted decay rate of the worst x; c is the largest constant with
// c exp(-rho_sv t_k) <= S_x(t_k) + 2 SE at every grid point and every x.
inline AuditReport check_a5_survival(const ModelSpec& model, const std::vector<AbsorbedState>& xs, const Region& d_m,
                                     const std::vector<double>& times, std::size_t n, const McContext& ctx) {
  if (xs.empty() || times.size() < 4) throw ValidationError("check_a5: need x samples and at least 4 times");
  if (!std::is_sorted(times.begin(), times.end())) throw ValidationError("check_a5: times must be increasing");
  auto r = detail::start_report("A5-survival", model_hash(model), ctx, {"x_index", "t", "survival", "se"});
  std::vector<SurvivalCurve> curves;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto tau = detail::confined_survival_times(model, xs[k], d_m, times.back(), n, ctx.offset(k * n));
    curves.push_back(survival_from_taus(tau, times));
    for (std::size_t i = 0; i < times.size(); ++i)
      r.evidence.add({static_cast<double>(k), times[i], curves.back().survival[i], curves.back().se[i]});
  }
  for (std::size_t k = 0; k < xs.size(); ++k)
    if (curves[k].alive.front() == 0) {
      r.note = "no confined survivors at the smallest time for x_index " + std::to_string(k);
      detail::finish(r, false, "a survival lower bound");
      return r;
    }
  // Worst x: smallest survival at the last time with survivors everywhere.
  std::size_t worst = 0;
  for (std::size_t k = 1; k < xs.size(); ++k)
    if (curves[k].survival.back() < curves[worst].survival.back()) worst = k;
  FitWindow window;
  window.t_min = times.front();
  window.t_max = times.back();
  EstimateWithCI rho;
  try {
    // Use every point with enough survivors.
    std::size_t last = times.size();
    while (last > 0 && curves[worst].alive[last - 1] < 50) --last;
    if (last < 4) throw DegenerateError("too few points");
    window.t_max = times[last - 1];
    rho = estimate_lambda0(curves[worst], window);
  } catch (const DegenerateError&) {
    r.note = "confined survival too small to fit a decay rate";
    detail::finish(r, false, "a survival lower bound");
    return r;
  }
  double c = kInfinity;
  for (const auto& cv : curves)
    for (std::size_t i = 0; i < times.size(); ++i)
      c = std::min(c, (cv.survival[i] + 2.0 * cv.se[i]) * std::exp(rho.value * times[i]));
  r.constants["rho_sv"] = rho.value;
  r.constants["rho_sv_se"] = rho.se;
  r.constants["c"] = c;
  r.constants["worst_x_index"] = static_cast<double>(worst);
  detail::finish(r, c > 0.0 && std::isfinite(rho.value), "a survival lower bound");
  return r;
}

// Escape time for (A4): tau ^ tau_{D_c}, capped at `cap`.
inline std::vector<double> escape_times(const ModelSpec& model, const AbsorbedState& x, const Region& d_c, double cap,
                                        std::size_t n, const McContext& ctx) {
  std::vector<double> out(n, 0.0);
  if (d_c.contains(x)) return out;
  std::visit(
      [&](const auto& m) {
        parallel_for(n, ctx.threads, [&](std::size_t i) {
          Rng rng(ctx.stream(i));
          struct Hit {
            const Region& target;
            bool segment(const AbsorbedState&, double, double) { return false; }
            bool transition(const AbsorbedState&, const Transition& tr) { return tr.after.alive() && target.contains(tr.after); }
          } v{d_c};
          const RunResult r = run_path(m, x, 0.0, cap, rng, ctx.controls, v);
          out[i] = r.stopped_by_visitor ? r.stop_time : std::min(r.tau_abs, cap);
        });
      },
      model);
  return out;
}

struct MomentEstimate {
  double mean = 0.0;
  double se = 0.0;
  double top_share = 0.0;  // share of the sum carried by the top 1% of samples
  std::size_t capped = 0;
};

inline MomentEstimate exponential_moment(const std::vector<double>& times, double rho, double cap = kInfinity) {
  MomentEstimate m;
  std::vector<double> v;
  v.reserve(times.size());
  for (double t : times) {
    v.push_back(std::exp(rho * t));
    if (t >= cap) ++m.capped;
  }
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double e : v) s += e;
  m.mean = s / n;
  double var = 0.0;
  for (double e : v) var += (e - m.mean) * (e - m.mean);
  m.se = v.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
  std::sort(v.begin(), v.end(), std::greater<>());
  const auto top = std::max<std::size_t>(1, v.size() / 100);
  double st = 0.0;
  for (std::size_t i = 0; i < top; ++i) st += v[i];
  m.top_share = s > 0.0 ? st / s : 0.0;
  return m;
}

// (A4): sup_x E_x exp(rho (tau ^ tau_{D_c})) finite. With `bound` set, the
// sup must also stay below bound + 3 SE.
inline AuditReport check_a4_moment(const ModelSpec& model, double rho, const Region& d_c, const std::vector<AbsorbedState>& xs,
                                   std::size_t n, double cap, const McContext& ctx, std::optional<double> bound = {}) {
  if (xs.empty() || n < 2) throw ValidationError("check_a4: need x samples and n >= 2");
  auto r = detail::start_report("A4-moment", model_hash(model), ctx, {"x_index", "moment", "se", "top1pct_share", "capped"});
  double sup = 0.0, sup_se = 0.0, worst_share = 0.0;
  std::size_t capped = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto tau = escape_times(model, xs[k], d_c, cap, n, ctx.offset(k * n));
    const auto m = exponential_moment(tau, rho, cap);
    r.evidence.add({static_cast<double>(k), m.mean, m.se, m.top_share, static_cast<double>(m.capped)});
    if (m.mean > sup) {
      sup = m.mean;
      sup_se = m.se;
    }
    worst_share = std::max(worst_share, m.top_share);
    capped += m.capped;
  }
  r.constants["rho"] = rho;
  r.constants["sup_moment"] = sup;
  r.constants["sup_moment_se"] = sup_se;
  r.constants["max_top1pct_share"] = worst_share;
  r.constants["capped_paths"] = static_cast<double>(capped);
  if (bound) r.constants["bound"] = *bound;
  if (worst_share > 0.5) {
    r.inconclusive = true;
    r.note = "moment dominated by the top 1% of samples (heavy tail)";
  }
  if (capped > 0) r.note += (r.note.empty() ? "" : "; ") + std::string("some paths reached the time cap");
  const bool ok = capped == 0 && std::isfinite(sup) && (!bound || sup <= *bound + 3.0 * sup_se);
  detail::finish(r, ok, "a finite exponential moment of the escape time");
  return r;
}

// The coordinate-model moment E_x exp(rho' (T_J^d ^ tau)) against
// (2 rho_sb / (rho_sb - rho_sv))^d, with rho' = (rho_sb + rho_sv) / 2.
inline AuditReport check_coordinate_moment(const CoordJumpParams& p, double rho_sv, const Point& x, std::size_t n,
                                           const McContext& ctx) {
  const double rho_sb = p.rho_sb();
  if (!(rho_sv < rho_sb)) throw ValidationError("check_coordinate_moment: need rho_sv < rho_sb");
  const double rho_prime = 0.5 * (rho_sb + rho_sv);
  const double bound = std::pow(2.0 * rho_sb / (rho_sb - rho_sv), static_cast<double>(p.dim()));
  const ModelSpec spec = CoordJumpModel(p);
  auto r = detail::start_report("coordinate-moment", model_hash(spec), ctx, {"index", "time", "absorbed"});
  std::vector<double> times(n);
  std::vector<char> absorbed(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    Rng rng(ctx.stream(i));
    const auto a = time_all_coordinates_jumped(p, x, rng, ctx.controls.max_events);
    times[i] = a.time;
    absorbed[i] = a.absorbed ? 1 : 0;
  });
  for (std::size_t i = 0; i < std::min<std::size_t>(n, 1000); ++i)
    r.evidence.add({static_cast<double>(i), times[i], static_cast<double>(absorbed[i])});
  const auto m = exponential_moment(times, rho_prime);
  r.constants["dim"] = static_cast<double>(p.dim());
  r.constants["rho_sb"] = rho_sb;
  r.constants["rho_sv"] = rho_sv;
  r.constants["rho_prime"] = rho_prime;
  r.constants["moment"] = m.mean;
  r.constants["moment_se"] = m.se;
  r.constants["bound"] = bound;
  r.constants["top1pct_share"] = m.top_share;
  detail::finish(r, m.mean <= bound + 3.0 * m.se, "the exponential-moment bound on the all-coordinates time");
  return r;
}

// (A2) with alpha_c given by cell masses on a partition of D_1: for each x,
// the confined survivors at t are histogrammed and c is the smallest ratio
// P_x(X_t in cell, t < tau ^ T_{D_m}) / alpha_c(cell).
inline AuditReport check_a2_mixing(const ModelSpec& model, const std::vector<AbsorbedState>& xs, const Region& d_m,
                                   const Region& d_1, const Partition& cells, const std::vector<double>& alpha_c, double t,
                                   std::size_t n, const McContext& ctx) {
  if (alpha_c.size() != cells.cells()) throw ValidationError("check_a2: alpha_c needs one mass per cell");
  auto r = detail::start_report("A2-mixing", model_hash(model), ctx, {"x_index", "cell", "probability", "se", "ratio"});
  double c = kInfinity;
  std::string empty;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    std::vector<std::optional<AbsorbedState>> finals(n);
    std::visit(
        [&](const auto& m) {
          using Model = std::decay_t<decltype(m)>;
          const McContext sub = ctx.offset(k * n);
          parallel_for(n, ctx.threads, [&](std::size_t i) {
            Rng rng(sub.stream(i));
            detail::Confined<Model> v{m, d_m};
            const RunResult res = run_path(m, xs[k], 0.0, t, rng, ctx.controls, v);
            if (!v.left && res.final_state.alive()) finals[i] = res.final_state;
          });
        },
        model);
    std::vector<double> count(cells.cells(), 0.0);
    for (const auto& s : finals)
      if (s && d_1.contains(*s)) count[cells.cell_of(*s)] += 1.0;
    for (std::size_t cell = 0; cell < cells.cells(); ++cell) {
      if (!(alpha_c[cell] > 0.0)) continue;
      const double p = count[cell] / static_cast<double>(n);
      const double ratio = p / alpha_c[cell];
      r.evidence.add({static_cast<double>(k), static_cast<double>(cell), p, std::sqrt(p * (1.0 - p) / static_cast<double>(n)),
                      ratio});
      if (count[cell] == 0.0 && empty.empty())
        empty = "empty cell " + std::to_string(cell) + " for x_index " + std::to_string(k);
      c = std::min(c, ratio);
    }
  }
  r.constants["c"] = c;
  r.constants["t"] = t;
  r.note = empty;
  detail::finish(r, empty.empty() && c > 0.0, "a mixing lower bound towards alpha_c");
  return r;
}

struct NonuniformityOptions {
  double t = 1.0;
  double eps = 0.1;
  std::vector<double> radii = {1, 2, 4, 8, 16, 32};
  std::size_t n = 20'000;
  std::size_t bins = 64;
  double budget_seconds = 60.0;
};

// Searches outward along the first axis for x whose conditioned marginal at
// t is at TV distance >= 1 - eps - 2 SE from the one started at 0.
inline AuditReport check_nonuniformity(const UniformBallParams& u, const NonuniformityOptions& opt, const McContext& ctx) {
  u.validate();
  const ModelSpec model = PureJumpModel(PureJumpParams::from_uniform_ball(u));
  auto r = detail::start_report("nonuniformity", model_hash(model), ctx, {"radius", "tv", "se"});
  const auto start = std::chrono::steady_clock::now();
  Point origin(u.dim, 0.0);
  const EmpiricalMeasure from0 = estimate_mcne(model, InitialLaw::point(origin), opt.t, opt.n, McneMethod::naive, ctx);
  double best = 0.0, best_r = 0.0;
  bool found = false;
  for (std::size_t k = 0; k < opt.radii.size(); ++k) {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > opt.budget_seconds) {
      r.note = "search budget exhausted";
      break;
    }
    Point x(u.dim, 0.0);
    x[0] = opt.radii[k];
    const EmpiricalMeasure fromx =
        estimate_mcne(model, InitialLaw::point(x), opt.t, opt.n, McneMethod::naive, ctx.offset((k + 1) * opt.n));
    const Partition part = Partition::pooled_quantiles(from0, fromx, opt.bins, {0});
    const TvEstimate tv = tv_distance(Histogram::of(from0, part), Histogram::of(fromx, part));
    r.evidence.add({opt.radii[k], tv.value, tv.se});
    if (tv.value > best) {
      best = tv.value;
      best_r = opt.radii[k];
    }
    if (tv.value >= 1.0 - opt.eps - 2.0 * tv.se) {
      found = true;
      best = tv.value;
      best_r = opt.radii[k];
      break;
    }
  }
  r.constants["t"] = opt.t;
  r.constants["eps"] = opt.eps;
  r.constants["x_radius"] = best_r;
  r.constants["tv"] = best;
  r.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!found && r.note.empty()) r.note = "radius schedule exhausted";
  detail::finish(r, found, "non-uniform convergence (a far start stays at TV >= 1 - eps)");
  return r;
}

// Ratio sup_x S_x(t) / S_{alpha_c}(t) along a time grid. Passes when the
// maximum over the last third of the grid is at most the maximum over the
// first third plus 2 pooled SE.
inline AuditReport check_bdsv_ratio(const ModelSpec& model, const InitialLaw& alpha_c, const std::vector<AbsorbedState>& xs,
                                    const std::vector<double>& times, std::size_t n, const McContext& ctx) {
  if (times.size() < 3 || xs.empty()) throw ValidationError("check_bdsv: need x samples and at least 3 times");
  auto r = detail::start_report("BdSv-ratio", model_hash(model), ctx, {"t", "sup_ratio", "se", "argmax_x"});
  const SurvivalCurve den = survival_from_taus(absorption_times(model, alpha_c, times.back(), n, ctx), times);
  for (auto a : den.alive)
    if (a < 50) throw DegenerateError("check_bdsv: fewer than 50 reference survivors; shrink the time grid");
  std::vector<SurvivalCurve> num;
  for (std::size_t k = 0; k < xs.size(); ++k)
    num.push_back(
        survival_from_taus(absorption_times(model, InitialLaw::point(xs[k]), times.back(), n, ctx.offset((k + 1) * n)), times));
  std::vector<double> sup(times.size(), 0.0), se(times.size(), 0.0);
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::size_t arg = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double ratio = num[k].survival[i] / den.survival[i];
      if (ratio > sup[i] || k == 0) {
        sup[i] = ratio;
        arg = k;
        const double rel_n = num[k].survival[i] > 0.0 ? num[k].se[i] / num[k].survival[i] : 0.0;
        const double rel_d = den.se[i] / den.survival[i];
        se[i] = ratio * std::sqrt(rel_n * rel_n + rel_d * rel_d);
      }
    }
    r.evidence.add({times[i], sup[i], se[i], static_cast<double>(arg)});
  }
  const std::size_t third = std::max<std::size_t>(1, times.size() / 3);
  double first = 0.0, last = 0.0, first_se = 0.0, last_se = 0.0;
  for (std::size_t i = 0; i < third; ++i)
    if (sup[i] >= first) {
      first = sup[i];
      first_se = se[i];
    }
  for (std::size_t i = times.size() - third; i < times.size(); ++i)
    if (sup[i] >= last) {
      last = sup[i];
      last_se = se[i];
    }
  const double pooled = std::sqrt(first_se * first_se + last_se * last_se);
  r.constants["first_third_max"] = first;
  r.constants["last_third_max"] = last;
  r.constants["pooled_se"] = pooled;
  detail::finish(r, last <= first + 2.0 * pooled, "a bounded survival ratio against alpha_c");
  return r;
}

}  // namespace qsdlab
