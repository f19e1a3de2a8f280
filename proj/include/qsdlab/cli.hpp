#pragma once

// Command-line front end. run_command returns the process exit code:
// 0 success, 2 validation/usage error, 3 statistical or numerical
// degeneracy, 1 anything else.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "estimation.hpp"
#include "io.hpp"
#include "oracle.hpp"
#include "plot_data.hpp"
#include "qprocess.hpp"
#include "simulate.hpp"
#include "verify.hpp"

namespace qsdlab {

namespace cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Session {
  ExperimentConfig cfg;
  McContext ctx;
  fs::path out_dir;
  std::ostream& out;
  std::string hash;

  bool csv() const { return cfg.output.formats.count("csv") > 0; }
  bool json_out() const { return cfg.output.formats.count("json") > 0; }
  void write(const std::string& name, const CsvTable& t) const {
    if (csv()) write_csv(out_dir / name, t, hash);
  }
  void write(const std::string& name, const json& j) const {
    if (json_out()) write_json(out_dir / name, j, hash);
  }
};

inline json to_json(const EstimateWithCI& e) {
  return json{{"value", e.value}, {"se", e.se}, {"n", e.n}, {"method", e.method}};
}

inline std::vector<std::string> state_columns(const ExperimentConfig& cfg) {
  std::vector<std::string> cols;
  if (cfg.chain) return {"state"};
  std::size_t d = 1;
  if (!cfg.mu0.atoms().empty()) d = cfg.mu0.atoms().front().dimension();
  for (std::size_t i = 0; i < d; ++i) cols.push_back("x" + std::to_string(i));
  if (cfg.variant == "eco_evo") cols.push_back("n");
  return cols;
}

inline std::vector<std::string> state_cells(const ExperimentConfig& cfg, const AbsorbedState& s) {
  std::vector<std::string> r;
  if (cfg.chain) return {std::to_string(s.index())};
  for (double v : s.x()) r.push_back(fmt_double(v));
  if (cfg.variant == "eco_evo") r.push_back(fmt_double(s.n()));
  return r;
}

inline CsvTable measure_table(const ExperimentConfig& cfg, const EmpiricalMeasure& m) {
  CsvTable t;
  t.columns = {"particle", "weight"};
  for (auto& c : state_columns(cfg)) t.columns.push_back(c);
  for (std::size_t i = 0; i < m.particles.size(); ++i) {
    std::vector<std::string> row = {std::to_string(i), fmt_double(m.weights[i])};
    for (auto& c : state_cells(cfg, m.particles[i])) row.push_back(c);
    t.add(std::move(row));
  }
  const std::string x = state_columns(cfg).front();
  t.plot = PlotSpec{x, "weight", "", "", cfg.chain ? "state" : "position", "weight"};
  return t;
}

// Weighted law on chain states.
inline std::vector<double> chain_law(const EmpiricalMeasure& m, std::size_t n) {
  std::vector<double> p(n, 0.0);
  for (std::size_t i = 0; i < m.particles.size(); ++i) p.at(m.particles[i].index()) += m.weights[i];
  return p;
}

inline CsvTable curve_table(const SurvivalCurve& c) {
  CsvTable t;
  t.columns = {"t", "survival", "se", "alive"};
  for (std::size_t i = 0; i < c.times.size(); ++i)
    t.add({fmt_double(c.times[i]), fmt_double(c.survival[i]), fmt_double(c.se[i]), std::to_string(c.alive[i])});
  t.plot = PlotSpec{"t", "survival", "se", "", "time", "probability"};
  return t;
}

inline std::vector<double> default_times(const RunConfig& r) {
  if (!r.times.empty()) return r.times;
  std::vector<double> t(41);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.horizon * static_cast<double>(i) / 40.0;
  return t;
}

inline std::string summary_line(const std::string& cmd, const std::string& body) { return cmd + ": " + body + "\n"; }

// ---- commands --------------------------------------------------------------

inline void cmd_simulate(Session& s) {
  const auto& model = s.cfg.require_model();
  const auto grid = s.cfg.run.times;
  const std::size_t n = s.cfg.run.particles;
  std::vector<PathOutcome> paths(n);
  std::visit(
      [&](const auto& m) {
        parallel_for(n, s.ctx.threads, [&](std::size_t i) {
          Rng pick(RngStream{s.ctx.seed, kPilotStreamOffset + i});
          const AbsorbedState x0 = s.cfg.mu0.sample(pick);
          paths[i] = simulate_path(m, x0, s.cfg.run.horizon, s.ctx.controls, s.ctx.stream(i), grid);
        });
      },
      model);
  CsvTable t;
  t.columns = {"path", "time", "alive"};
  for (auto& c : state_columns(s.cfg)) t.columns.push_back(c);
  std::size_t absorbed = 0;
  double tau_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& p : paths[i].skeleton) {
      std::vector<std::string> row = {std::to_string(i), fmt_double(p.time), p.state.alive() ? "1" : "0"};
      if (p.state.alive()) {
        for (auto& c : state_cells(s.cfg, p.state)) row.push_back(c);
      } else {
        row.resize(t.columns.size(), "");
      }
      t.add(std::move(row));
    }
    if (paths[i].absorbed_before_horizon()) {
      ++absorbed;
      tau_sum += paths[i].tau_abs;
    }
  }
  s.write("paths.csv", t);
  s.write("summary.json", json{{"command", "simulate"},
                               {"model_hash", model_hash(model)},
                               {"seed", s.ctx.seed},
                               {"paths", n},
                               {"horizon", s.cfg.run.horizon},
                               {"absorbed", absorbed},
                               {"mean_tau_absorbed", absorbed ? tau_sum / static_cast<double>(absorbed) : 0.0}});
  s.out << summary_line("simulate", std::to_string(n) + " paths, " + std::to_string(absorbed) + " absorbed before " +
                                        fmt_short(s.cfg.run.horizon));
}

inline void cmd_survival(Session& s) {
  const auto& model = s.cfg.require_model();
  const SurvivalCurve c = estimate_survival_curve(model, s.cfg.mu0, default_times(s.cfg.run), s.cfg.run.particles, s.ctx);
  s.write("survival.csv", curve_table(c));
  s.write("summary.json", json{{"command", "survival"},
                               {"model_hash", model_hash(model)},
                               {"seed", s.ctx.seed},
                               {"n", c.n},
                               {"final_survival", c.survival.back()},
                               {"final_se", c.se.back()}});
  s.out << summary_line("survival", "S(" + fmt_short(c.times.back()) + ") = " + fmt_short(c.survival.back()) + " +- " +
                                        fmt_short(c.se.back()) + " (n=" + std::to_string(c.n) + ")");
}

inline EstimateWithCI fit_lambda(const Session& s, SurvivalCurve* keep = nullptr) {
  const auto& model = s.cfg.require_model();
  const SurvivalCurve c = estimate_survival_curve(model, s.cfg.mu0, default_times(s.cfg.run), s.cfg.run.particles, s.ctx);
  FitWindow w;
  w.t_min = s.cfg.run.fit_t_min;
  w.t_max = s.cfg.run.fit_t_max;
  if (keep) *keep = c;
  return estimate_lambda0(c, w);
}

inline void cmd_lambda(Session& s) {
  SurvivalCurve c;
  const EstimateWithCI l = fit_lambda(s, &c);
  s.write("survival.csv", curve_table(c));
  s.write("summary.json", json{{"command", "lambda"},
                               {"model_hash", model_hash(s.cfg.require_model())},
                               {"seed", s.ctx.seed},
                               {"lambda0", to_json(l)}});
  s.out << summary_line("lambda", "lambda0 = " + fmt_short(l.value) + " +- " + fmt_short(l.se));
}

inline void cmd_qsd(Session& s) {
  const auto& model = s.cfg.require_model();
  const double t = s.cfg.run.t;
  const EmpiricalMeasure m = estimate_mcne(model, s.cfg.mu0, t, s.cfg.run.particles, s.cfg.run.method, s.ctx);
  s.write("mcne_t" + fmt_short(t) + ".csv", measure_table(s.cfg, m));
  json j{{"command", "qsd"},        {"model_hash", model_hash(model)}, {"seed", s.ctx.seed},
         {"t", t},                  {"method", to_string(s.cfg.run.method)},
         {"n_launched", m.n_launched}, {"n_survived", m.n_survived}, {"resampling_count", m.resampling_count}};
  if (!s.cfg.chain) j["mean_x0"] = m.mean_coordinate(0);
  s.write("summary.json", j);
  s.out << summary_line("qsd", std::string(to_string(s.cfg.run.method)) + " at t=" + fmt_short(t) + ", " +
                                   std::to_string(m.n_survived) + " particles, " + std::to_string(m.resampling_count) +
                                   " resamplings");
}

inline void cmd_eta(Session& s) {
  const auto& model = s.cfg.require_model();
  const EstimateWithCI l = fit_lambda(s);
  auto xs = s.cfg.run.eval_points;
  if (xs.empty())
    for (const auto& a : s.cfg.mu0.atoms()) xs.push_back(a.x());
  CsvTable t;
  t.columns = {"x_index", "t", "eta", "se"};
  t.plot = PlotSpec{"t", "eta", "se", "x_index", "time", "eta"};
  json rows = json::array();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    AbsorbedState x = s.cfg.chain ? AbsorbedState::chain_state(static_cast<std::size_t>(xs[k].at(0))) : AbsorbedState(xs[k]);
    if (s.cfg.variant == "eco_evo") x = AbsorbedState(xs[k], s.cfg.mu0.atoms().front().n());
    for (double tt : {s.cfg.run.t, 2.0 * s.cfg.run.t}) {
      const auto e = estimate_eta(model, x, tt, l, s.cfg.run.particles, s.ctx.offset((k + 1) * (1ull << 32)));
      t.add({std::to_string(k), fmt_double(tt), fmt_double(e.value), fmt_double(e.se)});
      rows.push_back(json{{"x_index", k}, {"t", tt}, {"eta", to_json(e)}});
    }
  }
  s.write("eta.csv", t);
  s.write("summary.json",
          json{{"command", "eta"}, {"model_hash", model_hash(model)}, {"seed", s.ctx.seed}, {"lambda0", to_json(l)}, {"eta", rows}});
  s.out << summary_line("eta", std::to_string(xs.size()) + " points, lambda0 = " + fmt_short(l.value));
}

inline void cmd_qprocess(Session& s) {
  const auto& model = s.cfg.require_model();
  const auto run = simulate_qprocess_rejection(model, s.cfg.mu0, s.cfg.run.t, s.cfg.run.T, s.cfg.run.particles, s.ctx);
  s.write("qprocess_t" + fmt_short(run.t) + ".csv", measure_table(s.cfg, run.marginal));
  json j{{"command", "qprocess"}, {"model_hash", model_hash(model)}, {"seed", s.ctx.seed}, {"t", run.t},
         {"T", run.horizon},      {"launched", run.launched},        {"accepted", run.accepted},
         {"acceptance", run.acceptance}};
  if (s.cfg.chain) {
    const auto triple = qsd_eig(*s.cfg.chain);
    std::vector<double> mu(s.cfg.chain->size(), 0.0);
    for (const auto& a : s.cfg.mu0.atoms()) mu[a.index()] = 1.0;
    const auto exact = qprocess_marginal_exact(*s.cfg.chain, triple, mu, run.t);
    j["tv_to_htransform"] = tv_exact(chain_law(run.marginal, s.cfg.chain->size()), exact);
  }
  s.write("summary.json", j);
  s.out << summary_line("qprocess", "acceptance " + fmt_short(run.acceptance) + ", " + std::to_string(run.accepted) + " paths");
}

inline void cmd_beta(Session& s) {
  const auto& model = s.cfg.require_model();
  BetaOptions o;
  o.run_length = s.cfg.run.run_length;
  o.burn_in = s.cfg.run.burn_in;
  o.paths = s.cfg.run.paths;
  o.lookahead = s.cfg.run.lookahead;
  o.sample_dt = s.cfg.run.sample_dt;
  json j{{"command", "beta"}, {"model_hash", model_hash(model)}, {"seed", s.ctx.seed}};
  EmpiricalMeasure m;
  if (s.cfg.chain) {
    const auto triple = qsd_eig(*s.cfg.chain);
    m = estimate_beta_chain(*s.cfg.chain, triple, s.cfg.mu0.atoms().front().index(), o, s.ctx);
    j["mode"] = "htransform-occupation";
    j["tv_to_alpha_eta"] = tv_exact(chain_law(m, s.cfg.chain->size()), quasi_ergodic_law(triple));
  } else {
    m = estimate_beta_rejection(model, s.cfg.mu0, o, s.ctx);
    j["mode"] = "sliding-horizon-rejection";
    j["lookahead"] = o.lookahead;
    j["surviving_paths"] = m.n_survived;
  }
  s.write("beta.csv", measure_table(s.cfg, m));
  s.write("summary.json", j);
  s.out << summary_line("beta", std::string(j["mode"]) + ", " + std::to_string(m.particles.size()) + " atoms");
}

inline json vector_json(const std::vector<double>& v) { return json(v); }

inline void cmd_oracle(Session& s, const std::optional<std::string>& chain_path) {
  SubMarkovChain chain;
  if (chain_path) {
    chain = load_chain(*chain_path);
  } else if (s.cfg.chain) {
    chain = *s.cfg.chain;
  } else if (s.cfg.pure_jump) {
    const std::size_t d = s.cfg.pure_jump->dim;
    chain = discretize_pure_jump(*s.cfg.pure_jump,
                                 LatticeGrid{Point(d, s.cfg.run.grid_lo), Point(d, s.cfg.run.grid_hi), s.cfg.run.grid_spacing});
  } else {
    throw UsageError("oracle: needs --chain or a chain / pure-jump model in the config");
  }
  const SpectralTriple tr = qsd_eig(chain);
  const auto beta = quasi_ergodic_law(tr);
  std::ostringstream os;
  os.precision(12);
  os << "lambda0 = " << tr.lambda0 << "\n";
  if (chain.size() <= 16) {
    os << "alpha =";
    for (double v : tr.alpha) os << " " << v;
    os << "\neta =";
    for (double v : tr.eta) os << " " << v;
    os << "\n";
  }
  s.out << os.str();
  if (!s.out_dir.empty()) {
    CsvTable t;
    t.columns = {"state", "alpha", "eta", "beta"};
    if (chain.has_embedding())
      for (std::size_t i = 0; i < chain.embedding().front().size(); ++i) t.columns.push_back("x" + std::to_string(i));
    for (std::size_t i = 0; i < chain.size(); ++i) {
      std::vector<std::string> row = {std::to_string(i), fmt_double(tr.alpha[i]), fmt_double(tr.eta[i]), fmt_double(beta[i])};
      if (chain.has_embedding())
        for (double v : chain.embedding()[i]) row.push_back(fmt_double(v));
      t.add(std::move(row));
    }
    s.write("oracle.csv", t);
    s.write("summary.json", json{{"command", "oracle"}, {"states", chain.size()}, {"lambda0", tr.lambda0}, {"iterations", tr.iterations}});
  }
}

inline void write_report(Session& s, const AuditReport& r, const std::string& stem) {
  CsvTable ev;
  ev.columns = r.evidence.columns;
  for (const auto& row : r.evidence.rows) ev.add_numbers(row);
  s.write(stem + "_evidence.csv", ev);
  s.write(stem + ".json", json(r.to_json()));
  if (s.json_out() || s.csv()) atomic_write(s.out_dir / (stem + ".txt"), r.text());
}

inline std::vector<AbsorbedState> audit_points(const Session& s, const Region& fallback, std::size_t count) {
  std::vector<AbsorbedState> xs;
  for (const auto& p : s.cfg.run.eval_points)
    xs.push_back(s.cfg.chain ? AbsorbedState::chain_state(static_cast<std::size_t>(p.at(0))) : AbsorbedState(p));
  if (xs.empty() && s.cfg.chain)
    for (std::size_t i = 0; i < s.cfg.chain->size(); ++i) xs.push_back(AbsorbedState::chain_state(i));
  if (xs.empty()) xs = halton_points(fallback, count);
  return xs;
}

inline AuditReport cmd_verify(Session& s, const std::string& audit) {
  const RunConfig& r = s.cfg.run;
  AuditReport rep;
  if (audit == "nonuniformity") {
    if (!s.cfg.uniform_ball) throw UsageError("verify nonuniformity: needs a uniform_ball model");
    NonuniformityOptions o;
    o.t = r.t;
    o.eps = r.eps;
    o.n = r.particles;
    rep = check_nonuniformity(*s.cfg.uniform_ball, o, s.ctx);
  } else if (audit == "coordinate") {
    if (!s.cfg.coord_jump) throw UsageError("verify coordinate: needs a coord_jump model");
    const double rho_sv = r.rho > 0.0 ? r.rho : 0.5 * s.cfg.coord_jump->rho_sb();
    rep = check_coordinate_moment(*s.cfg.coord_jump, rho_sv, s.cfg.mu0.atoms().front().x(), r.particles, s.ctx);
  } else {
    const auto& model = s.cfg.require_model();
    const std::size_t d = s.cfg.mu0.atoms().front().dimension();
    const Region d_m = s.cfg.chain ? Region::states([&] {
      std::set<std::size_t> all;
      for (std::size_t i = 0; i < s.cfg.chain->size(); ++i) all.insert(i);
      return all;
    }())
                                   : Region::ball(Point(d, 0.0), r.region_radius);
    if (audit == "a5") {
      rep = check_a5_survival(model, audit_points(s, d_m, 8), d_m, default_times(r), r.particles, s.ctx);
    } else if (audit == "a4") {
      if (!(r.rho > 0.0)) throw ValidationError("verify a4: set [run] rho > 0");
      const Region d_c = s.cfg.chain ? d_m : Region::ball(Point(d, 0.0), r.region_radius);
      const Region wide = Region::ball(Point(d, 0.0), 4.0 * r.region_radius);
      rep = check_a4_moment(model, r.rho, d_c, audit_points(s, wide, 8), r.particles, r.horizon, s.ctx);
    } else if (audit == "a2") {
      if (s.cfg.chain) {
        const std::size_t n = s.cfg.chain->size();
        const Partition cells = Partition::discrete(n);
        const std::vector<double> alpha_c(n, 1.0 / static_cast<double>(n));
        rep = check_a2_mixing(model, audit_points(s, d_m, 1), d_m, d_m, cells, alpha_c, r.t, r.particles, s.ctx);
      } else {
        if (d != 1) throw UsageError("verify a2: continuous models are audited in one dimension");
        const double rad = r.region_radius;
        Partition::Axis ax{0, {}};
        const std::size_t k = 8;
        for (std::size_t i = 1; i < k; ++i) ax.edges.push_back(-rad + 2.0 * rad * static_cast<double>(i) / k);
        // Outer cells absorb everything outside D_1 and carry no alpha_c mass.
        Partition::Axis full{0, {-rad}};
        for (double e : ax.edges) full.edges.push_back(e);
        full.edges.push_back(rad);
        const Partition cells = Partition::grid({full});
        std::vector<double> alpha_c(cells.cells(), 1.0 / static_cast<double>(k));
        alpha_c.front() = alpha_c.back() = 0.0;
        const Region d_1 = Region::ball(Point(1, 0.0), rad);
        const Region wide = Region::ball(Point(1, 0.0), 2.0 * rad);
        rep = check_a2_mixing(model, audit_points(s, d_1, 4), wide, d_1, cells, alpha_c, r.t, r.particles, s.ctx);
      }
    } else if (audit == "bdsv") {
      InitialLaw alpha_c;
      if (s.cfg.chain) {
        alpha_c = InitialLaw::on_states(std::vector<double>(s.cfg.chain->size(), 1.0));
      } else {
        const auto pts = halton_points(Region::ball(Point(d, 0.0), 1.0), 64);
        alpha_c = InitialLaw(pts, std::vector<double>(pts.size(), 1.0));
      }
      const Region d_c = s.cfg.chain ? d_m : Region::ball(Point(d, 0.0), 2.0);
      rep = check_bdsv_ratio(model, alpha_c, audit_points(s, d_c, 8), default_times(r), r.particles, s.ctx);
    } else {
      throw UsageError("verify: unknown audit '" + audit + "' (known: a2, a4, a5, bdsv, nonuniformity, coordinate)");
    }
  }
  write_report(s, rep, "audit_" + audit);
  s.out << summary_line("verify " + audit, rep.verdict);
  return rep;
}

// ---- reproduce suites ------------------------------------------------------

inline SubMarkovChain builtin_chain(const std::string& name) {
  if (name == "two_state") {
    Matrix l(2, 2);
    l(0, 0) = -2.0, l(0, 1) = 1.0, l(1, 0) = 1.0, l(1, 1) = -3.0;
    return SubMarkovChain(l);
  }
  if (name == "three_state") {
    Matrix l(3, 3);
    const double v[3][3] = {{-1.5, 1.0, 0.3}, {0.5, -1.2, 0.5}, {0.2, 0.8, -1.5}};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) l(i, j) = v[i][j];
    return SubMarkovChain(l);
  }
  throw UsageError("unknown built-in chain " + name);
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"oracle", "no_jump", "lambda", "qprocess", "quasi_ergodic", "coordinate",
                                                 "nonuniformity"};
  return names;
}

inline void suite_oracle(Session& s) {
  json chains = json::object();
  for (const std::string name : {"two_state", "three_state"}) {
    const auto c = builtin_chain(name);
    const auto tr = qsd_eig(c);
    chains[name] = json{{"lambda0", tr.lambda0}, {"alpha", tr.alpha}, {"eta", tr.eta}, {"beta", quasi_ergodic_law(tr)}};
  }
  s.write("oracle.json", json{{"suite", "oracle"}, {"chains", chains}});
  s.out << summary_line("reproduce oracle", "two_state lambda0 = " + fmt_short(chains["two_state"]["lambda0"].get<double>()));
}

inline void suite_no_jump(Session& s, std::size_t n) {
  const UniformBallParams u;
  const ModelSpec model = PureJumpModel(PureJumpParams::from_uniform_ball(u));
  const double rate = u.rho_e1 + u.rho_J();
  std::vector<double> first(n);
  std::visit(
      [&](const auto& m) {
        parallel_for(n, s.ctx.threads, [&](std::size_t i) {
          Rng rng(s.ctx.stream(i));
          first[i] = m.next(AbsorbedState(Point(u.dim, 0.0)), 0.0, kInfinity, rng, s.ctx.controls).time;
        });
      },
      model);
  CsvTable t;
  t.columns = {"t", "p_no_event", "se", "exact"};
  t.plot = PlotSpec{"t", "p_no_event", "se", "", "time", "probability"};
  for (double tt : {0.5, 1.0, 2.0}) {
    std::size_t k = 0;
    for (double f : first) k += f > tt ? 1 : 0;
    const double p = static_cast<double>(k) / static_cast<double>(n);
    t.add_numbers({tt, p, std::sqrt(p * (1 - p) / static_cast<double>(n)), std::exp(-rate * tt)});
  }
  s.write("no_jump.csv", t);
  s.out << summary_line("reproduce no_jump", "P(no event by 1) = " + t.rows[1][1] + " vs " + t.rows[1][3]);
}

inline void suite_lambda(Session& s, std::size_t n) {
  const UniformBallParams u;
  const auto params = PureJumpParams::from_uniform_ball(u);
  const ModelSpec model = PureJumpModel(params);
  std::vector<double> times;
  for (int i = 0; i <= 40; ++i) times.push_back(0.2 * i);
  const SurvivalCurve c = estimate_survival_curve(model, InitialLaw::point(Point(1, 0.0)), times, n, s.ctx);
  const EstimateWithCI l = estimate_lambda0(c);
  const auto chain = discretize_pure_jump(params, LatticeGrid{{-4.0}, {4.0}, 0.05});
  const double oracle = qsd_eig(chain).lambda0;
  s.write("survival.csv", curve_table(c));
  s.write("lambda.json", json{{"suite", "lambda"}, {"lambda0", to_json(l)}, {"oracle_lambda0", oracle}});
  s.out << summary_line("reproduce lambda", "lambda0 = " + fmt_short(l.value) + " +- " + fmt_short(l.se) + ", oracle " +
                                                fmt_short(oracle));
}

inline void suite_qprocess(Session& s, std::size_t n) {
  const auto chain = builtin_chain("three_state");
  const auto tr = qsd_eig(chain);
  const ModelSpec model = ChainModel(chain);
  const auto run = simulate_qprocess_rejection(model, InitialLaw::point(AbsorbedState::chain_state(0)), 2.0, 12.0, n, s.ctx);
  const auto law = chain_law(run.marginal, 3);
  const auto exact = qprocess_marginal_exact(chain, tr, {1.0, 0.0, 0.0}, 2.0);
  BetaOptions o;
  o.run_length = 200.0;
  o.burn_in = 20.0;
  o.paths = 32;
  const auto beta = chain_law(estimate_beta_chain(chain, tr, 0, o, s.ctx.offset(std::uint64_t{1} << 32)), 3);
  CsvTable t;
  t.columns = {"state", "rejection", "htransform", "beta_occupation", "beta_exact"};
  const auto b = quasi_ergodic_law(tr);
  for (std::size_t i = 0; i < 3; ++i) t.add_numbers({static_cast<double>(i), law[i], exact[i], beta[i], b[i]});
  s.write("qprocess.csv", t);
  s.write("qprocess.json", json{{"suite", "qprocess"},
                                {"acceptance", run.acceptance},
                                {"tv_rejection_htransform", tv_exact(law, exact)},
                                {"tv_beta", tv_exact(beta, b)}});
  s.out << summary_line("reproduce qprocess", "TV(rejection, h-transform) = " + fmt_short(tv_exact(law, exact)));
}

inline void suite_quasi_ergodic(Session& s, std::size_t n) {
  const auto chain = builtin_chain("three_state");
  const auto tr = qsd_eig(chain);
  const auto b = quasi_ergodic_law(tr);
  const ModelSpec model = ChainModel(chain);
  const StateFunction f = [](const AbsorbedState& x) { return x.index() == 1 ? 1.0 : 0.0; };
  CsvTable t;
  t.columns = {"t", "average", "se", "deviation_probability", "deviation_se", "target"};
  t.plot = PlotSpec{"t", "deviation_probability", "deviation_se", "", "time", "probability"};
  std::uint64_t k = 0;
  for (double tt : {5.0, 10.0, 20.0}) {
    const auto q = quasi_ergodic_average(model, InitialLaw::point(AbsorbedState::chain_state(0)), f, tt, n,
                                         s.ctx.offset(++k << 32));
    const auto dev = q.deviation_probability(b[1], 0.05);
    t.add_numbers({tt, q.average.value, q.average.se, dev.value, dev.se, b[1]});
  }
  s.write("quasi_ergodic.csv", t);
  s.out << summary_line("reproduce quasi_ergodic",
                        "deviation probability " + t.rows[0][3] + " -> " + t.rows[2][3]);
}

inline void suite_coordinate(Session& s, std::size_t n) {
  CsvTable t;
  t.columns = {"dim", "moment", "se", "bound"};
  std::uint64_t k = 0;
  for (std::size_t d : {1, 2, 3}) {
    const auto p = CoordJumpParams::symmetric(d, 0.5, 1.0, RadialFunction::constant(0.5));
    const auto r = check_coordinate_moment(p, 0.5 * p.rho_sb(), Point(d, 0.0), n, s.ctx.offset(++k << 32));
    t.add_numbers({static_cast<double>(d), r.constants.at("moment"), r.constants.at("moment_se"), r.constants.at("bound")});
  }
  s.write("coordinate.csv", t);
  s.out << summary_line("reproduce coordinate", "moments " + t.rows[0][1] + ", " + t.rows[1][1] + ", " + t.rows[2][1]);
}

inline void suite_nonuniformity(Session& s) {
  const auto r = check_nonuniformity(UniformBallParams{}, NonuniformityOptions{}, s.ctx);
  write_report(s, r, "nonuniformity");
  s.out << summary_line("reproduce nonuniformity", "x = " + fmt_short(r.constants.at("x_radius")) + " e1, TV = " +
                                                       fmt_short(r.constants.at("tv")) + " (" + r.verdict + ")");
}

inline void cmd_reproduce(Session& s, const std::string& suite, std::size_t n) {
  const auto run = [&](const std::string& name) {
    Session sub{s.cfg, s.ctx, s.out_dir / name, s.out, s.hash};
    if (name == "oracle") suite_oracle(sub);
    else if (name == "no_jump") suite_no_jump(sub, n);
    else if (name == "lambda") suite_lambda(sub, n);
    else if (name == "qprocess") suite_qprocess(sub, n);
    else if (name == "quasi_ergodic") suite_quasi_ergodic(sub, n);
    else if (name == "coordinate") suite_coordinate(sub, n);
    else if (name == "nonuniformity") suite_nonuniformity(sub);
    else throw UsageError("reproduce: unknown suite '" + name + "'");
  };
  if (suite == "all")
    for (const auto& name : suite_names()) run(name);
  else
    run(suite);
}

}  // namespace cli

// Parses argv and runs one subcommand. Output goes to `out`, diagnostics to `err`.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"qsdlab: quasi-stationary distributions of absorbed jump processes", "qsdlab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_path, out_dir, chain_path, audit, suite, plot_out;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::optional<double> t, T, horizon;
  std::optional<std::size_t> particles;
  std::string method, times;
  std::vector<std::string> plot_files;

  auto common = [&](CLI::App* sub, bool need_config) {
    auto* c = sub->add_option("--config", config_path, "experiment config (.cfg)");
    if (need_config) c->required();
    sub->add_option("--seed", seed, "root seed (overrides [run] seed)");
    sub->add_option("--threads", threads, "worker threads (fallback: QSDLAB_THREADS)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--t", t, "time");
    sub->add_option("--T", T, "conditioning horizon");
    sub->add_option("--horizon", horizon, "simulation horizon");
    sub->add_option("--particles", particles, "particle count");
    sub->add_option("--method", method, "naive | fv");
    sub->add_option("--times", times, "time grid: comma list or linspace(a,b,k)");
  };
  std::map<std::string, CLI::App*> subs;
  const std::vector<std::pair<std::string, std::string>> simulated = {
      {"simulate", "sample paths up to absorption or the horizon"},
      {"survival", "survival curve P(t < tau) on a time grid"},
      {"qsd", "Monte Carlo conditioned law at time t (naive or Fleming-Viot)"},
      {"lambda", "extinction rate from the survival curve"},
      {"eta", "survival capacity at the start points"},
      {"qprocess", "Q-process marginal by rejection on a long horizon"},
      {"beta", "quasi-ergodic law"}};
  for (const auto& [name, help] : simulated) {
    subs[name] = app.add_subcommand(name, help);
    common(subs[name], true);
  }
  subs["oracle"] = app.add_subcommand("oracle", "exact QSD, extinction rate and survival capacity of a finite chain");
  common(subs["oracle"], false);
  subs["oracle"]->add_option("--chain", chain_path, "chain fixture (.mat)");
  subs["verify"] = app.add_subcommand("verify", "assumption audits");
  common(subs["verify"], true);
  subs["verify"]->add_option("audit", audit, "a2 | a4 | a5 | bdsv | nonuniformity | coordinate")->required();
  subs["reproduce"] = app.add_subcommand("reproduce", "built-in experiment suites");
  common(subs["reproduce"], false);
  subs["reproduce"]->add_option("suite", suite, "all | oracle | no_jump | lambda | qprocess | quasi_ergodic | coordinate | nonuniformity")
      ->required();
  subs["plot"] = app.add_subcommand("plot", "tidy (x, y, se, series) CSV from result files");
  subs["plot"]->add_option("files", plot_files, "result CSV files")->required();
  subs["plot"]->add_option("--out", plot_out, "output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    CLI::App* chosen = app.get_subcommands().front();
    const std::string cmd = chosen->get_name();

    if (cmd == "plot") {
      std::vector<fs::path> files(plot_files.begin(), plot_files.end());
      const CsvTable tidy = emit_plot_data(files);
      std::string hash;
      {
        std::string all;
        for (const auto& f : plot_files) all += f + "\n";
        hash = hex64(fnv1a(all));
      }
      if (plot_out.empty())
        out << render_csv(tidy, hash);
      else
        write_csv(plot_out, tidy, hash);
      return 0;
    }

    std::map<std::string, std::string> overrides;
    if (seed) overrides["run.seed"] = std::to_string(*seed);
    if (t) overrides["run.t"] = fmt_double(*t);
    if (T) overrides["run.T"] = fmt_double(*T);
    if (horizon) overrides["run.horizon"] = fmt_double(*horizon);
    if (particles) overrides["run.particles"] = std::to_string(*particles);
    if (!method.empty()) overrides["run.method"] = method;
    if (!times.empty()) overrides["run.times"] = times;
    if (!out_dir.empty()) overrides["output.directory"] = out_dir;

    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = load_config(config_path, overrides);
    } else {
      if (cmd == "reproduce" && !overrides.count("run.seed")) overrides["run.seed"] = "1";
      cfg = build_config(overrides, fs::current_path());
    }
    McContext ctx;
    ctx.threads = resolve_threads(threads);
    ctx.controls = cfg.run.controls;
    const bool oracle_only = cmd == "oracle";
    if (!oracle_only) ctx.seed = cfg.seed();
    Session s{cfg, ctx, (oracle_only && out_dir.empty()) ? fs::path{} : fs::path(cfg.output.directory), out, cfg.hash()};

    if (cmd == "simulate") cmd_simulate(s);
    else if (cmd == "survival") cmd_survival(s);
    else if (cmd == "qsd") cmd_qsd(s);
    else if (cmd == "lambda") cmd_lambda(s);
    else if (cmd == "eta") cmd_eta(s);
    else if (cmd == "qprocess") cmd_qprocess(s);
    else if (cmd == "beta") cmd_beta(s);
    else if (cmd == "oracle") cmd_oracle(s, chain_path.empty() ? std::nullopt : std::optional<std::string>(chain_path));
    else if (cmd == "verify") {
      cmd_verify(s, audit);
    } else if (cmd == "reproduce") {
      cmd_reproduce(s, suite, particles.value_or(20'000));
    }
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateError& e) {
    err << "degenerate: " << e.what() << "\n";
    return 3;
  } catch (const ConvergenceError& e) {
    err << "no convergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qsdlab
