#pragma once

// Experiment configuration: an INI-style file with [model], [run] and
// [output] sections. Unknown keys are errors. Rate functions come from a
// fixed catalogue:
//
//   0.5                      constant
//   constant(0.5)
//   polynomial(a0, a1, ...)  a0 + a1 |x| + ...
//   piecewise(r1, r2 : v0, v1, v2)
//                            v0 on |x| < r1, v1 on r1 <= |x| < r2, v2 beyond
//
// and jump kernels from  uniform_ball(h, R)  or  none.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "chain.hpp"
#include "errors.hpp"
#include "estimation.hpp"
#include "models/model_spec.hpp"

namespace qsdlab {

namespace config_detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  if (s == "inf") return kInfinity;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ValidationError("config: " + key + " expects a number, got '" + text + "'");
  }
  if (used != s.size()) throw ValidationError("config: " + key + " expects a number, got '" + text + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& key, char sep = ',') {
  std::vector<double> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, sep))
    if (!trim(item).empty()) out.push_back(parse_number(item, key));
  return out;
}

// "name(args)" -> (name, args); bare text -> (text, "").
inline std::pair<std::string, std::string> call_form(const std::string& text) {
  const std::string s = trim(text);
  const auto open = s.find('(');
  if (open == std::string::npos) return {s, ""};
  if (s.back() != ')') throw ValidationError("config: unbalanced parentheses in '" + text + "'");
  return {trim(s.substr(0, open)), s.substr(open + 1, s.size() - open - 2)};
}

}  // namespace config_detail

inline RadialFunction parse_rate(const std::string& text, const std::string& key) {
  using namespace config_detail;
  const auto [name, args] = call_form(text);
  if (args.empty() && name.find_first_not_of("0123456789.eE+-") == std::string::npos)
    return RadialFunction::constant(parse_number(name, key));
  if (name == "constant") return RadialFunction::constant(parse_number(args, key));
  if (name == "polynomial") return RadialFunction::polynomial(parse_list(args, key));
  if (name == "piecewise") {
    const auto colon = args.find(':');
    if (colon == std::string::npos) throw ValidationError("config: " + key + ": piecewise needs 'radii : values'");
    return RadialFunction::piecewise(parse_list(args.substr(0, colon), key), parse_list(args.substr(colon + 1), key));
  }
  throw ValidationError("config: " + key + ": unknown rate function '" + name +
                        "' (known: constant, polynomial, piecewise)");
}

inline JumpKernel parse_kernel(const std::string& text, std::size_t dim, const std::string& key) {
  using namespace config_detail;
  const auto [name, args] = call_form(text);
  if (name == "none") return JumpKernel{};
  if (name == "uniform_ball") {
    const auto v = parse_list(args, key);
    if (v.size() != 2) throw ValidationError("config: " + key + ": uniform_ball(h, R) takes two numbers");
    return JumpKernel::uniform_ball(dim, v[0], v[1]);
  }
  throw ValidationError("config: " + key + ": unknown jump kernel '" + name + "' (known: uniform_ball, none)");
}

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::size_t particles = 10'000;
  double horizon = 10.0;
  double t = 1.0;
  double T = 5.0;
  std::vector<double> times;
  McneMethod method = McneMethod::naive;
  StepControls controls;
  std::optional<double> fit_t_min, fit_t_max;
  std::vector<Point> eval_points;  // eta / audit x samples
  double run_length = 100.0;
  double burn_in = 10.0;
  double lookahead = 10.0;
  double sample_dt = 0.1;
  std::size_t paths = 64;
  // oracle grid for continuous models
  double grid_lo = -4.0, grid_hi = 4.0, grid_spacing = 0.05;
  // audits
  double region_radius = 1.0;
  double rho = 0.0;
  double eps = 0.1;
};

struct OutputConfig {
  std::string directory = "out";
  std::set<std::string> formats = {"csv", "json"};
};

struct ExperimentConfig {
  std::string variant;
  std::optional<ModelSpec> model;
  std::optional<SubMarkovChain> chain;
  std::optional<UniformBallParams> uniform_ball;
  std::optional<PureJumpParams> pure_jump;
  std::optional<CoordJumpParams> coord_jump;
  InitialLaw mu0;
  RunConfig run;
  OutputConfig output;
  // section.key -> raw value, after command-line overrides.
  std::map<std::string, std::string> entries;

  // Hash of the [model] and [run] entries; where results are written does
  // not change them.
  std::string hash() const {
    std::string canon;
    for (const auto& [k, v] : entries)
      if (k.rfind("output.", 0) != 0) canon += k + "=" + v + "\n";
    return hex64(fnv1a(canon));
  }

  const ModelSpec& require_model() const {
    if (!model) throw ValidationError("config: no model defined");
    return *model;
  }

  std::uint64_t seed() const {
    if (!run.seed) throw ValidationError("config: seed is mandatory ([run] seed or --seed)");
    return *run.seed;
  }
};

namespace config_detail {

inline const std::set<std::string>& allowed_keys(const std::string& section) {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"model",
       {"variant", "chain", "dim", "h_J", "R", "rho_e1", "rho_e2", "jump", "rho_e", "bound_radius", "v", "S", "delta_S",
        "h_floor", "coord_h", "coord_R", "r", "c", "sigma_N", "b", "sigma_X", "cat_density", "cat_p_lo", "cat_p_hi",
        "cat_atom_at_one", "mutation", "rho_c", "x0", "n0", "mu0"}},
      {"run",
       {"seed", "particles", "horizon", "t", "T", "times", "method", "dt", "positivity", "max_events", "fit_t_min",
        "fit_t_max", "x", "run_length", "burn_in", "lookahead", "sample_dt", "paths", "grid_lo", "grid_hi", "grid_spacing",
        "region_radius", "rho", "eps"}},
      {"output", {"directory", "formats"}},
  };
  static const std::set<std::string> none;
  const auto it = keys.find(section);
  return it == keys.end() ? none : it->second;
}

// "linspace(a, b, k)" or a comma list.
inline std::vector<double> parse_times(const std::string& text) {
  const auto [name, args] = call_form(text);
  if (name == "linspace") {
    const auto v = parse_list(args, "run.times");
    if (v.size() != 3 || v[2] < 2) throw ValidationError("config: linspace(a, b, k) needs k >= 2");
    const auto k = static_cast<std::size_t>(v[2]);
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = v[0] + (v[1] - v[0]) * static_cast<double>(i) / static_cast<double>(k - 1);
    return out;
  }
  return parse_list(text, "run.times");
}

inline std::vector<Point> parse_points(const std::string& text, const std::string& key) {
  std::vector<Point> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ';'))
    if (!trim(item).empty()) out.push_back(parse_list(item, key));
  return out;
}

}  // namespace config_detail

// Builds the configuration from section.key entries.
inline ExperimentConfig build_config(const std::map<std::string, std::string>& entries, const std::filesystem::path& base_dir) {
  using namespace config_detail;
  std::vector<std::string> unknown;
  for (const auto& [k, v] : entries) {
    const auto dot = k.find('.');
    const std::string section = dot == std::string::npos ? "" : k.substr(0, dot);
    if (!allowed_keys(section).count(k.substr(dot + 1))) unknown.push_back(k);
  }
  if (!unknown.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ValidationError(msg);
  }
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    const auto it = entries.find(k);
    if (it == entries.end()) return std::nullopt;
    return it->second;
  };
  auto num = [&](const std::string& k, double def) { const auto v = get(k); return v ? parse_number(*v, k) : def; };
  auto need = [&](const std::string& k) {
    const auto v = get(k);
    if (!v) throw ValidationError("config: missing required key " + k);
    return *v;
  };
  auto count = [&](const std::string& k, std::size_t def) {
    const double v = num(k, static_cast<double>(def));
    if (v < 0 || v != std::floor(v)) throw ValidationError("config: " + k + " must be a nonnegative integer");
    return static_cast<std::size_t>(v);
  };

  ExperimentConfig c;
  c.entries = entries;

  // [run]
  RunConfig& r = c.run;
  if (const auto s = get("run.seed")) {
    const double v = parse_number(*s, "run.seed");
    if (v < 0 || v != std::floor(v) || v > 9.007199254740992e15) throw ValidationError("config: seed must be an integer");
    r.seed = static_cast<std::uint64_t>(v);
  }
  r.particles = count("run.particles", r.particles);
  r.horizon = num("run.horizon", r.horizon);
  r.t = num("run.t", r.t);
  r.T = num("run.T", r.T);
  if (const auto s = get("run.times")) r.times = parse_times(*s);
  if (const auto s = get("run.method")) {
    if (*s == "naive")
      r.method = McneMethod::naive;
    else if (*s == "fv" || *s == "fleming_viot")
      r.method = McneMethod::fleming_viot;
    else
      throw ValidationError("config: run.method must be naive or fv");
  }
  r.controls.dt = num("run.dt", r.controls.dt);
  if (const auto s = get("run.positivity")) {
    if (*s != "full_truncation" && *s != "absorb") throw ValidationError("config: run.positivity must be full_truncation or absorb");
    r.controls.full_truncation = *s == "full_truncation";
  }
  r.controls.max_events = count("run.max_events", r.controls.max_events);
  r.controls.validate();
  if (const auto s = get("run.fit_t_min")) r.fit_t_min = parse_number(*s, "run.fit_t_min");
  if (const auto s = get("run.fit_t_max")) r.fit_t_max = parse_number(*s, "run.fit_t_max");
  if (const auto s = get("run.x")) r.eval_points = parse_points(*s, "run.x");
  r.run_length = num("run.run_length", r.run_length);
  r.burn_in = num("run.burn_in", r.burn_in);
  r.lookahead = num("run.lookahead", r.lookahead);
  r.sample_dt = num("run.sample_dt", r.sample_dt);
  r.paths = count("run.paths", r.paths);
  r.grid_lo = num("run.grid_lo", r.grid_lo);
  r.grid_hi = num("run.grid_hi", r.grid_hi);
  r.grid_spacing = num("run.grid_spacing", r.grid_spacing);
  r.region_radius = num("run.region_radius", r.region_radius);
  r.rho = num("run.rho", r.rho);
  r.eps = num("run.eps", r.eps);

  // [output]
  if (const auto s = get("output.directory")) c.output.directory = *s;
  if (const auto s = get("output.formats")) {
    c.output.formats.clear();
    std::istringstream is(*s);
    std::string f;
    while (std::getline(is, f, ','))
      if (!trim(f).empty()) {
        f = trim(f);
        if (f != "csv" && f != "json") throw ValidationError("config: output.formats accepts csv and json");
        c.output.formats.insert(f);
      }
  }

  // [model]
  if (!get("model.variant")) return c;
  c.variant = need("model.variant");
  const auto dim = count("model.dim", 1);
  if (dim == 0) throw ValidationError("config: model.dim must be >= 1");
  Point x0(dim, 0.0);
  if (const auto s = get("model.x0")) x0 = parse_list(*s, "model.x0");

  const double bound_radius = num("model.bound_radius", 64.0);
  if (c.variant == "chain") {
    std::filesystem::path p = need("model.chain");
    if (p.is_relative()) p = base_dir / p;
    c.chain = load_chain(p.string());
    c.chain->require_irreducible();
    c.model = ChainModel(*c.chain);
    if (const auto s = get("model.mu0")) {
      c.mu0 = InitialLaw::on_states(parse_list(*s, "model.mu0"));
    } else {
      const double idx = get("model.x0") ? x0.at(0) : 0.0;
      if (idx < 0 || idx != std::floor(idx) || idx >= static_cast<double>(c.chain->size()))
        throw ValidationError("config: model.x0 must be a state index of the chain");
      c.mu0 = InitialLaw::point(AbsorbedState::chain_state(static_cast<std::size_t>(idx)));
    }
    return c;
  }
  if (x0.size() != dim) throw ValidationError("config: model.x0 must have dim coordinates");

  if (c.variant == "uniform_ball") {
    UniformBallParams u;
    u.dim = dim;
    u.h_J = num("model.h_J", u.h_J);
    u.R = num("model.R", u.R);
    u.rho_e1 = num("model.rho_e1", u.rho_e1);
    u.rho_e2 = num("model.rho_e2", u.rho_e2);
    u.validate();
    c.uniform_ball = u;
    c.pure_jump = PureJumpParams::from_uniform_ball(u);
    c.model = PureJumpModel(*c.pure_jump);
  } else if (c.variant == "pure_jump") {
    PureJumpParams p;
    p.dim = dim;
    p.kernel = parse_kernel(need("model.jump"), dim, "model.jump");
    p.rho_e = parse_rate(need("model.rho_e"), "model.rho_e");
    p.bounds = RegionBounds::doubling([&](double rad) { return p.kernel.sup_rate_on_ball(rad) + p.rho_e.sup_on_ball(rad); },
                                      bound_radius);
    c.pure_jump = p;
    c.model = PureJumpModel(p);
  } else if (c.variant == "coord_jump") {
    CoordJumpParams p = CoordJumpParams::symmetric(dim, num("model.coord_h", 0.5), num("model.coord_R", 1.0),
                                                   parse_rate(get("model.rho_e").value_or("0.5"), "model.rho_e"));
    c.coord_jump = p;
    c.model = CoordJumpModel(p);
  } else if (c.variant == "drift_jump") {
    DriftJumpParams p;
    p.dim = dim;
    p.v = num("model.v", 1.0);
    p.kernel = parse_kernel(need("model.jump"), dim, "model.jump");
    p.rho_e = parse_rate(need("model.rho_e"), "model.rho_e");
    p.S = num("model.S", 0.0);
    p.delta_S = num("model.delta_S", 0.0);
    p.h_floor = num("model.h_floor", 0.0);
    p.with_default_bounds(bound_radius);
    c.model = DriftJumpModel(p);
  } else if (c.variant == "eco_evo") {
    EcoEvoParams p;
    p.dim = dim;
    if (const auto s = get("model.r")) p.r = parse_rate(*s, "model.r");
    p.c = num("model.c", p.c);
    p.sigma_N = num("model.sigma_N", p.sigma_N);
    p.b_linear = num("model.b", p.b_linear);
    p.sigma_X = num("model.sigma_X", p.sigma_X);
    p.cat_density = num("model.cat_density", p.cat_density);
    p.cat_p_lo = num("model.cat_p_lo", p.cat_p_lo);
    p.cat_p_hi = num("model.cat_p_hi", p.cat_p_hi);
    p.cat_atom_at_one = num("model.cat_atom_at_one", p.cat_atom_at_one);
    if (const auto s = get("model.mutation")) p.mutation = parse_kernel(*s, dim, "model.mutation");
    if (const auto s = get("model.rho_c")) p.rho_c = parse_rate(*s, "model.rho_c");
    p.with_default_bounds(bound_radius);
    c.model = EcoEvoModel(p);
    const double n0 = num("model.n0", 1.0);
    if (!(n0 > 0.0)) throw ValidationError("config: model.n0 must be positive");
    c.mu0 = InitialLaw::point(AbsorbedState(x0, n0));
    return c;
  } else {
    throw ValidationError("config: unknown model.variant '" + c.variant +
                          "' (known: chain, uniform_ball, pure_jump, coord_jump, drift_jump, eco_evo)");
  }
  c.mu0 = InitialLaw::point(AbsorbedState(x0));
  return c;
}

// Reads an INI file into section.key entries. Keys outside a section are
// rejected.
inline std::map<std::string, std::string> read_config_entries(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  std::map<std::string, std::string> out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ValidationError("config: key '" + section + "' outside any section");
    for (const auto& [key, value] : body) out[section + "." + key] = config_detail::trim(value.data());
  }
  return out;
}

inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    const std::map<std::string, std::string>& overrides = {}) {
  auto entries = read_config_entries(path);
  for (const auto& [k, v] : overrides) entries[k] = v;
  return build_config(entries, path.parent_path());
}

}  // namespace qsdlab
