#pragma once

// Run configuration: a single JSON document, frequencies entered as nu/2pi in MHz.

#include "qtel/model.hpp"
#include "qtel/protocol.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qtel::cli {

using json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Grid {
  double start = 0.0;
  double stop = 1.0;
  int points = 2;

  std::vector<double> values() const {
    std::vector<double> v(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
      v[static_cast<std::size_t>(i)] = points == 1 ? start : start + (stop - start) * i / (points - 1);
    return v;
  }
};

struct RunConfig {
  // frequencies in MHz (nu/2pi) as entered
  double g_mhz = 0.0, omega_mhz = 0.0, kappa_mhz = 0.0, gamma_mhz = 0.0, delta_mhz = 0.0, delta_e_mhz = 1.0;
  double t_d_us = 50.0;
  double eta = 1.0;
  std::size_t trajectories = 10000;
  std::uint64_t seed = 1;
  std::optional<InputQubit> input;  // empty: Haar-random inputs
  RegimeThresholds thresholds;
  Grid t_d_grid{0.0, 50.0, 50};
  Grid eta_grid{0.0, 1.0, 21};
  std::vector<double> mc_t_d_us{10.0, 20.0, 30.0, 40.0, 50.0};
  std::vector<double> entangle_etas{0.6, 0.9, 1.0};
  std::vector<std::string> warnings;  // raised while parsing

  PhysicalParams params() const {
    return PhysicalParams::from_mhz(g_mhz, omega_mhz, kappa_mhz, gamma_mhz, delta_mhz, delta_e_mhz, eta);
  }
};

namespace detail {

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError("missing field '" + path + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError("field '" + field + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError("field '" + field + "' must be finite");
  return v;
}

inline double req_number(const json& j, const std::string& key, const std::string& path = "") {
  return number(require(j, key, path), path + key);
}

inline std::uint64_t req_uint(const json& j, const std::string& key) {
  const json& v = require(j, key, "");
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError("field '" + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline Grid grid(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError("field '" + field + "' must be an object {start, stop, points}");
  Grid g;
  g.start = req_number(j, "start", field + ".");
  g.stop = req_number(j, "stop", field + ".");
  const json& pts = require(j, "points", field + ".");
  if (!pts.is_number_integer() || pts.get<long long>() < 1)
    throw ConfigError("field '" + field + ".points' must be a positive integer");
  g.points = pts.get<int>();
  if (g.points > 1 && !(g.stop > g.start)) throw ConfigError("field '" + field + "' must be increasing");
  return g;
}

inline std::vector<double> number_list(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) throw ConfigError("field '" + field + "' must be a nonempty array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline void require_increasing(const std::vector<double>& v, const std::string& field) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) throw ConfigError("field '" + field + "' must be increasing");
}

}  // namespace detail

inline RunConfig parse_config(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  const json& p = require(j, "params", "");
  c.g_mhz = req_number(p, "g_mhz", "params.");
  c.omega_mhz = req_number(p, "omega_mhz", "params.");
  c.kappa_mhz = req_number(p, "kappa_mhz", "params.");
  c.gamma_mhz = req_number(p, "gamma_mhz", "params.");
  c.delta_mhz = req_number(p, "delta_mhz", "params.");
  if (p.contains("delta_e_mhz")) c.delta_e_mhz = req_number(p, "delta_e_mhz", "params.");
  c.t_d_us = req_number(j, "t_d_us");
  c.eta = req_number(j, "eta");
  c.trajectories = static_cast<std::size_t>(req_uint(j, "trajectories"));
  c.seed = req_uint(j, "seed");

  if (j.contains("input_qubit") && !j.at("input_qubit").is_null()) {
    const auto v = number_list(j.at("input_qubit"), "input_qubit");
    if (v.size() != 4) throw ConfigError("field 'input_qubit' must be [re_a, im_a, re_b, im_b]");
    const cplx a{v[0], v[1]}, b{v[2], v[3]};
    const double n2 = std::norm(a) + std::norm(b);
    if (!(n2 > 0.0)) throw ConfigError("field 'input_qubit' has zero norm");
    if (std::abs(n2 - 1.0) > 1e-6) {
      std::ostringstream os;
      os << "input_qubit renormalized (norm^2 was " << n2 << ")";
      c.warnings.push_back(os.str());
    }
    c.input = InputQubit::normalized(a, b);
  }
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    if (t.contains("max_adiabatic_ratio"))
      c.thresholds.max_adiabatic_ratio = req_number(t, "max_adiabatic_ratio", "thresholds.");
    if (t.contains("min_detuning_ratio"))
      c.thresholds.min_detuning_ratio = req_number(t, "min_detuning_ratio", "thresholds.");
    if (t.contains("min_oscillation_ratio"))
      c.thresholds.min_oscillation_ratio = req_number(t, "min_oscillation_ratio", "thresholds.");
  }
  if (j.contains("t_d_grid_us")) c.t_d_grid = grid(j.at("t_d_grid_us"), "t_d_grid_us");
  if (j.contains("eta_grid")) c.eta_grid = grid(j.at("eta_grid"), "eta_grid");
  if (j.contains("mc_t_d_us")) c.mc_t_d_us = number_list(j.at("mc_t_d_us"), "mc_t_d_us");
  if (j.contains("entangle_etas")) c.entangle_etas = number_list(j.at("entangle_etas"), "entangle_etas");
  require_increasing(c.mc_t_d_us, "mc_t_d_us");
  require_increasing(c.entangle_etas, "entangle_etas");
  return c;
}

// Range checks that apply after command-line overrides.
inline void check_config(const RunConfig& c) {
  if (c.trajectories < 1) throw ConfigError("field 'trajectories' must be >= 1");
  if (!(c.t_d_us >= 0.0)) throw ConfigError("field 't_d_us' must be >= 0");
  if (!(c.eta >= 0.0 && c.eta <= 1.0)) throw ConfigError("field 'eta' must lie in [0, 1]");
  if (c.eta_grid.start < 0.0 || c.eta_grid.stop > 1.0) throw ConfigError("field 'eta_grid' must lie in [0, 1]");
  if (c.t_d_grid.start < 0.0) throw ConfigError("field 't_d_grid_us' must be >= 0");
  for (double e : c.entangle_etas)
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("field 'entangle_etas' entries must lie in (0, 1]");
  for (double t : c.mc_t_d_us)
    if (!(t > 0.0)) throw ConfigError("field 'mc_t_d_us' entries must be > 0");
  try {
    c.params();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

inline json grid_json(const Grid& g) { return {{"start", g.start}, {"stop", g.stop}, {"points", g.points}}; }

inline json echo(const RunConfig& c) {
  json j;
  j["params"] = {{"g_mhz", c.g_mhz},         {"omega_mhz", c.omega_mhz}, {"kappa_mhz", c.kappa_mhz},
                 {"gamma_mhz", c.gamma_mhz}, {"delta_mhz", c.delta_mhz}, {"delta_e_mhz", c.delta_e_mhz}};
  j["t_d_us"] = c.t_d_us;
  j["eta"] = c.eta;
  j["trajectories"] = c.trajectories;
  j["seed"] = c.seed;
  if (c.input)
    j["input_qubit"] = {c.input->a.real(), c.input->a.imag(), c.input->b.real(), c.input->b.imag()};
  else
    j["input_qubit"] = nullptr;
  j["thresholds"] = {{"max_adiabatic_ratio", c.thresholds.max_adiabatic_ratio},
                     {"min_detuning_ratio", c.thresholds.min_detuning_ratio},
                     {"min_oscillation_ratio", c.thresholds.min_oscillation_ratio}};
  j["t_d_grid_us"] = grid_json(c.t_d_grid);
  j["eta_grid"] = grid_json(c.eta_grid);
  j["mc_t_d_us"] = c.mc_t_d_us;
  j["entangle_etas"] = c.entangle_etas;
  return j;
}

}  // namespace qtel::cli
