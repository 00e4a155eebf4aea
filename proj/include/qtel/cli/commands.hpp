#pragma once

#include "qtel/analytics.hpp"
#include "qtel/cli/config.hpp"
#include "qtel/cli/output.hpp"
#include "qtel/model.hpp"
#include "qtel/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qtel::cli {

struct CommandOutput {
  json results = json::object();
  std::vector<std::string> warnings;
  CsvTable table{{}};
  std::string svg;
  int exit_code = 0;
};

inline json summary_json(const std::string& command, const RunConfig& cfg, const CommandOutput& out) {
  json j;
  j["command"] = command;
  j["config_echo"] = echo(cfg);
  j["results"] = out.results;
  std::vector<std::string> w = cfg.warnings;
  w.insert(w.end(), out.warnings.begin(), out.warnings.end());
  j["warnings"] = w;
  return j;
}

namespace detail {

// (x - y) / s, or null when the spread is zero up to roundoff (every run
// produced the same state).
inline json sigma_units(double x, double y, double s) {
  if (!(s > 1e-12 * std::max(1.0, std::abs(y)))) return nullptr;
  return (x - y) / s;
}

inline json qubit_json(const InputQubit& q) {
  return {q.a.real(), q.a.imag(), q.b.real(), q.b.imag()};
}

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back({m(i, k).real(), m(i, k).imag()});
    rows.push_back(r);
  }
  return rows;
}

inline json report_json(const EntanglementReport& r) {
  return {{"e_r", r.e_r},       {"lower_bound", r.lower_bound}, {"upper_bound", r.upper_bound},
          {"gap", r.gap},       {"iterations", r.iterations},   {"restarts", r.restarts},
          {"converged", r.converged}, {"ppt_certified", r.ppt_certified}};
}

inline bool nondecreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1]) return false;
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline CommandOutput cmd_validate(const RunConfig& cfg) {
  const auto p = cfg.params();
  const auto eff = effective_params(p);
  const auto st = solve_stage_times(p);
  CommandOutput out;
  const double al = alpha(p), be = beta(p);
  out.results = {{"E_rad_per_us", eff.E},
                 {"omega_kappa_rad_per_us", eff.omega_kappa},
                 {"t_i_us", st.t_i},
                 {"t_e_us", st.t_e},
                 {"t_e_as_printed_us", t_e_as_printed(p)},
                 {"alpha", al},
                 {"beta", be},
                 {"p_nd_b", be * be},
                 {"adiabatic_ratio", p.g * p.omega / (p.delta * p.delta)},
                 {"detuning_ratio", p.gamma > 0 ? p.delta / p.gamma : INFINITY},
                 {"oscillation_ratio", p.kappa > 0 ? eff.omega_kappa / p.kappa : INFINITY}};
  const auto warns = validate_regime(p, cfg.thresholds);
  json wl = json::array();
  for (const auto& w : warns) {
    out.warnings.push_back(w.message);
    wl.push_back({{"constraint", w.constraint}, {"value", w.value}, {"threshold", w.threshold}});
  }
  out.results["regime_warnings"] = wl;
  out.exit_code = warns.empty() ? 0 : 2;

  out.table = CsvTable({"quantity", "value", "unit"});
  out.table.add({"E", eff.E, "rad/us"});
  out.table.add({"omega_kappa", eff.omega_kappa, "rad/us"});
  out.table.add({"t_i", st.t_i, "us"});
  out.table.add({"t_e", st.t_e, "us"});
  out.table.add({"t_e_as_printed", t_e_as_printed(p), "us"});
  out.table.add({"alpha", al, ""});
  out.table.add({"beta", be, ""});
  out.table.add({"p_nd_b", be * be, ""});

  // Margins above 1 mean the constraint holds.
  BarChart b;
  b.title = "Regime margins (value relative to threshold)";
  b.ylabel = "margin";
  b.labels = {"g*Omega/Delta^2", "Delta/gamma", "Omega_k/kappa"};
  const double ad = p.g * p.omega / (p.delta * p.delta);
  const double de = p.gamma > 0 ? p.delta / p.gamma : 1e6;
  const double os = p.kappa > 0 ? eff.omega_kappa / p.kappa : 1e6;
  b.values = {cfg.thresholds.max_adiabatic_ratio / ad, de / cfg.thresholds.min_detuning_ratio,
              os / cfg.thresholds.min_oscillation_ratio};
  b.reference = {1.0, 1.0, 1.0};
  out.svg = render_svg(b);
  return out;
}

// ---------------------------------------------------------------------------

inline CommandOutput cmd_teleport(const RunConfig& cfg) {
  const auto p = cfg.params();
  CommandOutput out;
  const auto mc = run_teleportation(cfg.input, p, cfg.t_d_us, cfg.eta, cfg.trajectories, cfg.seed);

  double an_rate = 0.0, an_fid = 0.0;
  json analytic;
  if (cfg.input) {
    const auto rep = fidelity_report(cfg.t_d_us, *cfg.input, p, cfg.eta);
    an_rate = rep.p_suc_eta;
    an_fid = rep.f_eta;
    analytic = {{"p_suc", rep.p_suc_eta},
                {"fidelity", rep.f_eta},
                {"fidelity_first_principles_eta1", rep.f_first_principles},
                {"fidelity_formula_as_printed", rep.f_as_printed},
                {"fidelity_formula_as_norm", rep.f_as_norm},
                {"p_suc_eta1_as_norm", rep.p_suc},
                {"p_suc_eta1_as_printed", rep.p_suc_as_printed},
                {"p_nd_a_as_norm", p_nd_alice(*cfg.input, p, PndReading::as_norm)},
                {"p_nd_a_as_printed", p_nd_alice(*cfg.input, p, PndReading::as_printed)}};
  } else {
    an_rate = average_p_success(cfg.t_d_us, p, cfg.eta);
    an_fid = average_f_eta(cfg.t_d_us, p, cfg.eta, true);
    analytic = {{"p_suc", an_rate},
                {"fidelity", an_fid},
                {"fidelity_unweighted", average_f_eta(cfg.t_d_us, p, cfg.eta, false)},
                {"p_suc_eta1_as_printed",
                 average_over_inputs([&](const InputQubit& q) { return p_success(cfg.t_d_us, q, p, PndReading::as_printed); })}};
  }
  json counts;
  for (Status s : {Status::success, Status::no_click, Status::two_clicks, Status::prep_decay})
    counts[to_string(s)] = mc.count(s);
  out.results = {{"input", cfg.input ? detail::qubit_json(*cfg.input) : json("haar")},
                 {"mc",
                  {{"trajectories", mc.trajectories},
                   {"counts", counts},
                   {"success_rate", mc.success_rate},
                   {"success_stderr", mc.success_stderr},
                   {"fidelity", mc.fidelity_mean},
                   {"fidelity_stderr", mc.fidelity_stderr}}},
                 {"analytic", analytic},
                 {"difference",
                  {{"success_rate", mc.success_rate - an_rate},
                   {"success_rate_sigma", detail::sigma_units(mc.success_rate, an_rate, mc.success_stderr)},
                   {"fidelity", mc.fidelity_mean - an_fid},
                   {"fidelity_sigma", detail::sigma_units(mc.fidelity_mean, an_fid, mc.fidelity_stderr)}}}};
  if (mc.mean_bob_state) out.results["mc"]["mean_bob_state"] = detail::matrix_json(mc.mean_bob_state->matrix());
  if (mc.count(Status::success) == 0) out.warnings.push_back("no successful trajectories");

  out.table = CsvTable({"index", "seed", "re_a", "im_a", "re_b", "im_b", "status", "detector", "t_click_us",
                        "actual_jumps", "observed_jumps", "fidelity"});
  for (const auto& r : mc.records) {
    const bool ok = r.status == Status::success;
    out.table.add({static_cast<long long>(r.index), std::to_string(r.seed), r.input.a.real(), r.input.a.imag(),
                   r.input.b.real(), r.input.b.imag(), std::string(to_string(r.status)),
                   ok ? Cell(std::string(to_string(*r.detector))) : Cell{}, ok ? Cell(r.t_click) : Cell{},
                   static_cast<long long>(r.actual_jumps), static_cast<long long>(r.observed_jumps),
                   ok ? Cell(r.fidelity) : Cell{}});
  }

  BarChart b;
  b.title = "Outcome frequencies (bars: simulation, red: analytic success)";
  b.ylabel = "fraction of runs";
  const double n = static_cast<double>(mc.trajectories);
  for (Status s : {Status::success, Status::no_click, Status::two_clicks, Status::prep_decay}) {
    b.labels.push_back(to_string(s));
    b.values.push_back(static_cast<double>(mc.count(s)) / n);
  }
  b.reference = {an_rate};
  out.svg = render_svg(b);
  return out;
}

// ---------------------------------------------------------------------------

inline CommandOutput cmd_fig3(const RunConfig& cfg) {
  const auto p = cfg.params();
  CommandOutput out;
  struct Row {
    double analytic = 0.0;
    std::optional<double> mc, err;
  };
  std::map<double, Row> rows;
  const auto grid = cfg.t_d_grid.values();
  std::vector<double> curve;
  for (double t : grid) {
    rows[t].analytic = average_f_eta(t, p, cfg.eta, true);
    curve.push_back(rows[t].analytic);
  }
  json overlay = json::array();
  for (double t : cfg.mc_t_d_us) {
    const auto mc = run_teleportation(std::nullopt, p, t, cfg.eta, cfg.trajectories, cfg.seed);
    auto& r = rows[t];
    r.analytic = average_f_eta(t, p, cfg.eta, true);
    if (mc.count(Status::success) > 0) {
      r.mc = mc.fidelity_mean;
      r.err = mc.fidelity_stderr;
    }
    overlay.push_back({{"t_d_us", t},
                       {"analytic", r.analytic},
                       {"mc", r.mc ? json(*r.mc) : json(nullptr)},
                       {"stderr", r.err ? json(*r.err) : json(nullptr)},
                       {"sigma", r.mc ? detail::sigma_units(*r.mc, r.analytic, *r.err) : json(nullptr)},
                       {"successes", mc.count(Status::success)}});
  }
  const bool mono = detail::nondecreasing(curve);
  const double t_end = grid.back();
  out.results = {{"eta", cfg.eta},
                 {"monotone_nondecreasing", mono},
                 {"t_d_first_us", grid.front()},
                 {"f_avg_first", curve.front()},
                 {"t_d_last_us", t_end},
                 {"f_avg_last", curve.back()},
                 {"f_avg_last_unweighted", average_f_eta(t_end, p, cfg.eta, false)},
                 {"f_avg_last_formula_as_printed_unweighted", average_fidelity(t_end, p, false, false)},
                 {"mc_overlay", overlay}};
  if (!mono) out.warnings.push_back("average fidelity is not monotone over the sweep");
  if (t_end >= 50.0 && !(curve.back() > 0.99)) out.warnings.push_back("average fidelity at the sweep end is <= 0.99");

  out.table = CsvTable({"t_d_us", "f_avg_analytic", "f_avg_mc", "f_mc_stderr"});
  Plot plot;
  plot.title = "Input-averaged teleportation fidelity vs detection time";
  plot.xlabel = "detection time t_D (us)";
  plot.ylabel = "average fidelity";
  Series an{"analytic", {}, {}, {}, "#1f77b4", false, true};
  Series sim{"simulation", {}, {}, {}, "#d62728", true, false};
  for (const auto& [t, r] : rows) {
    out.table.add({t, r.analytic, r.mc ? Cell(*r.mc) : Cell{}, r.err ? Cell(*r.err) : Cell{}});
    an.x.push_back(t);
    an.y.push_back(r.analytic);
    if (r.mc) {
      sim.x.push_back(t);
      sim.y.push_back(*r.mc);
      sim.err.push_back(*r.err);
    }
  }
  plot.series = {an, sim};
  plot.hline = 0.99;
  out.svg = render_svg(plot);
  return out;
}

// ---------------------------------------------------------------------------

inline CommandOutput cmd_efficiency(const RunConfig& cfg) {
  const auto p = cfg.params();
  CommandOutput out;
  const double t = cfg.t_d_us;
  out.table = CsvTable({"eta", "p_suc_eta", "f_eta", "f_eta_unweighted"});
  std::vector<double> fcurve;
  Plot plot;
  plot.title = "Detection efficiency: success probability and fidelity";
  plot.xlabel = "detection efficiency eta";
  plot.ylabel = "input-averaged value";
  Series ps{"P_suc(eta)", {}, {}, {}, "#1f77b4", false, true};
  Series fs{"F(eta)", {}, {}, {}, "#d62728", false, true};
  for (double eta : cfg.eta_grid.values()) {
    const double psu = average_p_success(t, p, eta);
    const double f = average_f_eta(t, p, eta, true);
    out.table.add({eta, psu, f, average_f_eta(t, p, eta, false)});
    fcurve.push_back(f);
    ps.x.push_back(eta);
    ps.y.push_back(psu);
    fs.x.push_back(eta);
    fs.y.push_back(f);
  }
  plot.series = {ps, fs};
  plot.vlines = {0.6};
  out.svg = render_svg(plot);

  const auto mc = run_teleportation(cfg.input, p, t, cfg.eta, cfg.trajectories, cfg.seed);
  const double an_f = cfg.input ? efficiency_corrected(t, *cfg.input, p, cfg.eta).f_eta : average_f_eta(t, p, cfg.eta);
  const double an_p = cfg.input ? efficiency_corrected(t, *cfg.input, p, cfg.eta).p_suc_eta : average_p_success(t, p, cfg.eta);
  out.results = {{"t_d_us", t},
                 {"f_eta_monotone_in_eta", detail::nondecreasing(fcurve)},
                 {"reference_eta_0_6",
                  {{"p_suc_eta", average_p_success(t, p, 0.6)},
                   {"f_eta", average_f_eta(t, p, 0.6, true)},
                   {"f_eta_unweighted", average_f_eta(t, p, 0.6, false)}}},
                 {"mc",
                  {{"eta", cfg.eta},
                   {"input", cfg.input ? detail::qubit_json(*cfg.input) : json("haar")},
                   {"trajectories", mc.trajectories},
                   {"success_rate", mc.success_rate},
                   {"success_stderr", mc.success_stderr},
                   {"fidelity", mc.fidelity_mean},
                   {"fidelity_stderr", mc.fidelity_stderr},
                   {"analytic_success_rate", an_p},
                   {"analytic_fidelity", an_f},
                   {"success_rate_sigma", detail::sigma_units(mc.success_rate, an_p, mc.success_stderr)},
                   {"fidelity_sigma", detail::sigma_units(mc.fidelity_mean, an_f, mc.fidelity_stderr)}}}};
  if (mc.count(Status::success) == 0) out.warnings.push_back("no successful trajectories");
  return out;
}

// ---------------------------------------------------------------------------

inline CommandOutput cmd_entangle(const RunConfig& cfg) {
  const auto p = cfg.params();
  CommandOutput out;
  const double t = cfg.t_d_us;
  out.table = CsvTable({"eta", "reading", "bell_weight", "e_r", "lower_bound", "upper_bound", "gap", "iterations",
                        "converged"});
  json per_eta = json::array();
  Plot plot;
  plot.title = "Relative entropy of entanglement of the heralded two-atom state";
  plot.xlabel = "detection efficiency eta";
  plot.ylabel = "E_R (ebits)";
  Series printed{"as_printed", {}, {}, {}, "#1f77b4", true, true};
  Series fp{"first_principles", {}, {}, {}, "#2ca02c", true, true};
  for (double eta : cfg.entangle_etas) {
    json row;
    for (MixtureReading r : {MixtureReading::as_printed, MixtureReading::first_principles}) {
      const auto rep = entanglement_report(t, eta, p, r);
      const double bell = rep.rho.matrix()(1, 1).real() * 2.0;
      out.table.add({eta, std::string(to_string(r)), bell, rep.e_r, rep.lower_bound, rep.upper_bound, rep.gap,
                     static_cast<long long>(rep.iterations), std::string(rep.converged ? "true" : "false")});
      row[to_string(r)] = detail::report_json(rep);
      row[to_string(r)]["bell_weight"] = bell;
      (r == MixtureReading::as_printed ? printed : fp).x.push_back(eta);
      (r == MixtureReading::as_printed ? printed : fp).y.push_back(rep.e_r);
      if (!rep.converged)
        out.warnings.push_back("E_R optimizer did not meet its stopping rule at eta=" + format_number(eta) + " (" +
                               to_string(r) + ")");
    }
    row["eta"] = eta;
    per_eta.push_back(row);
  }
  plot.series = {printed, fp};
  out.svg = render_svg(plot);

  json mcj;
  if (cfg.eta > 0.0) {
    const auto mc = run_entanglement(p, t, cfg.eta, cfg.trajectories, cfg.seed);
    mcj["trajectories"] = mc.trajectories;
    mcj["successes"] = mc.count(Status::success);
    if (mc.rho) {
      const auto ref_fp = entangled_state(t, cfg.eta, p, MixtureReading::first_principles);
      const auto ref_pr = entangled_state(t, cfg.eta, p, MixtureReading::as_printed);
      mcj["rho"] = detail::matrix_json(mc.rho->matrix());
      mcj["analytic_first_principles"] = detail::matrix_json(ref_fp.matrix());
      mcj["analytic_as_printed"] = detail::matrix_json(ref_pr.matrix());
      mcj["trace_distance_first_principles"] = trace_distance(*mc.rho, ref_fp);
      mcj["trace_distance_as_printed"] = trace_distance(*mc.rho, ref_pr);
      const auto rep = relative_entropy_of_entanglement(*mc.rho);
      mcj["e_r"] = detail::report_json(rep);
    } else {
      out.warnings.push_back("no heralded pairs in the simulation");
    }
  } else {
    out.warnings.push_back("eta = 0: no clicks are ever observed, simulation skipped");
  }
  out.results = {{"t_d_us", t}, {"eta", cfg.eta}, {"analytic", per_eta}, {"mc", mcj}};
  return out;
}

// ---------------------------------------------------------------------------

inline CommandOutput cmd_insurance(const RunConfig& cfg) {
  const auto p = cfg.params();
  CommandOutput out;
  std::vector<InputQubit> inputs;
  if (cfg.input) inputs.push_back(*cfg.input);
  else inputs.push_back(InputQubit(0.6, 0.8));
  inputs.push_back(InputQubit(1.0, 0.0));
  inputs.push_back(InputQubit(0.0, 1.0));

  out.table = CsvTable({"re_a", "im_a", "re_b", "im_b", "branch", "probability", "correction", "fidelity",
                        "degraded"});
  json cases = json::array();
  BarChart b;
  b.title = "Reserve-atom recovery fidelity per failure branch";
  b.ylabel = "fidelity";
  bool all_exact = true;
  for (const auto& q : inputs) {
    const auto branches = insurance_analysis(q, p, cfg.eta);
    json bj = json::array();
    for (const auto& br : branches) {
      out.table.add({q.a.real(), q.a.imag(), q.b.real(), q.b.imag(), std::string(to_string(br.failure)),
                     br.probability, std::string(to_string(br.correction)), br.fidelity,
                     std::string(br.degraded ? "true" : "false")});
      bj.push_back({{"branch", to_string(br.failure)},
                    {"probability", br.probability},
                    {"correction", to_string(br.correction)},
                    {"fidelity", br.fidelity},
                    {"degraded", br.degraded}});
      if (br.probability > 0.0) {
        b.labels.push_back(fmt::format("({:.2g},{:.2g}) {}", q.a.real(), q.b.real(),
                                       br.failure == Status::no_click ? "0 clicks" : "2 clicks"));
        b.values.push_back(br.fidelity);
        if (std::abs(br.fidelity - 1.0) > 1e-9) all_exact = false;
      }
    }
    cases.push_back({{"input", detail::qubit_json(q)}, {"branches", bj}});
  }
  out.results = {{"eta", cfg.eta}, {"degraded", cfg.eta < 1.0}, {"all_recovered_exactly", all_exact}, {"cases", cases}};
  if (cfg.eta < 1.0) out.warnings.push_back("eta < 1: recovery is best-effort (degraded fidelity)");
  b.reference.assign(b.values.size(), 1.0);
  out.svg = render_svg(b);
  return out;
}

inline const std::map<std::string, std::function<CommandOutput(const RunConfig&)>>& command_table() {
  static const std::map<std::string, std::function<CommandOutput(const RunConfig&)>> table{
      {"validate", cmd_validate}, {"teleport", cmd_teleport},   {"fig3", cmd_fig3},
      {"efficiency", cmd_efficiency}, {"entangle", cmd_entangle}, {"insurance", cmd_insurance}};
  return table;
}

}  // namespace qtel::cli
