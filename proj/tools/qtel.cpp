// qtel: command-line driver for the cavity-decay teleportation simulator.
//
//   qtel <validate|teleport|fig3|efficiency|entangle|insurance> --config FILE
//        [--td-us T] [--eta E] [--trajectories N] [--seed S] [--out DIR]
//
// Exit codes: 0 ok, 1 configuration error, 2 regime error or regime
// warnings (validate), 3 numerical failure.

#include "qtel/cli/commands.hpp"
#include "qtel/cli/config.hpp"
#include "qtel/cli/output.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

enum Exit { ok = 0, config_error = 1, regime_error = 2, numerical_error = 3 };

struct Overrides {
  std::optional<double> td_us, eta;
  std::optional<std::size_t> trajectories;
  std::optional<std::uint64_t> seed;
};

int run(const std::string& command, const std::string& config_path, const Overrides& ov, const std::string& out_dir) {
  using namespace qtel::cli;
  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    if (ov.td_us) cfg.t_d_us = *ov.td_us;
    if (ov.eta) cfg.eta = *ov.eta;
    if (ov.trajectories) cfg.trajectories = *ov.trajectories;
    if (ov.seed) cfg.seed = *ov.seed;
    check_config(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  }

  CommandOutput out;
  try {
    out = command_table().at(command)(cfg);
  } catch (const qtel::RegimeError& e) {
    std::cerr << "regime error: " << e.what() << "\n";
    return regime_error;
  } catch (const qtel::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return numerical_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  }

  const std::string summary = summary_json(command, cfg, out).dump(2) + "\n";
  std::cout << summary;
  try {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    write_file((dir / "summary.json").string(), summary);
    write_file((dir / (command + ".csv")).string(), out.table.str());
    write_file((dir / (command + ".svg")).string(), out.svg);
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return numerical_error;
  }
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
  return out.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity-decay atomic teleportation simulator"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir = "out";
  Overrides ov;

  const std::map<std::string, std::string> about{
      {"validate", "check parameters, stage times and regime conditions"},
      {"teleport", "Monte-Carlo teleportation against the closed forms"},
      {"fig3", "Haar-average fidelity versus detection time"},
      {"efficiency", "success probability and fidelity versus detector efficiency"},
      {"entangle", "heralded atom-atom entanglement and its relative entropy"},
      {"insurance", "failure branches of teleportation with a reserve atom"},
  };
  for (const auto& [name, fn] : qtel::cli::command_table()) {
    (void)fn;
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option_function<double>("--td-us", [&](const double& v) { ov.td_us = v; }, "detection time (us)");
    sub->add_option_function<double>("--eta", [&](const double& v) { ov.eta = v; }, "detection efficiency");
    sub->add_option_function<std::size_t>("--trajectories", [&](const std::size_t& v) { ov.trajectories = v; },
                                           "Monte-Carlo trajectories");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { ov.seed = v; }, "master seed");
    sub->add_option("--out", out_dir, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : config_error;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return run(command, config_path, ov, out_dir);
}
