// betadyne: build open-system models, displace their unravelings, chart the
// spectra of the resulting no-jump generators, hunt exceptional points, and
// check everything against seeded trajectory ensembles.

#include "betadyne/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"tunable non-Hermitian generators from displaced unravelings"};
  app.require_subcommand(1);

  std::string config_path, scenario, out_dir, format;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  int threads = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--scenario", scenario,
                    "scenario name: gain-loss-qubit | three-level | kerr | driven-qubit");
    cmd->add_option("--set", overrides, "override a config entry, dotted path: --set sweep.points=51");
    cmd->add_option("--out", out_dir, "output directory (default betadyne_out)");
    cmd->add_option("--seed", seed, "master seed for every stochastic element");
    cmd->add_option("--threads", threads, "worker threads (default: machine parallelism)");
    cmd->add_option("--format", format, "tabular output format: csv | json");
  };

  const char* modes[] = {"spectrum", "overlap-map", "ep-find", "trajectories", "validate",
                         "scenario-dump"};
  const char* descriptions[] = {
      "branch-tracked eigenvalues along a parameter sweep",
      "eigenvector overlap over a grid of complex displacements",
      "locate an exceptional point over beta or a model parameter",
      "seeded trajectory ensemble vs master equation and survival",
      "run the invariance suite and report pass/fail",
      "write the scenario model in the interchange schema"};
  for (std::size_t k = 0; k < 6; ++k) add_common(app.add_subcommand(modes[k], descriptions[k]));

  CLI11_PARSE(app, argc, argv);
  const std::string mode = app.get_subcommands().front()->get_name();

  std::string echo = "betadyne";
  for (int k = 1; k < argc; ++k) echo += std::string(" ") + argv[k];

  try {
    betadyne::json config = betadyne::json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) {
        std::cerr << "error: cannot open config file " << config_path << "\n";
        return 1;
      }
      in >> config;
    }
    if (!scenario.empty()) config["scenario"] = scenario;
    if (!out_dir.empty()) config["out"] = out_dir;
    if (seed >= 0) config["seed"] = std::uint64_t(seed);
    if (threads >= 0) config["threads"] = threads;
    if (!format.empty()) config["format"] = format;
    for (const auto& assignment : overrides) betadyne::cli::apply_override(config, assignment);
    return betadyne::cli::run_command(mode, std::move(config), echo);
  } catch (const betadyne::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const betadyne::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
