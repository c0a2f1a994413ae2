#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "clf_etc/errors.hpp"
#include "clf_etc/experiment.hpp"

namespace {

void add_common(CLI::App* cmd, clf_etc::CommandOptions& opts, std::string& out,
                std::uint64_t& seed) {
  cmd->add_option("--config", opts.config_path, "Experiment config (JSON)")->required();
  cmd->add_option("--out", out, "Output directory (overrides the config)");
  cmd->add_option("--seed", seed, "Sampling seed (overrides the config)");
  cmd->add_flag("--force", opts.force, "Continue past assumption failures");
  cmd->add_flag("--plot", opts.plot, "Also write an SVG plot");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-triggered CLF control: simulation, certificates, dwell times"};
  app.require_subcommand(1);

  clf_etc::CommandOptions opts;
  std::string out;
  std::uint64_t seed = 0;
  std::string csv_path;

  auto* simulate = app.add_subcommand("simulate", "Run a closed-loop experiment");
  auto* verify = app.add_subcommand("verify", "Audit the CLF and its standing assumptions");
  auto* dwell = app.add_subcommand("dwell", "Estimate tau_min, tau* and the periodic check h");
  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
  auto* stats = app.add_subcommand("stats", "Statistics of a trajectory CSV");
  for (auto* cmd : {simulate, verify, dwell, sweep}) add_common(cmd, opts, out, seed);
  stats->add_option("csv", csv_path, "Trajectory CSV")->required();

  CLI11_PARSE(app, argc, argv);

  for (auto* cmd : {simulate, verify, dwell, sweep}) {
    if (!cmd->parsed()) continue;
    if (cmd->count("--out") > 0) opts.out_dir = out;
    if (cmd->count("--seed") > 0) opts.seed = seed;
  }

  try {
    if (simulate->parsed()) return clf_etc::cmd_simulate(opts);
    if (verify->parsed()) return clf_etc::cmd_verify(opts);
    if (dwell->parsed()) return clf_etc::cmd_dwell(opts);
    if (sweep->parsed()) return clf_etc::cmd_sweep(opts);
    if (stats->parsed()) return clf_etc::cmd_stats(csv_path);
  } catch (const clf_etc::AssumptionViolation& e) {
    std::cerr << "assumption '" << e.assumption() << "' failed: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
