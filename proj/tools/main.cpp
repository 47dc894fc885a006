#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fedzz/cli.hpp>

int main(int argc, char** argv) {
  CLI::App app{"federated-learning simulator with zone-based update screening"};
  app.require_subcommand(1);

  fedzz::RunOptions run_opts;
  std::uint64_t seed = 0;

  CLI::App* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("--config", run_opts.config_path, "key=value config file")
      ->required();
  run->add_option("--out", run_opts.out_dir, "output directory (default: out)");
  CLI::Option* run_seed = run->add_option("--seed", seed, "override the config seed");
  run->add_option("--parallel-clients", run_opts.parallel_clients,
                  "worker threads for client training");

  fedzz::SweepOptions sweep_opts;
  CLI::App* sweep =
      app.add_subcommand("sweep", "repeat a run while varying one parameter");
  sweep->add_option("--config", sweep_opts.base.config_path, "key=value config file")
      ->required();
  sweep->add_option("--out", sweep_opts.base.out_dir,
                    "parent output directory (default: out)");
  CLI::Option* sweep_seed =
      sweep->add_option("--seed", seed, "override the config seed");
  sweep->add_option("--parallel-clients", sweep_opts.base.parallel_clients,
                    "worker threads for client training");
  sweep->add_option("--param", sweep_opts.param, "alpha, beta, attack_pct, or m")
      ->required();
  sweep->add_option("--values", sweep_opts.values, "comma-separated values")
      ->required()
      ->delimiter(',');

  std::filesystem::path inspect_config;
  CLI::App* inspect = app.add_subcommand(
      "partition-inspect", "print per-client class counts for the data partition");
  inspect->add_option("--config", inspect_config, "key=value config file")->required();
  CLI::Option* inspect_seed =
      inspect->add_option("--seed", seed, "override the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit cleanly, bad usage is an error
  }

  if (run->parsed()) {
    if (run_seed->count() > 0) run_opts.seed_override = seed;
    return fedzz::cmd_run(run_opts, std::cout, std::cerr);
  }
  if (sweep->parsed()) {
    if (sweep_seed->count() > 0) sweep_opts.base.seed_override = seed;
    return fedzz::cmd_sweep(sweep_opts, std::cout, std::cerr);
  }
  std::optional<std::uint64_t> inspect_override;
  if (inspect_seed->count() > 0) inspect_override = seed;
  return fedzz::cmd_partition_inspect(inspect_config, inspect_override, std::cout,
                                      std::cerr);
}
