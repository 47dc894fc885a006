#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <fedzz/sim.hpp>

namespace fedzz {

// A parsed run configuration. The malicious-client set is not final until
// resolve_malicious runs, because percentage-based selection depends on the
// seed, which command-line overrides may still change.
struct RunSpec {
  ExperimentConfig cfg;
  double attack_pct = 0.0;  // 0 selects the single attack_client
  int attack_client = 0;
};

// Line-oriented key=value text; '#' comments and blank lines are skipped.
// Keys: n_clients, zones_m, global_epochs, local_epochs, eta, batch_size,
// alpha, xi, tau, defense, attack, attack_pct, attack_client, beta, dataset,
// rs_fraction, seed. Unknown or repeated keys are errors.
RunSpec parse_config_text(const std::string& text);

RunSpec load_config(const std::filesystem::path& path);

// Fills cfg.attack.malicious_clients: attack_pct > 0 picks
// round(pct * n / 100) clients as a prefix of a seed-shuffled order, so
// larger percentages contain the smaller ones; attack_pct == 0 picks exactly
// attack_client. Image datasets also clamp feature perturbations to [0, 1].
void resolve_malicious(RunSpec& spec);

struct RunOptions {
  std::filesystem::path config_path;
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed_override;
  int parallel_clients = 1;
};

// Exit codes: 0 success, 2 configuration error, 3 runtime failure.
int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);

struct SweepOptions {
  RunOptions base;
  std::string param;  // alpha | beta | attack_pct | m
  std::vector<double> values;
};

// One run per value under out_dir/<param>_<value>/, plus comparison.csv.
int cmd_sweep(const SweepOptions& opts, std::ostream& out, std::ostream& err);

// Prints per-client per-class training sample counts as CSV.
int cmd_partition_inspect(const std::filesystem::path& config_path,
                          std::optional<std::uint64_t> seed_override, std::ostream& out,
                          std::ostream& err);

}  // namespace fedzz
