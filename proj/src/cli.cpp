#include <fedzz/cli.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fedzz/metrics.hpp>
#include <fedzz/rng.hpp>

namespace fedzz {

namespace {

constexpr std::uint64_t kSaltMalicious = 0x3a1;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(trim(cur));
  return parts;
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": not a number: '" + s + "'");
  }
}

long long parse_int(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": not an integer: '" + s + "'");
  }
}

std::uint64_t parse_seed(const std::string& s) {
  try {
    std::size_t pos = 0;
    // stoull accepts and wraps negative input, so reject the sign up front
    if (s.empty() || s[0] == '-') throw std::invalid_argument("negative");
    std::uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("seed: not an unsigned integer: '" + s + "'");
  }
}

DefenseKind parse_defense_kind(const std::string& name) {
  for (DefenseKind kind :
       {DefenseKind::fedzz, DefenseKind::fedavg, DefenseKind::fl100,
        DefenseKind::random_sampling, DefenseKind::n_way, DefenseKind::krum,
        DefenseKind::trimmed_mean, DefenseKind::median})
    if (to_string(kind) == name) return kind;
  throw std::invalid_argument("defense: unknown kind '" + name + "'");
}

AttackKind parse_attack_kind(const std::string& name) {
  for (AttackKind kind : {AttackKind::none, AttackKind::msimba, AttackKind::dpa_slf,
                          AttackKind::dpa_dlf})
    if (to_string(kind) == name) return kind;
  throw std::invalid_argument("attack: unknown kind '" + name + "'");
}

void parse_defense_value(const std::string& value, ExperimentConfig& cfg) {
  std::vector<std::string> parts = split(value, ',');
  cfg.defense = parse_defense_kind(parts[0]);
  if (parts.size() == 1) return;
  if (parts.size() > 2)
    throw std::invalid_argument("defense: too many parameters in '" + value + "'");
  int param = static_cast<int>(parse_int("defense", parts[1]));
  if (cfg.defense == DefenseKind::krum)
    cfg.krum_f = param;
  else if (cfg.defense == DefenseKind::trimmed_mean)
    cfg.trim_k = param;
  else
    throw std::invalid_argument("defense: '" + parts[0] + "' takes no parameter");
}

void parse_dataset_value(const std::string& value, DatasetConfig& dataset) {
  std::vector<std::string> parts = split(value, ',');
  if (parts[0] == "synthetic") {
    dataset.kind = DatasetKind::synthetic;
    if (parts.size() > 5)
      throw std::invalid_argument("dataset: synthetic takes at most 4 parameters");
    if (parts.size() > 1)
      dataset.num_classes = static_cast<int>(parse_int("dataset", parts[1]));
    if (parts.size() > 2) dataset.dim = static_cast<int>(parse_int("dataset", parts[2]));
    if (parts.size() > 3)
      dataset.n_samples = static_cast<int>(parse_int("dataset", parts[3]));
    if (parts.size() > 4) dataset.class_sep = parse_double("dataset", parts[4]);
  } else if (parts[0] == "idx") {
    if (parts.size() < 3 || parts.size() > 4)
      throw std::invalid_argument(
          "dataset: idx needs images,labels and an optional sample cap");
    dataset.kind = DatasetKind::idx;
    dataset.images_path = parts[1];
    dataset.labels_path = parts[2];
    if (parts.size() > 3)
      dataset.max_samples = static_cast<int>(parse_int("dataset", parts[3]));
  } else {
    throw std::invalid_argument("dataset: unknown kind '" + parts[0] + "'");
  }
}

std::string format_value(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_value: conversion failed");
  return std::string(buf, ptr);
}

}  // namespace

RunSpec parse_config_text(const std::string& text) {
  RunSpec spec;
  std::set<std::string> seen;
  std::istringstream lines(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(lines, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": empty key or value");
    if (!seen.insert(key).second)
      throw std::invalid_argument("repeated key '" + key + "'");

    ExperimentConfig& cfg = spec.cfg;
    if (key == "n_clients") cfg.n_clients = static_cast<int>(parse_int(key, value));
    else if (key == "zones_m") cfg.zones_m = static_cast<int>(parse_int(key, value));
    else if (key == "global_epochs")
      cfg.global_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "local_epochs")
      cfg.local_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "eta") cfg.eta = parse_double(key, value);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "xi") cfg.xi = static_cast<int>(parse_int(key, value));
    else if (key == "tau") cfg.tau = static_cast<int>(parse_int(key, value));
    else if (key == "defense") parse_defense_value(value, cfg);
    else if (key == "attack") cfg.attack.kind = parse_attack_kind(value);
    else if (key == "attack_pct") {
      spec.attack_pct = parse_double(key, value);
      if (!(spec.attack_pct >= 0.0 && spec.attack_pct <= 100.0))
        throw std::invalid_argument("attack_pct must lie in [0, 100]");
    } else if (key == "attack_client")
      spec.attack_client = static_cast<int>(parse_int(key, value));
    else if (key == "beta") cfg.beta = parse_double(key, value);
    else if (key == "dataset") parse_dataset_value(value, cfg.dataset);
    else if (key == "rs_fraction") cfg.rs_fraction = parse_double(key, value);
    else if (key == "seed") cfg.seed = parse_seed(value);
    else throw std::invalid_argument("unknown key '" + key + "'");
  }
  return spec;
}

RunSpec load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void resolve_malicious(RunSpec& spec) {
  ExperimentConfig& cfg = spec.cfg;
  if (cfg.dataset.kind == DatasetKind::idx) {
    cfg.attack.clamp_lo = 0.0;  // image features live in [0, 1]
    cfg.attack.clamp_hi = 1.0;
  }
  if (cfg.attack.kind == AttackKind::none) {
    cfg.attack.malicious_clients.clear();
    return;
  }
  if (spec.attack_pct <= 0.0) {
    cfg.attack.malicious_clients = {spec.attack_client};
    return;
  }
  const int n = cfg.n_clients;
  long long count = std::llround(spec.attack_pct * n / 100.0);
  count = std::clamp<long long>(count, 0, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed, kSaltMalicious));
  rng.shuffle(order);
  order.resize(static_cast<std::size_t>(count));
  std::sort(order.begin(), order.end());
  cfg.attack.malicious_clients = std::move(order);
}

namespace {

struct RunOutcome {
  int exit_code = 0;
  double final_gta = 0.0;
  bool has_dr = false;
  double dr = 0.0;
  double afpr = 0.0;
};

RunOutcome execute_run(RunSpec spec, const RunOptions& opts, std::ostream& out,
                       std::ostream& err) {
  RunOutcome outcome;
  if (opts.seed_override) spec.cfg.seed = *opts.seed_override;
  spec.cfg.parallel_clients = std::max(1, opts.parallel_clients);
  resolve_malicious(spec);

  try {
    validate(spec.cfg);
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    outcome.exit_code = 2;
    return outcome;
  }

  try {
    std::vector<RoundReport> reports = run_experiment(spec.cfg);
    DropLog log = build_drop_log(reports, spec.cfg.attack.malicious_clients);
    emit_reports(reports, log, spec.cfg, opts.out_dir);
    outcome.final_gta = reports.back().gta;
    outcome.afpr = avg_false_positive_rate(log);
    if (log.malicious_count >= 1) {
      outcome.has_dr = true;
      outcome.dr = detection_rate(log);
    }
    out << "wrote " << (opts.out_dir / "summary.json").string()
        << " final_gta=" << outcome.final_gta << "\n";
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    outcome.exit_code = 3;
    return outcome;
  }
  return outcome;
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  RunSpec spec;
  try {
    spec = load_config(opts.config_path);
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }
  return execute_run(std::move(spec), opts, out, err).exit_code;
}

int cmd_sweep(const SweepOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.values.empty()) {
    err << "sweep: no values given\n";
    return 2;
  }
  if (opts.param != "alpha" && opts.param != "beta" && opts.param != "attack_pct" &&
      opts.param != "m") {
    err << "sweep: unknown parameter '" << opts.param
        << "' (expected alpha, beta, attack_pct, or m)\n";
    return 2;
  }

  RunSpec base;
  try {
    base = load_config(opts.base.config_path);
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }

  std::string comparison = "param,value,final_gta,detection_rate,afpr\n";
  for (double value : opts.values) {
    RunSpec spec = base;
    if (opts.param == "alpha") {
      spec.cfg.alpha = value;
    } else if (opts.param == "beta") {
      spec.cfg.beta = value;
    } else if (opts.param == "attack_pct") {
      spec.attack_pct = value;
    } else {
      if (value != std::floor(value)) {
        err << "sweep: m must be an integer, got " << value << "\n";
        return 2;
      }
      spec.cfg.zones_m = static_cast<int>(value);
    }

    RunOptions run_opts = opts.base;
    run_opts.out_dir =
        opts.base.out_dir / (opts.param + "_" + format_value(value));
    RunOutcome outcome = execute_run(std::move(spec), run_opts, out, err);
    if (outcome.exit_code != 0) return outcome.exit_code;

    comparison += opts.param + "," + format_value(value) + "," +
                  format_value(outcome.final_gta) + "," +
                  (outcome.has_dr ? format_value(outcome.dr) : std::string()) + "," +
                  format_value(outcome.afpr) + "\n";
  }

  try {
    std::filesystem::create_directories(opts.base.out_dir);
    std::ofstream file(opts.base.out_dir / "comparison.csv", std::ios::binary);
    if (!file) throw std::runtime_error("cannot write comparison.csv");
    file << comparison;
  } catch (const std::exception& e) {
    err << "sweep failed: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

int cmd_partition_inspect(const std::filesystem::path& config_path,
                          std::optional<std::uint64_t> seed_override, std::ostream& out,
                          std::ostream& err) {
  RunSpec spec;
  try {
    spec = load_config(config_path);
    if (seed_override) spec.cfg.seed = *seed_override;
    resolve_malicious(spec);
    validate(spec.cfg);
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    ExperimentData data = prepare_data(spec.cfg);
    const int num_classes = data.model.num_classes;
    out << "client";
    for (int c = 0; c < num_classes; ++c) out << ",class_" << c;
    out << ",total\n";
    for (int i = 0; i < data.plan.n_clients(); ++i) {
      std::vector<long long> counts(num_classes, 0);
      for (int row : data.plan.client_indices[i]) ++counts[data.train.labels(row)];
      out << i;
      long long total = 0;
      for (long long c : counts) {
        out << ',' << c;
        total += c;
      }
      out << ',' << total << '\n';
    }
  } catch (const std::exception& e) {
    err << "inspect failed: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace fedzz
