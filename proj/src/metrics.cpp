#include <fedzz/metrics.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace fedzz {

namespace {

// Shortest decimal that round-trips the exact double, so files are
// byte-stable across runs and platforms.
std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc())
    throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

DropLog build_drop_log(const std::vector<RoundReport>& reports,
                       const std::vector<int>& malicious_ids) {
  std::vector<int> malicious = malicious_ids;
  std::sort(malicious.begin(), malicious.end());
  malicious.erase(std::unique(malicious.begin(), malicious.end()), malicious.end());

  DropLog log;
  log.total_epochs = static_cast<int>(reports.size());
  log.malicious_count = static_cast<int>(malicious.size());
  for (const auto& report : reports)
    for (int id : report.dropped_ids)
      log.events.push_back(DropEvent{
          report.epoch, id,
          std::binary_search(malicious.begin(), malicious.end(), id)});
  return log;
}

double detection_rate(const DropLog& log) {
  if (log.malicious_count < 1)
    throw std::invalid_argument("detection_rate: no malicious clients in the run");
  if (log.total_epochs < 1)
    throw std::invalid_argument("detection_rate: empty run");
  long long malicious_drops = 0;
  for (const auto& e : log.events)
    if (e.was_malicious) ++malicious_drops;
  return 100.0 * static_cast<double>(malicious_drops) /
         (static_cast<double>(log.malicious_count) *
          static_cast<double>(log.total_epochs));
}

double avg_false_positive_rate(const DropLog& log) {
  if (log.events.empty()) return 0.0;
  long long benign = 0;
  for (const auto& e : log.events)
    if (!e.was_malicious) ++benign;
  return 100.0 * static_cast<double>(benign) /
         static_cast<double>(log.events.size());
}

double malicious_drop_fraction(const DropLog& log) {
  if (log.events.empty()) return 0.0;
  return 100.0 - avg_false_positive_rate(log);
}

double afpr_scaled(const DropLog& log) {
  if (log.events.empty()) return 0.0;
  long long benign = 0;
  for (const auto& e : log.events)
    if (!e.was_malicious) ++benign;
  return static_cast<double>(benign) / static_cast<double>(log.events.size()) *
         static_cast<double>(log.total_epochs) * 2.0;
}

void emit_reports(const std::vector<RoundReport>& reports, const DropLog& log,
                  const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  // per-epoch malicious drop counts, indexed by 1-based epoch
  std::vector<int> malicious_drops(reports.size() + 1, 0);
  for (const auto& e : log.events)
    if (e.was_malicious && e.epoch >= 1 &&
        e.epoch <= static_cast<int>(reports.size()))
      ++malicious_drops[e.epoch];

  std::string metrics = "epoch,gta,train_loss,n_dropped,n_dropped_malicious,calibrated\n";
  for (const auto& r : reports) {
    metrics += std::to_string(r.epoch);
    metrics += ',';
    metrics += format_double(r.gta);
    metrics += ',';
    metrics += format_double(r.train_loss);
    metrics += ',';
    metrics += std::to_string(r.dropped_ids.size());
    metrics += ',';
    metrics += std::to_string(malicious_drops[r.epoch]);
    metrics += ',';
    metrics += r.calibrated ? '1' : '0';
    metrics += '\n';
  }
  write_file(out_dir / "metrics.csv", metrics);

  std::string drops = "epoch,client_id,was_malicious\n";
  for (const auto& e : log.events) {
    drops += std::to_string(e.epoch);
    drops += ',';
    drops += std::to_string(e.client_id);
    drops += ',';
    drops += e.was_malicious ? '1' : '0';
    drops += '\n';
  }
  write_file(out_dir / "drops.csv", drops);

  long long benign_drops = 0;
  for (const auto& e : log.events)
    if (!e.was_malicious) ++benign_drops;

  nlohmann::ordered_json summary;
  summary["epochs"] = reports.size();
  summary["final_gta"] = reports.empty() ? 0.0 : reports.back().gta;
  if (log.malicious_count >= 1 && !reports.empty())
    summary["detection_rate"] = detection_rate(log);
  summary["afpr"] = avg_false_positive_rate(log);
  summary["afpr_scaled"] = afpr_scaled(log);
  summary["drops"] = {
      {"total", log.events.size()},
      {"malicious", log.events.size() - static_cast<std::size_t>(benign_drops)},
      {"benign", benign_drops},
  };

  nlohmann::ordered_json attack;
  attack["kind"] = to_string(cfg.attack.kind);
  attack["malicious_clients"] = cfg.attack.malicious_clients;
  attack["poison_rate"] = cfg.attack.poison_rate;
  attack["epsilon"] = cfg.attack.epsilon;
  attack["max_queries"] = cfg.attack.max_queries;

  nlohmann::ordered_json dataset;
  dataset["kind"] = cfg.dataset.kind == DatasetKind::synthetic ? "synthetic" : "idx";
  if (cfg.dataset.kind == DatasetKind::synthetic) {
    dataset["num_classes"] = cfg.dataset.num_classes;
    dataset["dim"] = cfg.dataset.dim;
    dataset["n_samples"] = cfg.dataset.n_samples;
    dataset["class_sep"] = cfg.dataset.class_sep;
  } else {
    dataset["images"] = cfg.dataset.images_path;
    dataset["labels"] = cfg.dataset.labels_path;
    dataset["max_samples"] = cfg.dataset.max_samples;
  }
  dataset["test_fraction"] = cfg.dataset.test_fraction;

  nlohmann::ordered_json config;
  config["n_clients"] = cfg.n_clients;
  config["zones_m"] = cfg.zones_m;
  config["global_epochs"] = cfg.global_epochs;
  config["local_epochs"] = cfg.local_epochs;
  config["eta"] = cfg.eta;
  config["batch_size"] = cfg.batch_size;
  config["alpha"] = cfg.alpha;
  config["xi"] = cfg.xi;
  config["tau"] = cfg.tau;
  config["defense"] = to_string(cfg.defense);
  config["attack"] = attack;
  config["beta"] = cfg.beta;
  config["seed"] = cfg.seed;
  config["dataset"] = dataset;
  config["rs_fraction"] = cfg.rs_fraction;
  config["krum_f"] = cfg.krum_f;
  config["trim_k"] = cfg.trim_k;
  config["hidden_dims"] = cfg.hidden_dims;
  config["queue_capacity"] = cfg.queue_capacity;
  config["fitness_window"] = cfg.fitness_window;
  summary["config"] = config;

  write_file(out_dir / "summary.json", summary.dump(2) + "\n");
}

}  // namespace fedzz
