#include <fedzz/sim.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <thread>
#include <utility>

#include <fedzz/baselines.hpp>
#include <fedzz/data.hpp>
#include <fedzz/rng.hpp>

namespace fedzz {

namespace {

// Sub-stream salts; every consumer of randomness gets its own derivation so
// re-seeding one stage never shifts another.
constexpr std::uint64_t kSaltData = 0xda7a;
constexpr std::uint64_t kSaltSplit = 0x5411;
constexpr std::uint64_t kSaltPartition = 0xd14;
constexpr std::uint64_t kSaltInit = 0x1217;
constexpr std::uint64_t kSaltZones = 0x20e5;
constexpr std::uint64_t kSaltTrain = 0x74a1;
constexpr std::uint64_t kSaltAttack = 0xa77c;
constexpr std::uint64_t kSaltCalibrate = 0xca1;
constexpr std::uint64_t kSaltSampling = 0x4a0d;

int derived_byzantine_count(const ExperimentConfig& cfg) {
  if (cfg.attack.kind != AttackKind::none && !cfg.attack.malicious_clients.empty())
    return static_cast<int>(cfg.attack.malicious_clients.size());
  return cfg.n_clients / 4;
}

// Largest f with n >= 2f + 3.
int max_krum_f(int n) { return (n - 3) / 2; }

int effective_krum_f(const ExperimentConfig& cfg) {
  if (cfg.krum_f >= 0) return cfg.krum_f;
  return std::clamp(derived_byzantine_count(cfg), 0, std::max(0, max_krum_f(cfg.n_clients)));
}

int effective_trim_k(const ExperimentConfig& cfg) {
  if (cfg.trim_k >= 0) return cfg.trim_k;
  return std::clamp(derived_byzantine_count(cfg), 0, (cfg.n_clients - 1) / 2);
}

void check_results(const std::vector<ClientRoundResult>& results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no client results");
  const Eigen::Index len = results.front().update.size();
  for (const auto& r : results) {
    if (r.update.size() != len)
      throw std::invalid_argument("aggregate: update length mismatch");
    if (r.data_size < 0) throw std::invalid_argument("aggregate: negative data size");
  }
}

}  // namespace

std::string to_string(DefenseKind kind) {
  switch (kind) {
    case DefenseKind::fedzz: return "fedzz";
    case DefenseKind::fedavg: return "fedavg";
    case DefenseKind::fl100: return "fl100";
    case DefenseKind::random_sampling: return "random_sampling";
    case DefenseKind::n_way: return "n_way";
    case DefenseKind::krum: return "krum";
    case DefenseKind::trimmed_mean: return "trimmed_mean";
    case DefenseKind::median: return "median";
  }
  throw std::invalid_argument("to_string: unknown defense kind");
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.n_clients < 2) throw std::invalid_argument("n_clients must be >= 2");
  if (cfg.zones_m < 2) throw std::invalid_argument("zones_m must be >= 2");
  if (cfg.n_clients % cfg.zones_m != 0)
    throw std::invalid_argument("m must divide n: n_clients=" +
                                std::to_string(cfg.n_clients) +
                                " zones_m=" + std::to_string(cfg.zones_m));
  if (cfg.global_epochs < 1) throw std::invalid_argument("global_epochs must be >= 1");
  if (cfg.local_epochs < 0) throw std::invalid_argument("local_epochs must be >= 0");
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta))
    throw std::invalid_argument("eta must be positive and finite");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.alpha >= -1.0 && cfg.alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in [-1, 1]");
  if (cfg.xi < 1) throw std::invalid_argument("xi must be >= 1");
  if (cfg.tau < 0) throw std::invalid_argument("tau must be >= 0");
  if (!(cfg.beta > 0.0) || !std::isfinite(cfg.beta))
    throw std::invalid_argument("beta must be positive and finite");
  if (!(cfg.rs_fraction > 0.0 && cfg.rs_fraction <= 1.0))
    throw std::invalid_argument("rs_fraction must lie in (0, 1]");
  if (cfg.queue_capacity < 1) throw std::invalid_argument("queue_capacity must be >= 1");
  if (cfg.fitness_window < 1) throw std::invalid_argument("fitness_window must be >= 1");
  if (cfg.parallel_clients < 1)
    throw std::invalid_argument("parallel_clients must be >= 1");

  if (cfg.dataset.kind == DatasetKind::synthetic) {
    if (cfg.dataset.num_classes < 2)
      throw std::invalid_argument("dataset num_classes must be >= 2");
    if (cfg.dataset.dim < 1) throw std::invalid_argument("dataset dim must be >= 1");
    if (cfg.dataset.n_samples < 2)
      throw std::invalid_argument("dataset n_samples must be >= 2");
    if (!(cfg.dataset.class_sep >= 0.0))
      throw std::invalid_argument("dataset class_sep must be >= 0");
  } else {
    if (cfg.dataset.images_path.empty() || cfg.dataset.labels_path.empty())
      throw std::invalid_argument("idx dataset needs images and labels paths");
  }
  if (!(cfg.dataset.test_fraction > 0.0 && cfg.dataset.test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  for (int h : cfg.hidden_dims)
    if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");

  validate(cfg.attack);
  for (int id : cfg.attack.malicious_clients)
    if (id < 0 || id >= cfg.n_clients)
      throw std::invalid_argument("malicious client id out of range: " +
                                  std::to_string(id));

  if (cfg.defense == DefenseKind::krum) {
    int f = effective_krum_f(cfg);
    if (f < 0 || 2 * f >= cfg.n_clients - 2)
      throw std::invalid_argument("krum needs n > 2f + 2; got f=" + std::to_string(f));
  }
  if (cfg.defense == DefenseKind::trimmed_mean) {
    int k = effective_trim_k(cfg);
    if (k < 0 || 2 * k >= cfg.n_clients)
      throw std::invalid_argument("trimmed mean needs 2k < n; got k=" +
                                  std::to_string(k));
  }
}

ClientRoundResult client_round(const LabeledDataset& client_data, const Vector& incoming,
                               const ModelSpec& spec, double alpha, double eta,
                               int batch_size, int local_epochs,
                               const AttackConfig& attack, int client_id, int round,
                               std::uint64_t seed) {
  if (incoming.size() != param_count(spec))
    throw std::invalid_argument("client_round: incoming parameter length mismatch");

  LabeledDataset local = apply_attack(
      client_data, attack, incoming, spec, client_id, round,
      mix_seed(seed, static_cast<std::uint64_t>(client_id), kSaltAttack), batch_size);

  ClientRoundResult result;
  result.client_id = client_id;
  result.data_size = client_data.size();
  result.update = sgd_train(incoming, spec, local, eta, batch_size, local_epochs,
                            mix_seed(seed, static_cast<std::uint64_t>(client_id),
                                     static_cast<std::uint64_t>(round), kSaltTrain));
  result.cosim = cosine_similarity(result.update, incoming);
  result.discard = result.cosim < alpha;
  return result;
}

Vector aggregate_global(const std::vector<ClientRoundResult>& results,
                        const Vector& prev_global) {
  check_results(results);
  double total = 0.0;
  for (const auto& r : results)
    if (!r.discard) total += static_cast<double>(r.data_size);
  if (total <= 0.0) return prev_global;  // nothing survived the discard flags

  Vector out = Vector::Zero(results.front().update.size());
  for (const auto& r : results)
    if (!r.discard && r.data_size > 0)
      out += (static_cast<double>(r.data_size) / total) * r.update;
  return out;
}

std::vector<Vector> zone_aggregate(const std::vector<ClientRoundResult>& results,
                                   const ZoneSet& z) {
  if (auto err = validate(z)) throw std::invalid_argument("zone_aggregate: " + *err);
  check_results(results);

  const int n = z.n_clients();
  std::vector<int> pos(n, -1);
  for (int i = 0; i < static_cast<int>(results.size()); ++i) {
    int c = results[i].client_id;
    if (c >= 0 && c < n) pos[c] = i;
  }

  std::vector<Vector> aggregates;
  aggregates.reserve(z.zones.size());
  for (const auto& zone : z.zones) {
    std::vector<int> members = zone;
    std::sort(members.begin(), members.end());  // fixed summation order
    double total = 0.0;
    for (int c : members) {
      if (pos[c] < 0)
        throw std::invalid_argument("zone_aggregate: no update for client " +
                                    std::to_string(c));
      total += static_cast<double>(results[pos[c]].data_size);
    }
    Vector az = Vector::Zero(results.front().update.size());
    if (total > 0.0) {
      for (int c : members) {
        const auto& r = results[pos[c]];
        if (r.data_size > 0)
          az += (static_cast<double>(r.data_size) / total) * r.update;
      }
    } else {
      for (int c : members) az += results[pos[c]].update;
      az /= static_cast<double>(members.size());
    }
    aggregates.push_back(std::move(az));
  }
  return aggregates;
}

double mimic_server(const ZoneSet& z_candidate,
                    const std::vector<ClientRoundResult>& stored, const ModelSpec& spec,
                    double alpha, const LabeledDataset& test, const Vector& prev_global) {
  std::vector<Vector> az = zone_aggregate(stored, z_candidate);
  std::vector<ClientRoundResult> replay = stored;
  for (auto& r : replay) {
    int disc = discriminator_of(r.client_id, z_candidate);
    r.discard = cosine_similarity(r.update, az[disc]) < alpha;
  }
  Vector params = aggregate_global(replay, prev_global);
  return accuracy(params, spec, test);
}

ExperimentData prepare_data(const ExperimentConfig& cfg) {
  LabeledDataset all;
  int num_classes = 0;
  if (cfg.dataset.kind == DatasetKind::synthetic) {
    num_classes = cfg.dataset.num_classes;
    all = generate_synthetic(num_classes, cfg.dataset.dim, cfg.dataset.n_samples,
                             cfg.dataset.class_sep, mix_seed(cfg.seed, kSaltData));
  } else {
    all = load_idx(cfg.dataset.images_path, cfg.dataset.labels_path,
                   cfg.dataset.max_samples);
    num_classes = all.labels.size() > 0 ? all.labels.maxCoeff() + 1 : 0;
    if (num_classes < 2)
      throw std::invalid_argument("prepare_data: dataset holds fewer than two classes");
  }

  auto [train, test] =
      train_test_split(all, cfg.dataset.test_fraction, mix_seed(cfg.seed, kSaltSplit));
  if (train.size() == 0 || test.size() == 0)
    throw std::invalid_argument("prepare_data: train or test split is empty");

  ExperimentData data;
  data.plan = dirichlet_partition(train, cfg.n_clients, cfg.beta,
                                  mix_seed(cfg.seed, kSaltPartition));
  data.model = ModelSpec{static_cast<int>(train.dim()), cfg.hidden_dims, num_classes};
  data.train = std::move(train);
  data.test = std::move(test);
  return data;
}

namespace {

// Client rounds are independent; contiguous blocks per worker, results
// slotted by client id, so the merge order never depends on scheduling.
void run_all_clients(const ExperimentConfig& cfg, const ModelSpec& spec,
                     const std::vector<LabeledDataset>& shards,
                     const std::vector<Vector>& incoming, int epoch,
                     std::vector<ClientRoundResult>& results) {
  const int n = cfg.n_clients;
  auto run_range = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i)
      results[i] =
          client_round(shards[i], incoming[i], spec, cfg.alpha, cfg.eta,
                       cfg.batch_size, cfg.local_epochs, cfg.attack, i, epoch,
                       cfg.seed);
  };

  const int workers = std::min(cfg.parallel_clients, n);
  if (workers <= 1) {
    run_range(0, n);
    return;
  }

  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    int lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, w, lo, hi] {
      try {
        run_range(lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct StoredRound {
  std::vector<ClientRoundResult> results;
  Vector prev_global;
};

Vector dispatch_defense(const ExperimentConfig& cfg,
                        const std::vector<ClientRoundResult>& results,
                        const Vector& lambda, const Vector& prev_global, int epoch,
                        int krum_f, int trim_k, std::vector<int>& dropped) {
  const int n = cfg.n_clients;
  std::vector<Vector> updates;
  updates.reserve(n);
  for (const auto& r : results) updates.push_back(r.update);
  dropped.clear();

  switch (cfg.defense) {
    case DefenseKind::fedzz: {
      for (const auto& r : results)
        if (r.discard) dropped.push_back(r.client_id);
      return aggregate_global(results, prev_global);
    }
    case DefenseKind::fedavg:
      return fedavg_aggregate(updates, lambda);
    case DefenseKind::fl100: {
      std::vector<int> malicious;
      if (cfg.attack.kind != AttackKind::none)
        malicious = cfg.attack.malicious_clients;
      std::sort(malicious.begin(), malicious.end());
      dropped = malicious;
      return fl100_aggregate(updates, lambda, malicious, prev_global);
    }
    case DefenseKind::random_sampling: {
      SampledAggregate s = random_sampling_aggregate(
          updates, lambda, cfg.rs_fraction,
          mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), kSaltSampling));
      std::vector<bool> kept(n, false);
      for (int id : s.selected) kept[id] = true;
      for (int i = 0; i < n; ++i)
        if (!kept[i]) dropped.push_back(i);
      return std::move(s.params);
    }
    case DefenseKind::n_way: {
      ScreenedAggregate s = n_way_aggregate(updates, lambda, cfg.alpha, prev_global);
      dropped = std::move(s.dropped);
      return std::move(s.params);
    }
    case DefenseKind::krum: {
      int winner = krum_select(updates, krum_f);
      for (int i = 0; i < n; ++i)
        if (i != winner) dropped.push_back(i);
      return updates[winner];
    }
    case DefenseKind::trimmed_mean:
      return trimmed_mean_aggregate(updates, trim_k);
    case DefenseKind::median:
      return median_aggregate(updates);
  }
  throw std::invalid_argument("dispatch_defense: unknown defense kind");
}

}  // namespace

std::vector<RoundReport> run_experiment(const ExperimentConfig& cfg,
                                        const RoundObserver& observer) {
  validate(cfg);
  ExperimentData data = prepare_data(cfg);
  const ModelSpec& spec = data.model;
  const int n = cfg.n_clients;

  std::vector<LabeledDataset> shards;
  shards.reserve(n);
  for (int i = 0; i < n; ++i) shards.push_back(client_dataset(data.train, data.plan, i));
  const Vector lambda = lambda_weights(data.plan);

  const bool zoned = cfg.defense == DefenseKind::fedzz;
  const int krum_f = effective_krum_f(cfg);
  const int trim_k = effective_trim_k(cfg);

  ServerState state;
  state.global_params = init_model(spec, mix_seed(cfg.seed, kSaltInit));
  state.queue = InterestingInputs(cfg.queue_capacity);
  if (zoned)
    state.zone_set = random_zone_set(n, cfg.zones_m, mix_seed(cfg.seed, kSaltZones));

  // bootstrap: the first round trains everyone from the same fresh model
  std::vector<Vector> incoming(n, state.global_params);
  std::deque<StoredRound> window;

  std::vector<RoundReport> reports;
  reports.reserve(cfg.global_epochs);

  for (int epoch = 1; epoch <= cfg.global_epochs; ++epoch) {
    std::vector<ClientRoundResult> results(n);
    run_all_clients(cfg, spec, shards, incoming, epoch, results);

    const Vector prev = state.global_params;
    RoundReport report;
    report.epoch = epoch;
    report.calibrated = zoned && epoch % cfg.xi == 0;
    Vector new_global =
        dispatch_defense(cfg, results, lambda, prev, epoch, krum_f, trim_k,
                         report.dropped_ids);
    if (!new_global.allFinite())
      throw std::runtime_error("run_experiment: non-finite global model at epoch " +
                               std::to_string(epoch));

    state.stored_updates = results;
    state.global_params = std::move(new_global);
    state.epoch = epoch;

    report.gta = accuracy(state.global_params, spec, data.test);
    report.train_loss = loss_and_grad(state.global_params, spec, data.train).loss;
    report.df_flags.resize(n);
    for (int i = 0; i < n; ++i) report.df_flags[i] = results[i].discard;

    if (observer) {
      RoundContext ctx{results, zoned ? &state.zone_set : nullptr, prev,
                       state.global_params, report};
      observer(ctx);
    }

    if (zoned) {
      window.push_back(StoredRound{results, prev});
      while (static_cast<int>(window.size()) > cfg.fitness_window) window.pop_front();

      if (report.calibrated) {
        auto fitness = [&](const ZoneSet& candidate) {
          double total = 0.0;
          for (const auto& round : window)
            total += mimic_server(candidate, round.results, spec, cfg.alpha, data.test,
                                  round.prev_global);
          return total / static_cast<double>(window.size());
        };
        CalibratorConfig cal;
        cal.tau = cfg.tau;
        cal.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), kSaltCalibrate);
        state.zone_set = calibrate(state.queue, state.zone_set, report.gta, fitness, cal);
      }

      std::vector<Vector> az = zone_aggregate(results, state.zone_set);
      for (int i = 0; i < n; ++i) incoming[i] = az[discriminator_of(i, state.zone_set)];
    } else {
      for (int i = 0; i < n; ++i) incoming[i] = state.global_params;
    }

    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace fedzz
