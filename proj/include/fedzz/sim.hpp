#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <fedzz/attacks.hpp>
#include <fedzz/data.hpp>
#include <fedzz/dataset.hpp>
#include <fedzz/nn.hpp>
#include <fedzz/types.hpp>
#include <fedzz/zones.hpp>

namespace fedzz {

enum class DefenseKind {
  fedzz,            // zone-based discard flags + calibrated zone search
  fedavg,           // weighted average, no defense
  fl100,            // oracle: drops exactly the known malicious clients
  random_sampling,  // fresh uniform client sample every round
  n_way,            // leave-one-out cosine screen
  krum,             // single closest-to-peers update
  trimmed_mean,     // coordinate-wise trimmed mean
  median            // coordinate-wise median
};

std::string to_string(DefenseKind kind);

enum class DatasetKind { synthetic, idx };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::synthetic;
  // synthetic mixture
  int num_classes = 10;
  int dim = 20;
  int n_samples = 5000;
  double class_sep = 3.0;
  // idx pair on disk; class count is read from the labels
  std::string images_path;
  std::string labels_path;
  int max_samples = 0;  // <= 0 loads everything
  double test_fraction = 0.2;
};

struct ExperimentConfig {
  int n_clients = 40;
  int zones_m = 5;
  int global_epochs = 60;
  int local_epochs = 5;
  double eta = 0.01;
  int batch_size = 64;
  double alpha = 0.97;  // discard threshold; cosim below it flags the update
  int xi = 5;           // calibrate the zones every xi epochs
  int tau = 50;         // calibrator mutation budget per invocation
  DefenseKind defense = DefenseKind::fedzz;
  AttackConfig attack;
  double beta = 1.0;  // Dirichlet concentration of the client split
  std::uint64_t seed = 42;
  DatasetConfig dataset;
  double rs_fraction = 0.5;  // random-sampling keep fraction
  int krum_f = -1;           // < 0 derives from the attack, else floor(n/4)
  int trim_k = -1;           // < 0 derives the same way
  std::vector<int> hidden_dims = {32};
  int queue_capacity = 32;  // interesting-inputs pool size
  int fitness_window = 1;   // rounds of stored updates averaged by the fitness
  int parallel_clients = 1; // worker threads for client rounds
};

void validate(const ExperimentConfig& cfg);

// What one client hands back each epoch.
struct ClientRoundResult {
  Vector update;         // full parameter vector after local training
  bool discard = false;  // set when cosim fell below the threshold
  int client_id = 0;
  std::int64_t data_size = 0;
  double cosim = 1.0;  // cosine between the update and the incoming model
};

struct RoundReport {
  int epoch = 0;      // 1-based
  double gta = 0.0;   // accuracy of the new global model on the test set, percent
  double train_loss = 0.0;
  std::vector<bool> df_flags;    // client-side discard flags, indexed by client id
  std::vector<int> dropped_ids;  // clients excluded from this epoch's aggregate
  bool calibrated = false;
};

// Everything the server keeps between rounds.
struct ServerState {
  Vector global_params;
  ZoneSet zone_set;  // empty unless the defense is fedzz
  std::vector<ClientRoundResult> stored_updates;
  int epoch = 0;
  InterestingInputs queue{32};
};

// Local training plus the self-check against the incoming model: the client
// poisons its shard if malicious, trains from `incoming`, and flags its own
// update when the cosine similarity to `incoming` drops below alpha. An
// empty shard or zero local epochs returns `incoming` unchanged with
// cosim exactly 1, so a threshold of 1 never discards an untrained client.
ClientRoundResult client_round(const LabeledDataset& client_data, const Vector& incoming,
                               const ModelSpec& spec, double alpha, double eta,
                               int batch_size, int local_epochs,
                               const AttackConfig& attack, int client_id, int round,
                               std::uint64_t seed);

// Data-size-weighted average of the non-discarded updates, weights
// renormalized over the survivors so they stay a convex combination.
// Falls back to `prev_global` when every update is discarded (or the
// survivors hold no data).
Vector aggregate_global(const std::vector<ClientRoundResult>& results,
                        const Vector& prev_global);

// Per-zone data-size-weighted averages, discard flags ignored. Members are
// summed in ascending client id; a zone with no data averages its members
// equally.
std::vector<Vector> zone_aggregate(const std::vector<ClientRoundResult>& results,
                                   const ZoneSet& z);

// Replays one stored round under a candidate zone set: recomputes the zone
// aggregates, re-derives every discard flag server-side against the
// candidate's discriminator zones, aggregates the survivors, and scores the
// result on the test set. Pure; this is the calibrator's fitness.
double mimic_server(const ZoneSet& z_candidate,
                    const std::vector<ClientRoundResult>& stored, const ModelSpec& spec,
                    double alpha, const LabeledDataset& test, const Vector& prev_global);

// Dataset, split, client partition, and model shape for a config.
struct ExperimentData {
  LabeledDataset train;
  LabeledDataset test;
  PartitionPlan plan;
  ModelSpec model;
};

ExperimentData prepare_data(const ExperimentConfig& cfg);

// Snapshot handed to the observer after each epoch, before the calibrator
// may replace the zone set. References die with the callback.
struct RoundContext {
  const std::vector<ClientRoundResult>& results;
  const ZoneSet* zone_set;  // set the round ran under; null for non-fedzz
  const Vector& prev_global;
  const Vector& new_global;
  const RoundReport& report;
};

using RoundObserver = std::function<void(const RoundContext&)>;

// The full federated loop: every epoch all clients train on what the server
// sent them, the configured defense aggregates, and (for fedzz) the zones
// are recalibrated every xi epochs before the next round's zone aggregates
// go out. Epoch 1 bootstraps every client with the same fresh global model.
// Bit-exactly reproducible for a fixed config, regardless of
// parallel_clients.
std::vector<RoundReport> run_experiment(const ExperimentConfig& cfg,
                                        const RoundObserver& observer = {});

}  // namespace fedzz
