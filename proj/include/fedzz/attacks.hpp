#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <fedzz/dataset.hpp>
#include <fedzz/nn.hpp>

namespace fedzz {

enum class AttackKind { none, msimba, dpa_slf, dpa_dlf };

std::string to_string(AttackKind kind);

struct AttackConfig {
  AttackKind kind = AttackKind::none;
  std::vector<int> malicious_clients;
  double poison_rate = 0.015;  // fraction of each batch perturbed (msimba)
  double epsilon = 0.5;        // per-coordinate step size (msimba)
  int max_queries = 200;       // prediction queries per poisoned sample (msimba)
  // feature clamp range; image data uses [0, 1], synthetic data is unbounded
  double clamp_lo = -std::numeric_limits<double>::infinity();
  double clamp_hi = std::numeric_limits<double>::infinity();
};

void validate(const AttackConfig& cfg);

bool is_malicious(const AttackConfig& cfg, int client_id);

// Static label flip: even C pairs y with C-1-y (never a fixed point); odd C
// uses (C-y) mod C, which fixes label 0 but stays an involution.
int static_label_flip(int label, int num_classes);

// Least-probable class under the surrogate, ties to the lowest index.
int dynamic_label_flip(const Vector& x, const Vector& surrogate_params,
                       const ModelSpec& spec);

// Stand-in for the adversary's imitation of a normally trained model:
// plain SGD on the client's clean data.
Vector train_surrogate(const LabeledDataset& benign_data, const ModelSpec& spec,
                       std::uint64_t seed);

// Query-based feature perturbation: pushes the sample toward the class the
// model most confuses it with (the runner-up under `predict`). Each query
// proposes one +/- epsilon coordinate step, kept only when the target class
// probability strictly increases. The label is left alone.
Vector msimba_poison(const Vector& x, int true_label,
                     const std::function<Vector(const Vector&)>& predict, double epsilon,
                     int max_queries, std::uint64_t seed,
                     double clamp_lo = -std::numeric_limits<double>::infinity(),
                     double clamp_hi = std::numeric_limits<double>::infinity());

// Per-round poisoning of one client's shard. Benign clients (and kind none)
// get their data back untouched. Label-flip attacks rewrite every label;
// msimba perturbs ceil(poison_rate * batch) features per batch-size chunk.
// Deterministic in (round, seed).
LabeledDataset apply_attack(const LabeledDataset& client_data, const AttackConfig& cfg,
                            const Vector& local_params, const ModelSpec& spec,
                            int client_id, int round, std::uint64_t seed, int batch_size);

}  // namespace fedzz
