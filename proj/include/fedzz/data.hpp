#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <fedzz/dataset.hpp>

namespace fedzz {

// Gaussian mixture: one unit-covariance blob per class, class means drawn
// uniformly on the sphere of radius class_sep. Labels cycle 0..C-1 so the
// class counts differ by at most one.
LabeledDataset generate_synthetic(int num_classes, int dim, int n_samples,
                                  double class_sep, std::uint64_t seed);

// IDX image/label pair (big-endian headers, one byte per pixel/label).
// Pixels are scaled to [0, 1]. max_samples <= 0 loads everything.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        int max_samples);

// Test size rounds test_fraction * n to the nearest integer. Both halves keep
// the shuffled order.
std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& data,
                                                           double test_fraction,
                                                           std::uint64_t seed);

// Sample-index ownership per client; fixes the aggregation weights for a run.
struct PartitionPlan {
  std::vector<std::vector<int>> client_indices;

  int n_clients() const { return static_cast<int>(client_indices.size()); }
};

// Non-IID split: for every class, client proportions ~ Dirichlet(beta * 1)
// and that class's samples are assigned multinomially. Every sample lands on
// exactly one client; small beta concentrates classes on few clients.
PartitionPlan dirichlet_partition(const LabeledDataset& data, int n_clients, double beta,
                                  std::uint64_t seed);

LabeledDataset client_dataset(const LabeledDataset& data, const PartitionPlan& plan,
                              int client);

// Aggregation weights proportional to per-client sample counts, normalized to
// sum 1. Zero-sample clients get weight 0.
Vector lambda_weights(const PartitionPlan& plan);

constexpr double poison_rate_default() { return 0.015; }

}  // namespace fedzz
