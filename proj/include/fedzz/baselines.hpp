#pragma once

#include <cstdint>
#include <vector>

#include <fedzz/types.hpp>

namespace fedzz {

// Weighted parameter average; weights must already sum to 1.
Vector fedavg_aggregate(const std::vector<Vector>& updates, const Vector& weights);

// Oracle defense: drops every known-malicious update and renormalizes the
// weights over the rest. Falls back to the previous model when nothing
// benign is left.
Vector fl100_aggregate(const std::vector<Vector>& updates, const Vector& weights,
                       const std::vector<int>& malicious_ids, const Vector& prev_global);

struct SampledAggregate {
  Vector params;
  std::vector<int> selected;  // ascending client ids
};

// Uniformly samples ceil(fraction * n) distinct clients and averages them
// with renormalized weights.
SampledAggregate random_sampling_aggregate(const std::vector<Vector>& updates,
                                           const Vector& weights, double fraction,
                                           std::uint64_t seed);

struct ScreenedAggregate {
  Vector params;
  std::vector<int> dropped;  // ascending client ids
};

// n-way screen: client x survives when its update stays cosine-similar
// (>= alpha) to the leave-one-out aggregate of everyone else. Survivors are
// averaged with renormalized weights; an empty survivor set falls back to
// the previous model.
ScreenedAggregate n_way_aggregate(const std::vector<Vector>& updates,
                                  const Vector& weights, double alpha,
                                  const Vector& prev_global);

// Index of the update with the smallest sum of squared distances to its
// n-f-2 nearest peers (ties to the lowest index). Requires n >= f + 3.
int krum_select(const std::vector<Vector>& updates, int f);

// Coordinate-wise mean after dropping the k largest and k smallest values.
// k = 0 reduces to the plain equal-weight mean, bit for bit.
Vector trimmed_mean_aggregate(const std::vector<Vector>& updates, int k);

// Coordinate-wise median; an even client count averages the two middle values.
Vector median_aggregate(const std::vector<Vector>& updates);

}  // namespace fedzz
