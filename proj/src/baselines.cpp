#include <fedzz/baselines.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fedzz/nn.hpp>
#include <fedzz/rng.hpp>

namespace fedzz {

namespace {

void check_updates(const std::vector<Vector>& updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  for (const auto& u : updates)
    if (u.size() != updates[0].size())
      throw std::invalid_argument("aggregate: update dimension mismatch");
}

// Weighted sum over the clients where include[i] != 0, weights renormalized
// over that subset. Empty subset or zero total weight yields no value.
bool renormalized_sum(const std::vector<Vector>& updates, const Vector& weights,
                      const std::vector<char>& include, Vector& out) {
  double total = 0.0;
  for (std::size_t i = 0; i < updates.size(); ++i)
    if (include[i]) total += weights(static_cast<Eigen::Index>(i));
  if (total <= 0.0) return false;
  out = Vector::Zero(updates[0].size());
  for (std::size_t i = 0; i < updates.size(); ++i)
    if (include[i]) out += (weights(static_cast<Eigen::Index>(i)) / total) * updates[i];
  return true;
}

}  // namespace

Vector fedavg_aggregate(const std::vector<Vector>& updates, const Vector& weights) {
  check_updates(updates);
  if (weights.size() != static_cast<Eigen::Index>(updates.size()))
    throw std::invalid_argument("fedavg: weight count does not match update count");
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (weights(i) < 0.0) throw std::invalid_argument("fedavg: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("fedavg: weights must sum to 1");

  Vector out = Vector::Zero(updates[0].size());
  for (std::size_t i = 0; i < updates.size(); ++i)
    out += weights(static_cast<Eigen::Index>(i)) * updates[i];
  return out;
}

Vector fl100_aggregate(const std::vector<Vector>& updates, const Vector& weights,
                       const std::vector<int>& malicious_ids, const Vector& prev_global) {
  check_updates(updates);
  if (weights.size() != static_cast<Eigen::Index>(updates.size()))
    throw std::invalid_argument("fl100: weight count does not match update count");

  std::vector<char> include(updates.size(), 1);
  for (int id : malicious_ids)
    if (id >= 0 && id < static_cast<int>(updates.size())) include[id] = 0;

  Vector out;
  if (!renormalized_sum(updates, weights, include, out)) return prev_global;
  return out;
}

SampledAggregate random_sampling_aggregate(const std::vector<Vector>& updates,
                                           const Vector& weights, double fraction,
                                           std::uint64_t seed) {
  check_updates(updates);
  if (weights.size() != static_cast<Eigen::Index>(updates.size()))
    throw std::invalid_argument("random sampling: weight count mismatch");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("random sampling: fraction must be in (0, 1]");

  const int n = static_cast<int>(updates.size());
  const int k = static_cast<int>(std::ceil(fraction * n));
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  rng.shuffle(ids);
  ids.resize(k);
  std::sort(ids.begin(), ids.end());

  std::vector<char> include(n, 0);
  for (int id : ids) include[id] = 1;

  SampledAggregate out;
  out.selected = ids;
  if (!renormalized_sum(updates, weights, include, out.params)) {
    // sampled clients all carry zero weight; average them evenly instead
    out.params = Vector::Zero(updates[0].size());
    for (int id : ids) out.params += updates[id] / static_cast<double>(k);
  }
  return out;
}

ScreenedAggregate n_way_aggregate(const std::vector<Vector>& updates, const Vector& weights,
                                  double alpha, const Vector& prev_global) {
  check_updates(updates);
  if (updates.size() < 2) throw std::invalid_argument("n-way: need at least 2 updates");
  if (weights.size() != static_cast<Eigen::Index>(updates.size()))
    throw std::invalid_argument("n-way: weight count mismatch");

  const std::size_t n = updates.size();
  std::vector<char> survive(n, 1);
  for (std::size_t x = 0; x < n; ++x) {
    std::vector<char> others(n, 1);
    others[x] = 0;
    Vector rest;
    if (!renormalized_sum(updates, weights, others, rest)) continue;  // keep x
    if (cosine_similarity(updates[x], rest) < alpha) survive[x] = 0;
  }

  ScreenedAggregate out;
  for (std::size_t x = 0; x < n; ++x)
    if (!survive[x]) out.dropped.push_back(static_cast<int>(x));
  if (!renormalized_sum(updates, weights, survive, out.params)) out.params = prev_global;
  return out;
}

int krum_select(const std::vector<Vector>& updates, int f) {
  check_updates(updates);
  if (f < 0) throw std::invalid_argument("krum: f must be >= 0");
  const int n = static_cast<int>(updates.size());
  if (n < f + 3) throw std::invalid_argument("krum: need at least f + 3 updates");

  int best = -1;
  double best_score = 0.0;
  std::vector<double> dists(n - 1);
  for (int i = 0; i < n; ++i) {
    int idx = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dists[idx++] = (updates[i] - updates[j]).squaredNorm();
    }
    std::sort(dists.begin(), dists.end());
    double score = std::accumulate(dists.begin(), dists.begin() + (n - f - 2), 0.0);
    if (best < 0 || score < best_score) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

Vector trimmed_mean_aggregate(const std::vector<Vector>& updates, int k) {
  check_updates(updates);
  if (k < 0) throw std::invalid_argument("trimmed mean: k must be >= 0");
  const int n = static_cast<int>(updates.size());
  if (2 * k >= n) throw std::invalid_argument("trimmed mean: need 2k < n");

  if (k == 0)
    return fedavg_aggregate(updates,
                            Vector::Constant(n, 1.0 / static_cast<double>(n)));

  Vector out(updates[0].size());
  std::vector<double> col(n);
  for (Eigen::Index c = 0; c < out.size(); ++c) {
    for (int i = 0; i < n; ++i) col[i] = updates[i](c);
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (int i = k; i < n - k; ++i) s += col[i];
    out(c) = s / static_cast<double>(n - 2 * k);
  }
  return out;
}

Vector median_aggregate(const std::vector<Vector>& updates) {
  check_updates(updates);
  const int n = static_cast<int>(updates.size());
  Vector out(updates[0].size());
  std::vector<double> col(n);
  for (Eigen::Index c = 0; c < out.size(); ++c) {
    for (int i = 0; i < n; ++i) col[i] = updates[i](c);
    std::sort(col.begin(), col.end());
    out(c) = (n % 2 == 1) ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return out;
}

}  // namespace fedzz
