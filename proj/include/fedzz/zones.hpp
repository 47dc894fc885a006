#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include <fedzz/rng.hpp>

namespace fedzz {

// Disjoint equal-size client zones. Zone order is meaningful: the
// discriminator map sends zone j's clients to zone (j+1) mod m, so two sets
// with the same zones in different order are different zone sets. Member
// order inside a zone is not meaningful.
struct ZoneSet {
  std::vector<std::vector<int>> zones;

  int n_zones() const { return static_cast<int>(zones.size()); }
  int n_clients() const {
    int n = 0;
    for (const auto& z : zones) n += static_cast<int>(z.size());
    return n;
  }
};

// Members sorted within each zone; zone order untouched. Canonical forms are
// what the interesting-inputs queue deduplicates on.
ZoneSet canonical(const ZoneSet& z);

bool same_zone_set(const ZoneSet& a, const ZoneSet& b);

// nullopt when the set is a proper partition into equal-size zones;
// otherwise a description of the first violation found.
std::optional<std::string> validate(const ZoneSet& z);

ZoneSet random_zone_set(int n_clients, int m, std::uint64_t seed);

int zone_of(const ZoneSet& z, int client);

// Index of the zone whose aggregate client `client` checks its update
// against: the zone after its own, cyclically. Never the client's own zone
// when there are at least two zones.
int discriminator_of(int client, const ZoneSet& z);

// Exact number of distinct zone sets: n! / ((n/m)!)^m.
boost::multiprecision::cpp_int count_zone_maps(int n_clients, int m);

// Bounded pool of the best-scoring zone sets seen so far, sorted by score
// descending. Ties keep insertion order; duplicates (by canonical form) are
// merged keeping the higher score.
class InterestingInputs {
 public:
  struct Entry {
    ZoneSet zones;
    double gta;
  };

  explicit InterestingInputs(int capacity = 32);

  void insert(const ZoneSet& z, double gta);

  const std::vector<Entry>& entries() const { return entries_; }
  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }

 private:
  int capacity_;
  std::vector<Entry> entries_;
};

// Exchange one client between two distinct zones.
ZoneSet swap_mutation(const ZoneSet& z, Rng& rng);

// k independent cross-zone swaps.
ZoneSet k_swap_mutation(const ZoneSet& z, int k, Rng& rng);

// Zone-level one-point crossover: the child takes a's leading zones and b's
// trailing zones, then repairs duplicate clients by substituting the missing
// ones in ascending id order.
ZoneSet crossover(const ZoneSet& a, const ZoneSet& b, Rng& rng);

struct MutationWeights {
  double swap = 5.0;
  double k_swap = 3.0;
  double crossover = 2.0;
};

// Draws a parent rank-proportionally (best of L entries gets weight L, worst
// gets 1) and applies one weighted-random operator. Single-entry pools fall
// back to swap variants since crossover needs two parents.
ZoneSet mutate(const InterestingInputs& queue, Rng& rng,
               const MutationWeights& weights = {});

struct CalibratorConfig {
  int tau = 50;  // mutation/evaluation iterations per calibration
  MutationWeights weights;
  std::uint64_t seed = 0;
};

// One calibration pass: seeds the pool with the current zone set, then for
// tau rounds mutates, scores, and pools candidates. Returns the best-scoring
// zone set seen, the input included; the incumbent only ever loses to a
// strictly better candidate.
ZoneSet calibrate(InterestingInputs& queue, const ZoneSet& current, double current_gta,
                  const std::function<double(const ZoneSet&)>& fitness,
                  const CalibratorConfig& cfg);

}  // namespace fedzz
