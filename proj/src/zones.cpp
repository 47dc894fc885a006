#include <fedzz/zones.hpp>

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace fedzz {

ZoneSet canonical(const ZoneSet& z) {
  ZoneSet out = z;
  for (auto& zone : out.zones) std::sort(zone.begin(), zone.end());
  return out;
}

bool same_zone_set(const ZoneSet& a, const ZoneSet& b) {
  return canonical(a).zones == canonical(b).zones;
}

std::optional<std::string> validate(const ZoneSet& z) {
  if (z.zones.size() < 2) return "zone set needs at least 2 zones";
  const std::size_t size0 = z.zones[0].size();
  if (size0 == 0) return "zone 0 is empty";
  for (std::size_t j = 1; j < z.zones.size(); ++j)
    if (z.zones[j].size() != size0)
      return "zone " + std::to_string(j) + " has " + std::to_string(z.zones[j].size()) +
             " clients, expected " + std::to_string(size0);

  const int n = static_cast<int>(z.zones.size() * size0);
  std::vector<char> seen(n, 0);
  for (const auto& zone : z.zones) {
    for (int c : zone) {
      if (c < 0 || c >= n)
        return "client " + std::to_string(c) + " out of range for " + std::to_string(n) +
               " clients";
      if (seen[c]) return "client " + std::to_string(c) + " appears in more than one zone";
      seen[c] = 1;
    }
  }
  // equal sizes + no duplicates + ids in [0, n) imply full coverage
  return std::nullopt;
}

ZoneSet random_zone_set(int n_clients, int m, std::uint64_t seed) {
  if (m < 2) throw std::invalid_argument("random_zone_set: need at least 2 zones");
  if (n_clients < m || n_clients % m != 0)
    throw std::invalid_argument("random_zone_set: zone count must divide client count");
  std::vector<int> ids(n_clients);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  rng.shuffle(ids);

  const int size = n_clients / m;
  ZoneSet z;
  z.zones.resize(m);
  for (int j = 0; j < m; ++j)
    z.zones[j].assign(ids.begin() + j * size, ids.begin() + (j + 1) * size);
  return z;
}

int zone_of(const ZoneSet& z, int client) {
  for (std::size_t j = 0; j < z.zones.size(); ++j)
    for (int c : z.zones[j])
      if (c == client) return static_cast<int>(j);
  throw std::invalid_argument("zone_of: client " + std::to_string(client) +
                              " not in any zone");
}

int discriminator_of(int client, const ZoneSet& z) {
  return (zone_of(z, client) + 1) % z.n_zones();
}

boost::multiprecision::cpp_int count_zone_maps(int n_clients, int m) {
  if (n_clients < 1 || m < 1)
    throw std::invalid_argument("count_zone_maps: counts must be positive");
  if (n_clients % m != 0)
    throw std::invalid_argument("count_zone_maps: zone count must divide client count");
  const int size = n_clients / m;
  // product over zones of C(j*size, size); each inner step keeps an integer
  // (running partial binomials), so the divisions are exact
  boost::multiprecision::cpp_int result = 1;
  for (int j = 1; j <= m; ++j) {
    for (int i = 1; i <= size; ++i) {
      result *= (j - 1) * size + i;
      result /= i;
    }
  }
  return result;
}

InterestingInputs::InterestingInputs(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("interesting inputs: capacity must be >= 1");
}

void InterestingInputs::insert(const ZoneSet& z, double gta) {
  ZoneSet c = canonical(z);
  if (!entries_.empty()) {
    const ZoneSet& head = entries_.front().zones;
    if (head.n_zones() != c.n_zones() || head.n_clients() != c.n_clients())
      throw std::logic_error("interesting inputs: mixed zone set shapes");
  }
  for (auto& e : entries_) {
    if (e.zones.zones == c.zones) {
      if (gta > e.gta) {
        e.gta = gta;
        std::stable_sort(entries_.begin(), entries_.end(),
                         [](const Entry& a, const Entry& b) { return a.gta > b.gta; });
      }
      return;
    }
  }
  auto pos = std::find_if(entries_.begin(), entries_.end(),
                          [gta](const Entry& e) { return e.gta < gta; });
  entries_.insert(pos, Entry{std::move(c), gta});
  if (static_cast<int>(entries_.size()) > capacity_) entries_.pop_back();
}

ZoneSet swap_mutation(const ZoneSet& z, Rng& rng) {
  const int m = z.n_zones();
  if (m < 2) throw std::invalid_argument("swap_mutation: need at least 2 zones");
  ZoneSet out = z;
  int j1 = static_cast<int>(rng.bounded(m));
  int j2 = static_cast<int>(rng.bounded(m - 1));
  if (j2 >= j1) ++j2;
  int p1 = static_cast<int>(rng.bounded(out.zones[j1].size()));
  int p2 = static_cast<int>(rng.bounded(out.zones[j2].size()));
  std::swap(out.zones[j1][p1], out.zones[j2][p2]);
  return out;
}

ZoneSet k_swap_mutation(const ZoneSet& z, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("k_swap_mutation: k must be >= 1");
  ZoneSet out = z;
  for (int i = 0; i < k; ++i) out = swap_mutation(out, rng);
  return out;
}

ZoneSet crossover(const ZoneSet& a, const ZoneSet& b, Rng& rng) {
  const int m = a.n_zones();
  if (m < 2 || b.n_zones() != m || a.n_clients() != b.n_clients())
    throw std::invalid_argument("crossover: parents must share shape");
  const int n = a.n_clients();

  int cut = 1 + static_cast<int>(rng.bounded(m - 1));  // at least one zone from each parent
  ZoneSet child;
  child.zones.assign(a.zones.begin(), a.zones.begin() + cut);
  child.zones.insert(child.zones.end(), b.zones.begin() + cut, b.zones.end());

  // Mixing parents can duplicate clients and orphan others; overwrite the
  // repeats with the missing ids in ascending order.
  std::vector<char> seen(n, 0);
  std::vector<int*> duplicate_slots;
  for (auto& zone : child.zones) {
    for (int& c : zone) {
      if (seen[c])
        duplicate_slots.push_back(&c);
      else
        seen[c] = 1;
    }
  }
  std::size_t fill = 0;
  for (int c = 0; c < n && fill < duplicate_slots.size(); ++c) {
    if (!seen[c]) {
      *duplicate_slots[fill++] = c;
      seen[c] = 1;
    }
  }
  return child;
}

ZoneSet mutate(const InterestingInputs& queue, Rng& rng, const MutationWeights& weights) {
  if (queue.empty()) throw std::invalid_argument("mutate: empty input pool");
  const auto& entries = queue.entries();
  const int L = static_cast<int>(entries.size());

  // rank 1 of L weighs L, rank L weighs 1
  std::vector<double> rank_w(L);
  for (int r = 0; r < L; ++r) rank_w[r] = static_cast<double>(L - r);
  const ZoneSet& base = entries[rng.categorical(rank_w)].zones;

  std::vector<double> op_w = {weights.swap, weights.k_swap, weights.crossover};
  if (L < 2) op_w[2] = 0.0;
  switch (rng.categorical(op_w)) {
    case 0:
      return swap_mutation(base, rng);
    case 1:
      return k_swap_mutation(base, 2 + static_cast<int>(rng.bounded(3)), rng);
    default: {
      const ZoneSet& other = entries[rng.categorical(rank_w)].zones;
      return crossover(base, other, rng);
    }
  }
}

ZoneSet calibrate(InterestingInputs& queue, const ZoneSet& current, double current_gta,
                  const std::function<double(const ZoneSet&)>& fitness,
                  const CalibratorConfig& cfg) {
  if (auto violation = validate(current))
    throw std::invalid_argument("calibrate: invalid zone set: " + *violation);
  if (cfg.tau < 0) throw std::invalid_argument("calibrate: tau must be >= 0");

  queue.insert(current, current_gta);
  ZoneSet best = canonical(current);
  double best_gta = current_gta;

  Rng rng(cfg.seed);
  for (int t = 0; t < cfg.tau; ++t) {
    ZoneSet cand = mutate(queue, rng, cfg.weights);
    double gta = fitness(cand);
    queue.insert(cand, gta);
    if (gta > best_gta) {
      best = canonical(cand);
      best_gta = gta;
    }
  }
  return best;
}

}  // namespace fedzz
