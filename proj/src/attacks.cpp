#include <fedzz/attacks.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fedzz/rng.hpp>

namespace fedzz {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::msimba: return "msimba";
    case AttackKind::dpa_slf: return "dpa_slf";
    case AttackKind::dpa_dlf: return "dpa_dlf";
  }
  throw std::invalid_argument("to_string: unknown attack kind");
}

void validate(const AttackConfig& cfg) {
  if (cfg.poison_rate < 0.0 || cfg.poison_rate > 1.0)
    throw std::invalid_argument("attack config: poison_rate must be in [0, 1]");
  if (cfg.kind == AttackKind::msimba && !(cfg.epsilon > 0.0))
    throw std::invalid_argument("attack config: epsilon must be positive");
  if (cfg.max_queries < 0)
    throw std::invalid_argument("attack config: max_queries must be >= 0");
  if (!(cfg.clamp_lo <= cfg.clamp_hi))
    throw std::invalid_argument("attack config: empty clamp range");
  for (int id : cfg.malicious_clients)
    if (id < 0) throw std::invalid_argument("attack config: negative client id");
}

bool is_malicious(const AttackConfig& cfg, int client_id) {
  return std::find(cfg.malicious_clients.begin(), cfg.malicious_clients.end(),
                   client_id) != cfg.malicious_clients.end();
}

int static_label_flip(int label, int num_classes) {
  if (num_classes < 2) throw std::invalid_argument("static_label_flip: need >= 2 classes");
  if (label < 0 || label >= num_classes)
    throw std::invalid_argument("static_label_flip: label out of range");
  if (num_classes % 2 == 0) return num_classes - 1 - label;
  return (num_classes - label) % num_classes;
}

int dynamic_label_flip(const Vector& x, const Vector& surrogate_params,
                       const ModelSpec& spec) {
  Vector p = forward(surrogate_params, spec, x);
  int worst = 0;
  for (int c = 1; c < spec.num_classes; ++c)
    if (p(c) < p(worst)) worst = c;
  return worst;
}

Vector train_surrogate(const LabeledDataset& benign_data, const ModelSpec& spec,
                       std::uint64_t seed) {
  if (benign_data.size() == 0)
    throw std::invalid_argument("train_surrogate: empty training data");
  Vector w0 = init_model(spec, mix_seed(seed, 0xfeed));
  return sgd_train(std::move(w0), spec, benign_data, 0.01, 64, 30, mix_seed(seed, 0x5eed));
}

Vector msimba_poison(const Vector& x, int true_label,
                     const std::function<Vector(const Vector&)>& predict, double epsilon,
                     int max_queries, std::uint64_t seed, double clamp_lo,
                     double clamp_hi) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("msimba_poison: epsilon must be > 0");
  if (max_queries < 0) throw std::invalid_argument("msimba_poison: max_queries must be >= 0");

  Vector p0 = predict(x);
  if (true_label < 0 || true_label >= p0.size())
    throw std::invalid_argument("msimba_poison: label out of range");

  // most-confused class: best scoring wrong class, ties to the lowest index
  int target = true_label == 0 ? 1 : 0;
  for (int c = 0; c < p0.size(); ++c)
    if (c != true_label && p0(c) > p0(target)) target = c;

  Vector current = x;
  double best = p0(target);
  Rng rng(seed);
  for (int q = 0; q < max_queries; ++q) {
    Eigen::Index coord = static_cast<Eigen::Index>(rng.bounded(x.size()));
    double step = rng.coin() ? epsilon : -epsilon;
    Vector cand = current;
    cand(coord) = std::clamp(cand(coord) + step, clamp_lo, clamp_hi);
    double p = predict(cand)(target);
    if (p > best) {
      current = std::move(cand);
      best = p;
    }
  }
  return current;
}

LabeledDataset apply_attack(const LabeledDataset& client_data, const AttackConfig& cfg,
                            const Vector& local_params, const ModelSpec& spec,
                            int client_id, int round, std::uint64_t seed, int batch_size) {
  validate(cfg);
  check_consistent(client_data);
  if (batch_size < 1) throw std::invalid_argument("apply_attack: batch_size must be >= 1");

  LabeledDataset out = client_data;
  if (cfg.kind == AttackKind::none || !is_malicious(cfg, client_id) ||
      client_data.size() == 0)
    return out;

  switch (cfg.kind) {
    case AttackKind::dpa_slf:
      for (Eigen::Index i = 0; i < out.size(); ++i)
        out.labels(i) = static_label_flip(out.labels(i), spec.num_classes);
      break;

    case AttackKind::dpa_dlf: {
      Vector surrogate =
          train_surrogate(client_data, spec, mix_seed(seed, 0xd1f, round));
      for (Eigen::Index i = 0; i < out.size(); ++i)
        out.labels(i) =
            dynamic_label_flip(Vector(out.features.row(i).transpose()), surrogate, spec);
      break;
    }

    case AttackKind::msimba: {
      auto predict = [&](const Vector& v) { return forward(local_params, spec, v); };
      Rng pick_rng(mix_seed(seed, 0x51b, round));
      const Eigen::Index n = out.size();
      for (Eigen::Index start = 0; start < n; start += batch_size) {
        const Eigen::Index len = std::min<Eigen::Index>(batch_size, n - start);
        const int k = static_cast<int>(std::ceil(cfg.poison_rate * double(len)));
        // draw k distinct offsets within this chunk
        std::vector<Eigen::Index> offsets(len);
        for (Eigen::Index i = 0; i < len; ++i) offsets[i] = start + i;
        pick_rng.shuffle(offsets);
        for (int t = 0; t < k; ++t) {
          Eigen::Index i = offsets[t];
          Vector poisoned = msimba_poison(
              Vector(out.features.row(i).transpose()), out.labels(i), predict,
              cfg.epsilon, cfg.max_queries, mix_seed(seed, 0xa77ac4, round, i),
              cfg.clamp_lo, cfg.clamp_hi);
          out.features.row(i) = poisoned.transpose();
        }
      }
      break;
    }

    case AttackKind::none:
      break;
  }
  return out;
}

}  // namespace fedzz
