#include <fedzz/data.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <fedzz/rng.hpp>

namespace fedzz {

namespace {

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4))
    throw std::runtime_error("idx: truncated header in " + path);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::uintmax_t stream_size(std::ifstream& in) {
  auto pos = in.tellg();
  in.seekg(0, std::ios::end);
  auto end = in.tellg();
  in.seekg(pos);
  return static_cast<std::uintmax_t>(end);
}

}  // namespace

LabeledDataset generate_synthetic(int num_classes, int dim, int n_samples,
                                  double class_sep, std::uint64_t seed) {
  if (num_classes < 2) throw std::invalid_argument("generate_synthetic: num_classes < 2");
  if (dim < 1) throw std::invalid_argument("generate_synthetic: dim < 1");
  if (n_samples < 1) throw std::invalid_argument("generate_synthetic: n_samples < 1");
  if (class_sep < 0.0) throw std::invalid_argument("generate_synthetic: class_sep < 0");

  Rng rng(seed);
  Matrix means(num_classes, dim);
  for (int c = 0; c < num_classes; ++c) {
    Vector dir(dim);
    double norm;
    do {
      for (int j = 0; j < dim; ++j) dir(j) = rng.normal();
      norm = dir.norm();
    } while (norm < 1e-12);
    means.row(c) = (class_sep / norm) * dir.transpose();
  }

  LabeledDataset out;
  out.features.resize(n_samples, dim);
  out.labels.resize(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    int y = i % num_classes;
    out.labels(i) = y;
    for (int j = 0; j < dim; ++j) out.features(i, j) = means(y, j) + rng.normal();
  }
  return out;
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path,
                        int max_samples) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

  std::uint32_t img_magic = read_be_u32(img, images_path);
  if (img_magic != 0x00000803u)
    throw std::runtime_error("idx: bad image magic in " + images_path + " (got " +
                             std::to_string(img_magic) + ", want 2051)");
  std::uint32_t n_images = read_be_u32(img, images_path);
  std::uint32_t rows = read_be_u32(img, images_path);
  std::uint32_t cols = read_be_u32(img, images_path);

  std::uint32_t lab_magic = read_be_u32(lab, labels_path);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("idx: bad label magic in " + labels_path + " (got " +
                             std::to_string(lab_magic) + ", want 2049)");
  std::uint32_t n_labels = read_be_u32(lab, labels_path);

  if (n_images != n_labels)
    throw std::runtime_error("idx: image/label count mismatch (" +
                             std::to_string(n_images) + " vs " + std::to_string(n_labels) +
                             ")");

  const std::uintmax_t pixels = std::uintmax_t(n_images) * rows * cols;
  if (stream_size(img) < 16 + pixels)
    throw std::runtime_error("idx: truncated image payload in " + images_path);
  if (stream_size(lab) < 8 + std::uintmax_t(n_labels))
    throw std::runtime_error("idx: truncated label payload in " + labels_path);

  std::uint32_t take = n_images;
  if (max_samples > 0 && std::uint32_t(max_samples) < take)
    take = std::uint32_t(max_samples);

  const int dim = static_cast<int>(rows * cols);
  LabeledDataset out;
  out.features.resize(take, dim);
  out.labels.resize(take);
  std::vector<unsigned char> pixel_row(dim);
  for (std::uint32_t i = 0; i < take; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixel_row.data()), dim))
      throw std::runtime_error("idx: truncated image payload in " + images_path);
    for (int j = 0; j < dim; ++j)
      out.features(i, j) = static_cast<double>(pixel_row[j]) / 255.0;
    char y;
    if (!lab.read(&y, 1))
      throw std::runtime_error("idx: truncated label payload in " + labels_path);
    out.labels(i) = static_cast<unsigned char>(y);
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> train_test_split(const LabeledDataset& data,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
  check_consistent(data);
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("train_test_split: test_fraction must be in (0, 1)");
  const int n = static_cast<int>(data.size());
  if (n < 2) throw std::invalid_argument("train_test_split: need at least 2 samples");

  const int n_test = static_cast<int>(std::llround(test_fraction * n));
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);

  std::vector<int> test_idx(idx.begin(), idx.begin() + n_test);
  std::vector<int> train_idx(idx.begin() + n_test, idx.end());
  return {select_rows(data, train_idx), select_rows(data, test_idx)};
}

PartitionPlan dirichlet_partition(const LabeledDataset& data, int n_clients, double beta,
                                  std::uint64_t seed) {
  check_consistent(data);
  if (n_clients < 1) throw std::invalid_argument("dirichlet_partition: n_clients < 1");
  if (!(beta > 0.0)) throw std::invalid_argument("dirichlet_partition: beta must be > 0");
  if (data.size() == 0) throw std::invalid_argument("dirichlet_partition: empty dataset");

  int num_classes = 0;
  for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
    if (data.labels(i) < 0)
      throw std::invalid_argument("dirichlet_partition: negative label");
    num_classes = std::max(num_classes, data.labels(i) + 1);
  }

  PartitionPlan plan;
  plan.client_indices.resize(n_clients);
  Rng rng(seed);
  std::vector<double> props(n_clients);
  for (int c = 0; c < num_classes; ++c) {
    for (int k = 0; k < n_clients; ++k) props[k] = rng.gamma(beta);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      if (data.labels(i) != c) continue;
      int client = static_cast<int>(rng.categorical(props));
      plan.client_indices[client].push_back(static_cast<int>(i));
    }
  }
  for (auto& v : plan.client_indices) std::sort(v.begin(), v.end());
  return plan;
}

LabeledDataset client_dataset(const LabeledDataset& data, const PartitionPlan& plan,
                              int client) {
  if (client < 0 || client >= plan.n_clients())
    throw std::invalid_argument("client_dataset: client id out of range");
  return select_rows(data, plan.client_indices[client]);
}

Vector lambda_weights(const PartitionPlan& plan) {
  Vector w(plan.n_clients());
  double total = 0.0;
  for (int k = 0; k < plan.n_clients(); ++k) {
    w(k) = static_cast<double>(plan.client_indices[k].size());
    total += w(k);
  }
  if (total <= 0.0) throw std::invalid_argument("lambda_weights: empty partition");
  return w / total;
}

}  // namespace fedzz
