#include <fedzz/nn.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fedzz/rng.hpp>

namespace fedzz {

namespace {

std::vector<int> layer_dims(const ModelSpec& spec) {
  std::vector<int> dims;
  dims.push_back(spec.input_dim);
  for (int h : spec.hidden_dims) dims.push_back(h);
  dims.push_back(spec.num_classes);
  return dims;
}

void check_params(const Vector& params, const ModelSpec& spec) {
  if (params.size() != param_count(spec))
    throw std::invalid_argument("params size does not match model spec");
}

// Weight/bias views into the flat parameter vector, one entry per layer.
struct LayerView {
  Eigen::Map<const Matrix> W;
  Eigen::Map<const Vector> b;
};

std::vector<LayerView> map_layers(const Vector& params, const ModelSpec& spec) {
  std::vector<LayerView> views;
  const auto dims = layer_dims(spec);
  const double* p = params.data();
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::Index rows = dims[l + 1], cols = dims[l];
    views.push_back({Eigen::Map<const Matrix>(p + off, rows, cols),
                     Eigen::Map<const Vector>(p + off + rows * cols, rows)});
    off += rows * cols + rows;
  }
  return views;
}

Matrix logits_of(const Vector& params, const ModelSpec& spec, const Matrix& features) {
  const auto views = map_layers(params, spec);
  Matrix a = features.transpose();
  for (std::size_t l = 0; l < views.size(); ++l) {
    Matrix z = (views[l].W * a).colwise() + views[l].b;
    if (l + 1 < views.size())
      a = z.array().tanh().matrix();
    else
      a = std::move(z);
  }
  return a;  // num_classes x n
}

}  // namespace

void validate(const ModelSpec& spec) {
  if (spec.input_dim < 1) throw std::invalid_argument("model spec: input_dim must be >= 1");
  if (spec.num_classes < 2)
    throw std::invalid_argument("model spec: num_classes must be >= 2");
  for (int h : spec.hidden_dims)
    if (h < 1) throw std::invalid_argument("model spec: hidden dims must be >= 1");
}

Eigen::Index param_count(const ModelSpec& spec) {
  validate(spec);
  const auto dims = layer_dims(spec);
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    total += Eigen::Index(dims[l + 1]) * dims[l] + dims[l + 1];
  return total;
}

Vector init_model(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  const auto dims = layer_dims(spec);
  Vector params(param_count(spec));
  Rng rng(seed);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Eigen::Index rows = dims[l + 1], cols = dims[l];
    double scale = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (Eigen::Index k = 0; k < rows * cols; ++k) params(off + k) = scale * rng.normal();
    off += rows * cols;
    params.segment(off, rows).setZero();
    off += rows;
  }
  return params;
}

Vector forward(const Vector& params, const ModelSpec& spec, const Vector& x) {
  check_params(params, spec);
  if (x.size() != spec.input_dim)
    throw std::invalid_argument("forward: input size does not match input_dim");
  Matrix logits = logits_of(params, spec, x.transpose());
  double mx = logits.col(0).maxCoeff();
  Vector e = (logits.col(0).array() - mx).exp();
  return e / e.sum();
}

LossGrad loss_and_grad(const Vector& params, const ModelSpec& spec,
                       const LabeledDataset& batch) {
  check_params(params, spec);
  check_labels(batch, spec.num_classes);
  if (batch.size() == 0) throw std::invalid_argument("loss_and_grad: empty batch");
  if (batch.dim() != spec.input_dim)
    throw std::invalid_argument("loss_and_grad: feature dim does not match input_dim");

  const auto views = map_layers(params, spec);
  const Eigen::Index B = batch.size();

  // Forward, keeping each layer's activation for the backward sweep.
  std::vector<Matrix> acts;
  acts.reserve(views.size());
  acts.push_back(batch.features.transpose());
  Matrix logits;
  for (std::size_t l = 0; l < views.size(); ++l) {
    Matrix z = (views[l].W * acts.back()).colwise() + views[l].b;
    if (l + 1 < views.size())
      acts.push_back(z.array().tanh().matrix());
    else
      logits = std::move(z);
  }

  double loss = 0.0;
  Matrix probs = logits;
  for (Eigen::Index j = 0; j < B; ++j) {
    auto col = probs.col(j);
    double mx = col.maxCoeff();
    col = (col.array() - mx).exp();
    double s = col.sum();
    loss += std::log(s) + mx - logits(batch.labels(j), j);
    col /= s;
  }
  loss /= static_cast<double>(B);

  LossGrad out;
  out.loss = loss;
  out.grad.resize(params.size());

  Matrix delta = probs;
  for (Eigen::Index j = 0; j < B; ++j) delta(batch.labels(j), j) -= 1.0;
  delta /= static_cast<double>(B);

  const auto dims = layer_dims(spec);
  std::vector<Eigen::Index> offsets(views.size());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < views.size(); ++l) {
    offsets[l] = off;
    off += Eigen::Index(dims[l + 1]) * dims[l] + dims[l + 1];
  }

  for (std::size_t l = views.size(); l-- > 0;) {
    Eigen::Index rows = dims[l + 1], cols = dims[l];
    Eigen::Map<Matrix> gW(out.grad.data() + offsets[l], rows, cols);
    Eigen::Map<Vector> gb(out.grad.data() + offsets[l] + rows * cols, rows);
    gW = delta * acts[l].transpose();
    gb = delta.rowwise().sum();
    if (l > 0)
      delta = (views[l].W.transpose() * delta).cwiseProduct(
          (1.0 - acts[l].array().square()).matrix());
  }
  return out;
}

Vector sgd_train(Vector params, const ModelSpec& spec, const LabeledDataset& data,
                 double eta, int batch_size, int epochs, std::uint64_t seed) {
  check_params(params, spec);
  check_labels(data, spec.num_classes);
  if (!(eta > 0.0)) throw std::invalid_argument("sgd_train: eta must be positive");
  if (batch_size < 1) throw std::invalid_argument("sgd_train: batch_size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("sgd_train: epochs must be >= 0");

  const Eigen::Index n = data.size();
  if (n == 0) return params;

  if (batch_size >= n) {
    // One full-batch step per pass, natural sample order, no RNG involved.
    for (int e = 0; e < epochs; ++e)
      params -= eta * loss_and_grad(params, spec, data).grad;
    return params;
  }

  Rng rng(seed);
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(idx);
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      Eigen::Index len = std::min<Eigen::Index>(batch_size, n - start);
      std::vector<int> sel(idx.begin() + start, idx.begin() + start + len);
      LabeledDataset batch = select_rows(data, sel);
      params -= eta * loss_and_grad(params, spec, batch).grad;
    }
  }
  return params;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine_similarity: length mismatch");
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  // identical vectors must compare as exactly 1 so that an untrained client
  // (update == incoming model) never trips a discard threshold of 1
  if (a == b) return 1.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double accuracy(const Vector& params, const ModelSpec& spec, const LabeledDataset& test) {
  check_params(params, spec);
  check_labels(test, spec.num_classes);
  if (test.size() == 0) throw std::invalid_argument("accuracy: empty test set");
  Matrix logits = logits_of(params, spec, test.features);
  Eigen::Index correct = 0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    int best = 0;
    for (int c = 1; c < spec.num_classes; ++c)
      if (logits(c, j) > logits(best, j)) best = c;
    if (best == test.labels(j)) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace fedzz
