#pragma once

#include <cstdint>
#include <vector>

#include <fedzz/dataset.hpp>
#include <fedzz/types.hpp>

namespace fedzz {

// Dense classifier: zero or more tanh hidden layers followed by a linear
// softmax head. Parameters live in one flat vector so federated updates can
// be averaged and compared like plain vectors. All math in doubles.
struct ModelSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int num_classes = 0;
};

void validate(const ModelSpec& spec);

Eigen::Index param_count(const ModelSpec& spec);

// Weights ~ N(0, 1/fan_in), biases zero. Deterministic in the seed.
Vector init_model(const ModelSpec& spec, std::uint64_t seed);

// Class probabilities for a single sample; softmax is log-sum-exp stabilized.
Vector forward(const Vector& params, const ModelSpec& spec, const Vector& x);

struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

// Mean cross-entropy over the batch and its analytic gradient.
LossGrad loss_and_grad(const Vector& params, const ModelSpec& spec,
                       const LabeledDataset& batch);

// Plain SGD: `epochs` full passes in shuffled mini-batches, one step
// params <- params - eta * grad per batch. When batch_size covers the whole
// dataset each pass is a single full-batch step in natural sample order.
Vector sgd_train(Vector params, const ModelSpec& spec, const LabeledDataset& data,
                 double eta, int batch_size, int epochs, std::uint64_t seed);

// Zero-norm convention: returns 0 if either vector has norm 0.
double cosine_similarity(const Vector& a, const Vector& b);

// Percentage of argmax-correct predictions; ties break to the lowest index.
double accuracy(const Vector& params, const ModelSpec& spec, const LabeledDataset& test);

}  // namespace fedzz
