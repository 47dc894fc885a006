#pragma once

#include <stdexcept>
#include <vector>

#include <fedzz/types.hpp>

namespace fedzz {

// Feature rows paired with integer class labels.
struct LabeledDataset {
  Matrix features;  // n x d, one sample per row
  Labels labels;    // n

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

inline void check_consistent(const LabeledDataset& data) {
  if (data.features.rows() != data.labels.size())
    throw std::invalid_argument("dataset: feature row count does not match label count");
}

inline void check_labels(const LabeledDataset& data, int num_classes) {
  check_consistent(data);
  for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
    int y = data.labels(i);
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("dataset: label out of range for class count");
  }
}

inline LabeledDataset select_rows(const LabeledDataset& data, const std::vector<int>& idx) {
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(idx.size()), data.features.cols());
  out.labels.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.features.row(static_cast<Eigen::Index>(k)) = data.features.row(idx[k]);
    out.labels(static_cast<Eigen::Index>(k)) = data.labels(idx[k]);
  }
  return out;
}

}  // namespace fedzz
