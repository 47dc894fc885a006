#pragma once

#include <Eigen/Dense>

namespace fedzz {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Labels = Eigen::VectorXi;

}  // namespace fedzz
