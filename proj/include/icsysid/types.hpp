#pragma once

#include <Eigen/Dense>

namespace icsysid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace icsysid
