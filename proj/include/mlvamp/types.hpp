#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>

namespace mlvamp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace mlvamp
