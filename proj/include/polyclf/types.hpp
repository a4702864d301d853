#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <limits>
#include <vector>

namespace polyclf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace polyclf
