#pragma once

#include <Eigen/Dense>

namespace roughctl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace roughctl
