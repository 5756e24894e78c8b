#pragma once

#include <Eigen/Dense>

#include <string>

namespace hmt {

// Row-major so that per-primitive and per-pixel rows are contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline std::string shape_str(const Mat& m) {
    return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

}  // namespace hmt
