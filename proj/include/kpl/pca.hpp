#pragma once

#include <Eigen/Core>

namespace kpl::trainset {

// Principal component basis: rows of `basis` are orthonormal directions in
// the original space; project(x) = basis * (x - mean).
struct PcaBasis {
    Eigen::VectorXd mean;    // D
    Eigen::MatrixXd basis;   // d x D
    int reduced_dim() const { return static_cast<int>(basis.rows()); }
    int full_dim() const { return static_cast<int>(basis.cols()); }
};

}  // namespace kpl::trainset
