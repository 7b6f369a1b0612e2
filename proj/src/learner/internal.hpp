// Helpers shared between the learner translation units; not public API.
#pragma once

#include <Eigen/Core>
#include <vector>

#include "kpl/learner.hpp"

namespace kpl::learner::detail {

// Per-sample responses of every hyperplane, active indices, and scores.
// Handles ragged banks (components mid-growth may hold fewer hyperplanes):
// component n's responses start at column offset[n].
struct ResponseTable {
    Eigen::MatrixXd resp;     // K x total hyperplanes
    Eigen::MatrixXi eta;      // K x N
    Eigen::VectorXd score;    // K
    std::vector<int> offset;  // N + 1 entries
};

ResponseTable compute_responses(const ghh::GhhModel& model, const trainset::TrainingSet& ts);

// Sum over the given sample rows of the per-channel shape quadratic, in
// spatial tap coordinates (6 blocks of p^2 x p^2). Rows must index
// full-dimension samples.
std::vector<Eigen::MatrixXd> shape_quadratic_spatial_sum(const trainset::TrainingSet& ts,
                                                         const ShapeTemplate& tmpl,
                                                         const std::vector<int>& rows);

// Least-squares fit of w'x + b to the targets with an L2 penalty on w only,
// solved by conjugate gradients on the normal equations.
void ridge_fit(const trainset::TrainingSet& ts, const Eigen::VectorXd& targets, double lambda,
               Eigen::VectorXd& w, double& b);

}  // namespace kpl::learner::detail
