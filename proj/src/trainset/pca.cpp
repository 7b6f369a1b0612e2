#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "kpl/error.hpp"
#include "kpl/trainset.hpp"

namespace kpl::trainset {

namespace {

// Flip each basis row so its largest-magnitude coefficient is positive;
// removes the eigensolver's sign ambiguity.
void canonicalize_signs(Eigen::MatrixXd& basis) {
    for (Eigen::Index r = 0; r < basis.rows(); ++r) {
        Eigen::Index imax = 0;
        basis.row(r).cwiseAbs().maxCoeff(&imax);
        if (basis(r, imax) < 0.0) basis.row(r) = -basis.row(r);
    }
}

}  // namespace

PcaBasis fit_pca(const TrainingSet& ts, int d) {
    const int K = ts.count();
    const int D = ts.dim();
    if (K < 2) throw ContractError("fit_pca: need at least 2 samples");

    PcaBasis out;
    out.mean = ts.patches.colwise().mean();
    Eigen::MatrixXd centered = ts.patches.rowwise() - out.mean.transpose();

    // Eigendecompose whichever of X'X and XX' is smaller; both share the
    // nonzero spectrum and the eigenvectors map across via X.
    Eigen::VectorXd eigvals;     // descending, scaled as squared singular values
    Eigen::MatrixXd components;  // columns = principal directions, descending
    if (K < D) {
        Eigen::MatrixXd gram = centered * centered.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        if (es.info() != Eigen::Success) throw NumericalError("fit_pca: eigensolver failed");
        eigvals = es.eigenvalues().reverse();
        Eigen::MatrixXd u = es.eigenvectors().rowwise().reverse();
        components.resize(D, K);
        for (int i = 0; i < K; ++i) {
            const double s = std::sqrt(std::max(eigvals(i), 0.0));
            if (s > 0.0)
                components.col(i) = centered.transpose() * u.col(i) / s;
            else
                components.col(i).setZero();
        }
    } else {
        Eigen::MatrixXd scatter = centered.transpose() * centered;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scatter);
        if (es.info() != Eigen::Success) throw NumericalError("fit_pca: eigensolver failed");
        eigvals = es.eigenvalues().reverse();
        components = es.eigenvectors().rowwise().reverse();
    }

    const double tol =
        std::max(eigvals(0), 0.0) * static_cast<double>(std::max(K, D)) * std::numeric_limits<double>::epsilon();
    int rank = 0;
    for (Eigen::Index i = 0; i < eigvals.size(); ++i)
        if (eigvals(i) > tol) ++rank;

    if (d <= 0) d = std::min(1024, rank);
    if (d > std::min(K, D)) throw ContractError("fit_pca: d exceeds min(samples, dim)");
    if (d > rank) throw DataError("fit_pca: requested dimension " + std::to_string(d) +
                                  " exceeds data rank " + std::to_string(rank));

    out.basis = components.leftCols(d).transpose();
    canonicalize_signs(out.basis);
    return out;
}

Eigen::MatrixXd project(const Eigen::MatrixXd& rows, const PcaBasis& basis) {
    if (rows.cols() != basis.full_dim())
        throw ContractError("project: dimension mismatch with basis");
    return (rows.rowwise() - basis.mean.transpose()) * basis.basis.transpose();
}

TrainingSet project(const TrainingSet& ts, const PcaBasis& basis) {
    TrainingSet out = ts;
    out.patches = project(ts.patches, basis);
    return out;
}

}  // namespace kpl::trainset
