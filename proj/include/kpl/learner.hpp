#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "kpl/dft.hpp"
#include "kpl/ghh.hpp"
#include "kpl/trainset.hpp"

namespace kpl::learner {

// ---------------------------------------------------------------------------
// Real-coordinate DFT
//
// Orthogonal change of basis on p x p real tiles. Conjugate bin pairs of the
// unitary DFT become (sqrt2 * Re, sqrt2 * Im) coordinate pairs, the
// self-conjugate DC bin keeps its real part. Norms and inner products are
// preserved, so frequency-domain quadratics can be assembled bin by bin and
// mapped back to spatial taps exactly.
// ---------------------------------------------------------------------------
struct RealDftPlan {
    int size = 0;  // p, odd
    int dim = 0;   // p * p

    struct Coord {
        int kx = 0;
        int ky = 0;
        bool imag = false;    // coordinate is the imaginary part of the bin
        bool paired = false;  // bin has a distinct conjugate partner
    };
    std::vector<Coord> coords;  // one entry per real coordinate

    // Unitary DFT (scale 1/p) of a row-major p x p tile.
    img::Spectrum unitary_dft(const double* tile) const;
    // Real coordinates of a conjugate-symmetric spectrum.
    Eigen::VectorXd to_real(const img::Spectrum& sp) const;
    // |X_k|^2 attached to each real coordinate.
    Eigen::VectorXd bin_power(const img::Spectrum& sp) const;
    // The explicit p^2 x p^2 orthogonal matrix (real coords <- spatial taps).
    Eigen::MatrixXd matrix() const;
};

RealDftPlan make_real_dft_plan(int size);

// ---------------------------------------------------------------------------
// Shape template: the target response profile around a keypoint,
// h(x, y) = exp(alpha * (1 - r / beta)) - 1 with r the distance to the
// patch center. Positive inside the radius-beta circle, zero on it,
// negative outside.
// ---------------------------------------------------------------------------
struct ShapeTemplate {
    double alpha = 1.0;
    double beta = 5.0;
    int size = 0;
    img::Filter2d h;       // sampled profile, peak at the patch center
    img::Spectrum H;       // unitary DFT of h
    double h_norm2 = 0.0;  // squared Frobenius norm of h
};

ShapeTemplate shape_template(double alpha, double beta, int size);

// ---------------------------------------------------------------------------
// Training configuration
// ---------------------------------------------------------------------------
struct TrainConfig {
    double gamma_c = 1e-2;  // weight of the squared tap norm
    double gamma_s = 1e-2;  // weight of the response-shape term
    double gamma_t = 1e-2;  // weight of the response-stability term
    int num_components = 4;
    int hyperplanes_per_component = 4;
    double shape_alpha = 1.0;
    double shape_beta = 0.0;  // <= 0: (patch_size - 1) / 4
    int newton_iterations = 20;
    double newton_tolerance = 1e-6;
    int refine_sweeps = 3;
    int pca_dim = 0;  // 0: min(1024, rank); < 0: train in full tap space
    std::uint64_t seed = 7;
    std::string trace_path;  // JSON-lines training trace; empty = no file
    // Skip the mean-quadratic approximation of the shape term and use the
    // exact per-sample loss. Test-scale only; requires full tap space.
    bool exact_shape = false;
};

// Per-hyperplane gradient container mirroring GhhModel's filter layout.
struct ModelGrad {
    std::vector<std::vector<Eigen::VectorXd>> taps;  // [n][m]
    std::vector<std::vector<double>> bias;           // [n][m]

    static ModelGrad zero(const ghh::GhhModel& model);
    void accumulate(const ModelGrad& other, double factor);
    Eigen::VectorXd flatten() const;  // taps then bias, n-major
};

// ---------------------------------------------------------------------------
// Loss terms. All operate in whatever coordinate space the model's taps
// live in (full tap space or a reduced basis), as long as ts rows match.
// ---------------------------------------------------------------------------

// gamma_c * sum |w|^2 + (1/K) * sum max(0, 1 - y F)^2. Biases and component
// signs are excluded from the norm.
double loss_classification(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                           double gamma_c, ModelGrad* grad = nullptr);

// Exact spatial form of the shape term: for every positive and component,
// the circular convolution of the active filter with the patch must look
// like the template scaled by the filter response, per channel. Reference
// path; value only.
double loss_shape_spatial(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                          const ShapeTemplate& tmpl, double gamma_s);

// Frequency-domain quadratic of the shape term with the per-sample matrices
// replaced by their mean over positives. Model-independent except for the
// occupancy counts (positives per active hyperplane), which must be
// refreshed whenever filters change.
struct ShapeQuadratic {
    int patch_size = 0;
    int positives = 0;
    std::vector<Eigen::MatrixXd> q_channel;  // 6 blocks, p^2 x p^2, spatial coords
    Eigen::MatrixXd q_reduced;               // dense form in a reduced basis
    bool reduced = false;
    Eigen::MatrixXi occupancy;  // [n][m] positives whose active index is m
    std::uint64_t revision = 0; // model revision the occupancy was built for

    double quad(const Eigen::VectorXd& taps) const;         // w^T Q w
    Eigen::VectorXd apply(const Eigen::VectorXd& taps) const;  // Q w
    void refresh(const ghh::GhhModel& model, const trainset::TrainingSet& ts);
};

// Q matrices only; `basis` (may be null) additionally produces the reduced
// form. Occupancy starts empty.
ShapeQuadratic build_shape_quadratic(const trainset::TrainingSet& full_ts,
                                     const ShapeTemplate& tmpl,
                                     const trainset::PcaBasis* basis);

// Q plus occupancy for `model`, which must operate on `ts` directly.
ShapeQuadratic precompute_shape_quadratic(const trainset::TrainingSet& ts,
                                          const ShapeTemplate& tmpl,
                                          const ghh::GhhModel& model);

// (gamma_s / K_pos) * sum_nm occupancy_nm * w_nm^T Q w_nm. Throws if the
// occupancy is stale (model revision changed since the last refresh).
double loss_shape_fourier(const ghh::GhhModel& model, const ShapeQuadratic& sq,
                          double gamma_s, ModelGrad* grad = nullptr);

// Exact per-sample frequency-domain value (no mean approximation); equals
// loss_shape_spatial up to floating-point error. Full tap space only.
double loss_shape_fourier_exact(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                                const ShapeTemplate& tmpl, double gamma_s);

// (gamma_t / K) * sum_i sum_{j in group(i), other image} (F_i - F_j)^2.
double loss_temporal(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                     double gamma_t, ModelGrad* grad = nullptr);

struct Objective {
    double classification = 0.0;
    double shape = 0.0;
    double temporal = 0.0;
    double total = 0.0;
};

// Sum of the three terms with a cached quadratic (occupancy must be fresh).
Objective evaluate_objective(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                             const ShapeQuadratic& sq, const TrainConfig& cfg);

// Convenience form that rebuilds the quadratic; with cfg.exact_shape the
// shape term is the exact spatial value.
double total_objective(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                       const ShapeTemplate& tmpl, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Trust-region Newton refinement of a single hyperplane
// ---------------------------------------------------------------------------
struct NewtonReport {
    int rounds = 0;
    double objective_before = 0.0;
    double objective_after = 0.0;
    bool accepted = false;   // at least one round improved the objective
    Objective objective;     // term breakdown at exit
};

// Repeatedly solves the restricted problem in (w_nm, b_nm) with all other
// hyperplanes and all active indices frozen, then re-derives the active
// indices and keeps the step only if the full objective did not increase.
// `sq` must be fresh for `model` on entry and is fresh for the returned
// state on exit.
NewtonReport newton_refine(ghh::GhhModel& model, int n, int m, const trainset::TrainingSet& ts,
                           const ShapeTemplate& tmpl, const TrainConfig& cfg, ShapeQuadratic& sq);

// Convenience overload building the quadratic internally.
NewtonReport newton_refine(ghh::GhhModel& model, int n, int m, const trainset::TrainingSet& ts,
                           const ShapeTemplate& tmpl, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Greedy training
// ---------------------------------------------------------------------------
struct TraceEntry {
    int step = 0;
    std::string event;  // "init", "open-component", "add-hyperplane", ...
    int n = -1;
    int m = -1;
    Objective objective;
};

struct TrainResult {
    ghh::GhhModel model;
    std::vector<TraceEntry> trace;
    // Set when a hyperplane addition could not improve the objective and a
    // neutral (response-preserving) hyperplane was inserted instead.
    bool improvement_warning = false;
};

// Grows the model one hyperplane at a time (components opened in order, each
// filled before the next), every addition initialized by a ridge fit to the
// current residuals and Newton-refined; when opening a component both signs
// are tried and the lower objective kept. Ends with refine_sweeps passes
// over all hyperplanes in seeded-random order. The objective of the
// recorded trace never increases. Taps are returned in full tap space even
// when training ran in a reduced basis.
TrainResult train_greedy(const trainset::TrainingSet& ts, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Hyperparameter grid search
// ---------------------------------------------------------------------------
struct CvPoint {
    double gamma_c = 0.0;
    double gamma_s = 0.0;
    double gamma_t = 0.0;
};

struct CvEntry {
    CvPoint point;
    double accuracy = 0.0;        // sign agreement on the validation set
    double temporal_spread = 0.0; // within-group variance / overall variance
    double score = 0.0;           // accuracy - temporal_spread
};

struct CvResult {
    CvPoint best;
    std::vector<CvEntry> table;
};

// Log-spaced grid, `points` values per weight across [lo, hi].
std::vector<CvPoint> log_grid(int points, double lo, double hi);

// Trains one model per distinct grid point and scores it on the validation
// split; returns the best point (ties: earliest) plus the full table.
CvResult cross_validate(const trainset::TrainingSet& ts_train, const trainset::TrainingSet& ts_val,
                        const std::vector<CvPoint>& grid, const TrainConfig& base);

}  // namespace kpl::learner
