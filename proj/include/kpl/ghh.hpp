#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "kpl/features.hpp"
#include "kpl/image.hpp"
#include "kpl/pca.hpp"

namespace kpl::ghh {

// A feature patch is a flat vector of 6 * patch_size^2 values, channel-major:
// index = c * p^2 + y * p + x. Patches fed to a model must already be
// standardized with the model's normalization constants.
using FeaturePatch = Eigen::VectorXd;

inline int patch_dim(int patch_size) { return img::kFeatureChannels * patch_size * patch_size; }

// One hyperplane of the regressor: six per-channel filters stored flat,
// plus a scalar bias. The bias augments the pure inner product form;
// a margin loss needs the offset.
struct Hyperplane {
    Eigen::VectorXd taps;  // patch_dim(patch_size)
    double bias = 0.0;
};

// Piecewise-linear regressor: F(x) = sum_n delta_n * max_m (w_nm . x + b_nm).
struct GhhModel {
    int patch_size = 21;
    std::vector<int> delta;                        // per component, in {-1, +1}
    std::vector<std::vector<Hyperplane>> filters;  // [n][m]
    img::StackNorm normalization;
    std::optional<trainset::PcaBasis> pca;  // training-time only, not serialized
    // Changed whenever any filter changes (call touch() after mutating);
    // lets cached quadratics detect that their occupancy counts went stale.
    std::uint64_t revision = 0;
    void touch();  // assigns a process-unique revision

    int num_components() const { return static_cast<int>(filters.size()); }
    int hyperplanes_per_component() const {
        return filters.empty() ? 0 : static_cast<int>(filters.front().size());
    }
    int radius() const { return (patch_size - 1) / 2; }
    int dim() const { return patch_dim(patch_size); }

    void validate() const;
};

// Convenience constructors used by tests and training.
GhhModel make_zero_model(int num_components, int hyperplanes, int patch_size);

// Extract / install one channel of one hyperplane as a spatial filter.
img::Filter2d channel_filter(const GhhModel& m, int n, int mm, int c);
void set_channel_filter(GhhModel& m, int n, int mm, int c, const img::Filter2d& f);

// Dense per-pixel response of the regressor. Scores inside the border ring
// of width `border` are computed with replicate padding but must never be
// used for detection.
struct ScoreMap {
    int width = 0;
    int height = 0;
    int border = 0;
    std::vector<double> scores;

    double at(int x, int y) const { return scores[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return scores[static_cast<std::size_t>(y) * width + x]; }
    bool interior(int x, int y) const {
        return x >= border && y >= border && x < width - border && y < height - border;
    }
};

// F(x; omega) for one normalized patch.
double score_patch(const GhhModel& model, const FeaturePatch& patch);

// Smallest m attaining max_m (w_nm . x + b_nm) for component n.
int active_index(const GhhModel& model, const FeaturePatch& patch, int n);

// Dense evaluation via convolutions and pixel-wise maxima. fs must be
// standardized with the model's constants.
ScoreMap score_map(const GhhModel& model, const img::FeatureStack& fs);

// Extracts the patch centered at integer (cx, cy); the patch must lie fully
// inside the stack.
FeaturePatch patch_at(const img::FeatureStack& fs, int cx, int cy, int patch_size);

}  // namespace kpl::ghh
