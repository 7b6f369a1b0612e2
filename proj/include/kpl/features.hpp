#pragma once

#include <array>

#include "kpl/image.hpp"

namespace kpl::img {

// Standardization constants for one channel: value -> (value - mean) / scale.
struct ChannelNorm {
    double mean = 0.0;
    double scale = 1.0;
};

using StackNorm = std::array<ChannelNorm, kFeatureChannels>;

// Raw (unstandardized) feature stack: [L, U, V, gx, gy, gmag].
// Gradients are central differences of L with replicate borders.
FeatureStack compute_feature_stack(const RgbImage& img);

// Same, standardized with the given per-channel constants. Training-time
// constants are stored with the model and must be reused at detection time.
FeatureStack compute_feature_stack(const RgbImage& img, const StackNorm& norm);

void apply_norm(FeatureStack& fs, const StackNorm& norm);

}  // namespace kpl::img
