#pragma once

#include <vector>

#include "kpl/image.hpp"

namespace kpl::img {

enum class ConvMode {
    kValid,         // full-overlap positions only, output shrinks
    kSameReplicate, // same size, border pixels replicated
    kCircular,      // same size, coordinates wrap
};

// True 2D convolution (filter flipped): out(x,y) = sum_{a,b} f(r+a, r+b) * in(x-a, y-b).
// Circular mode matches the frequency-domain pointwise product exactly.
ChannelImage convolve2d(const ChannelImage& ch, const Filter2d& f, ConvMode mode);

// Two-pass convolution with the outer-product filter col * row^T.
// Row and col lengths must be odd (they may differ).
ChannelImage convolve_separable(const ChannelImage& ch, const std::vector<double>& row,
                                const std::vector<double>& col, ConvMode mode);

// Cross-correlation (no flip) with replicate borders; this is the dense
// "slide the filter" operation used for score maps.
ChannelImage correlate_same_replicate(const ChannelImage& ch, const Filter2d& f);

Filter2d flip(const Filter2d& f);

}  // namespace kpl::img
