#pragma once

#include <array>

#include "kpl/image.hpp"

namespace kpl::img {

// CIE 1976 L*u*v* of one sRGB pixel (D65 white, sRGB linearization).
// L in [0, 100]; u, v are 0 for black by convention.
std::array<double, 3> srgb_to_luv(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Per-image conversion; returns channels [L, U, V].
std::array<ChannelImage, 3> rgb_to_luv(const RgbImage& img);

}  // namespace kpl::img
