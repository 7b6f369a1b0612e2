#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "kpl/error.hpp"

namespace kpl::img {

// 8-bit RGB image, row-major interleaved triples.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // 3 * width * height

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(3) * w * h, 0) {
        if (w <= 0 || h <= 0) throw ContractError("RgbImage: dimensions must be positive");
    }

    std::uint8_t* px(int x, int y) { return data.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const std::uint8_t* px(int x, int y) const {
        return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
};

// Single real-valued channel, row-major.
struct ChannelImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // width * height

    ChannelImage() = default;
    ChannelImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw ContractError("ChannelImage: dimensions must be positive");
    }

    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Square odd-sized filter, row-major taps.
struct Filter2d {
    int size = 0;
    std::vector<double> taps;  // size * size

    Filter2d() = default;
    explicit Filter2d(int sz, double fill = 0.0)
        : size(sz), taps(static_cast<std::size_t>(sz) * sz, fill) {
        if (sz <= 0 || sz % 2 == 0) throw ContractError("Filter2d: size must be odd and positive");
    }

    double& at(int x, int y) { return taps[static_cast<std::size_t>(y) * size + x]; }
    double at(int x, int y) const { return taps[static_cast<std::size_t>(y) * size + x]; }
};

// Channel order of the per-pixel feature stack.
enum FeatureChannel : int {
    kChanL = 0,
    kChanU = 1,
    kChanV = 2,
    kChanGx = 3,
    kChanGy = 4,
    kChanGmag = 5,
};
inline constexpr int kFeatureChannels = 6;

// Six aligned feature channels [L, U, V, gx, gy, gmag].
struct FeatureStack {
    int width = 0;
    int height = 0;
    std::array<ChannelImage, kFeatureChannels> channels;

    const ChannelImage& chan(int c) const { return channels[static_cast<std::size_t>(c)]; }
    ChannelImage& chan(int c) { return channels[static_cast<std::size_t>(c)]; }
};

}  // namespace kpl::img
