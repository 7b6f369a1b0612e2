#include "kpl/color.hpp"

#include <cmath>

namespace kpl::img {

namespace {

double srgb_linearize(std::uint8_t v8) {
    const double c = v8 / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

// sRGB D65 reference white in XYZ.
constexpr double kWx = 0.95047;
constexpr double kWy = 1.0;
constexpr double kWz = 1.08883;

const double kUn = 4.0 * kWx / (kWx + 15.0 * kWy + 3.0 * kWz);
const double kVn = 9.0 * kWy / (kWx + 15.0 * kWy + 3.0 * kWz);

}  // namespace

std::array<double, 3> srgb_to_luv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const double r = srgb_linearize(r8);
    const double g = srgb_linearize(g8);
    const double b = srgb_linearize(b8);

    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    const double yr = y / kWy;
    const double eps = 216.0 / 24389.0;   // (6/29)^3
    const double kappa = 24389.0 / 27.0;  // (29/3)^3
    const double L = yr > eps ? 116.0 * std::cbrt(yr) - 16.0 : kappa * yr;

    const double denom = x + 15.0 * y + 3.0 * z;
    double u = 0.0, v = 0.0;
    if (denom > 0.0) {
        const double up = 4.0 * x / denom;
        const double vp = 9.0 * y / denom;
        u = 13.0 * L * (up - kUn);
        v = 13.0 * L * (vp - kVn);
    }
    return {L, u, v};
}

std::array<ChannelImage, 3> rgb_to_luv(const RgbImage& img) {
    std::array<ChannelImage, 3> out{ChannelImage(img.width, img.height),
                                    ChannelImage(img.width, img.height),
                                    ChannelImage(img.width, img.height)};
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t i = 0; i < n; ++i) {
        const auto luv = srgb_to_luv(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2]);
        out[0].data[i] = luv[0];
        out[1].data[i] = luv[1];
        out[2].data[i] = luv[2];
    }
    return out;
}

}  // namespace kpl::img
