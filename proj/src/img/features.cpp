#include "kpl/features.hpp"

#include <cmath>

#include "kpl/color.hpp"

namespace kpl::img {

FeatureStack compute_feature_stack(const RgbImage& img) {
    FeatureStack fs;
    fs.width = img.width;
    fs.height = img.height;

    auto luv = rgb_to_luv(img);
    fs.channels[kChanL] = std::move(luv[0]);
    fs.channels[kChanU] = std::move(luv[1]);
    fs.channels[kChanV] = std::move(luv[2]);

    const ChannelImage& L = fs.channels[kChanL];
    ChannelImage gx(img.width, img.height);
    ChannelImage gy(img.width, img.height);
    ChannelImage gmag(img.width, img.height);

    const int w = img.width, h = img.height;
    auto clampx = [w](int x) { return x < 0 ? 0 : (x >= w ? w - 1 : x); };
    auto clampy = [h](int y) { return y < 0 ? 0 : (y >= h ? h - 1 : y); };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double dx = 0.5 * (L.at(clampx(x + 1), y) - L.at(clampx(x - 1), y));
            const double dy = 0.5 * (L.at(x, clampy(y + 1)) - L.at(x, clampy(y - 1)));
            gx.at(x, y) = dx;
            gy.at(x, y) = dy;
            gmag.at(x, y) = std::sqrt(dx * dx + dy * dy);
        }
    }
    fs.channels[kChanGx] = std::move(gx);
    fs.channels[kChanGy] = std::move(gy);
    fs.channels[kChanGmag] = std::move(gmag);
    return fs;
}

void apply_norm(FeatureStack& fs, const StackNorm& norm) {
    for (int c = 0; c < kFeatureChannels; ++c) {
        const double mean = norm[static_cast<std::size_t>(c)].mean;
        const double scale = norm[static_cast<std::size_t>(c)].scale;
        if (!(scale > 0.0)) throw ContractError("apply_norm: scale must be positive");
        for (double& v : fs.chan(c).data) v = (v - mean) / scale;
    }
}

FeatureStack compute_feature_stack(const RgbImage& img, const StackNorm& norm) {
    FeatureStack fs = compute_feature_stack(img);
    apply_norm(fs, norm);
    return fs;
}

}  // namespace kpl::img
