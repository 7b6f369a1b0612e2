#include <algorithm>
#include <cmath>

#include "kpl/convolve.hpp"
#include "kpl/trainset.hpp"

namespace kpl::trainset {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * i * i / (sigma * sigma));
        k[static_cast<std::size_t>(i + r)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

img::ChannelImage gaussian_blur(const img::ChannelImage& ch, double sigma) {
    const auto k = gaussian_kernel(sigma);
    return img::convolve_separable(ch, k, k, img::ConvMode::kSameReplicate);
}

}  // namespace

std::vector<Candidate> detect_candidates(const img::ChannelImage& luma, const DogConfig& cfg) {
    std::vector<Candidate> out;
    if (luma.width < 3 || luma.height < 3) return out;

    // Blur ladder and DoG layers at full resolution.
    std::vector<img::ChannelImage> dog;
    std::vector<double> sigmas;
    img::ChannelImage prev = gaussian_blur(luma, cfg.sigma0);
    double sigma = cfg.sigma0;
    for (int s = 1; s < cfg.num_scales; ++s) {
        const double next_sigma = cfg.sigma0 * std::pow(cfg.scale_ratio, s);
        img::ChannelImage next = gaussian_blur(luma, next_sigma);
        img::ChannelImage d(luma.width, luma.height);
        for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = next.data[i] - prev.data[i];
        dog.push_back(std::move(d));
        sigmas.push_back(sigma);  // scale attributed to the layer's lower blur
        prev = std::move(next);
        sigma = next_sigma;
    }

    const int L = static_cast<int>(dog.size());
    const int b = std::max(1, cfg.border);
    for (int s = 1; s + 1 < L; ++s) {
        for (int y = b; y < luma.height - b; ++y) {
            for (int x = b; x < luma.width - b; ++x) {
                const double v = dog[static_cast<std::size_t>(s)].at(x, y);
                if (std::abs(v) < cfg.contrast_threshold) continue;
                bool is_max = true, is_min = true;
                for (int ds = -1; ds <= 1 && (is_max || is_min); ++ds)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (ds == 0 && dy == 0 && dx == 0) continue;
                            const double w = dog[static_cast<std::size_t>(s + ds)].at(x + dx, y + dy);
                            if (w >= v) is_max = false;
                            if (w <= v) is_min = false;
                        }
                if (is_max || is_min)
                    out.push_back({static_cast<double>(x), static_cast<double>(y),
                                   sigmas[static_cast<std::size_t>(s)], v, 0});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b2) {
        const double ra = std::abs(a.response), rb = std::abs(b2.response);
        if (ra != rb) return ra > rb;
        if (a.y != b2.y) return a.y < b2.y;
        return a.x < b2.x;
    });
    return out;
}

}  // namespace kpl::trainset
