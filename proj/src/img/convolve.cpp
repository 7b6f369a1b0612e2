#include "kpl/convolve.hpp"

#include <algorithm>
#include <cmath>

#include "kpl/parallel.hpp"

namespace kpl::img {

namespace {

inline int clampi(int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }
inline int wrapi(int v, int n) {
    int m = v % n;
    return m < 0 ? m + n : m;
}

void check_valid_fit(int fsize, int w, int h) {
    if (fsize > w || fsize > h)
        throw ContractError("convolve2d: filter larger than image in valid mode");
}

}  // namespace

Filter2d flip(const Filter2d& f) {
    Filter2d g(f.size);
    for (int y = 0; y < f.size; ++y)
        for (int x = 0; x < f.size; ++x)
            g.at(x, y) = f.at(f.size - 1 - x, f.size - 1 - y);
    return g;
}

ChannelImage convolve2d(const ChannelImage& ch, const Filter2d& f, ConvMode mode) {
    const int w = ch.width, h = ch.height, r = f.size / 2;

    if (mode == ConvMode::kValid) {
        check_valid_fit(f.size, w, h);
        ChannelImage out(w - 2 * r, h - 2 * r);
        for (int y = 0; y < out.height; ++y) {
            for (int x = 0; x < out.width; ++x) {
                double acc = 0.0;
                for (int b = -r; b <= r; ++b)
                    for (int a = -r; a <= r; ++a)
                        acc += f.at(r + a, r + b) * ch.at(x + r - a, y + r - b);
                out.at(x, y) = acc;
            }
        }
        return out;
    }

    ChannelImage out(w, h);
    const bool circ = mode == ConvMode::kCircular;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int b = -r; b <= r; ++b) {
                const int yy = circ ? wrapi(y - b, h) : clampi(y - b, h);
                for (int a = -r; a <= r; ++a) {
                    const int xx = circ ? wrapi(x - a, w) : clampi(x - a, w);
                    acc += f.at(r + a, r + b) * ch.at(xx, yy);
                }
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

namespace {

// 1D horizontal pass; border handling per mode. Valid mode shrinks width.
ChannelImage conv_rows(const ChannelImage& ch, const std::vector<double>& k, ConvMode mode) {
    const int r = static_cast<int>(k.size()) / 2;
    const int w = ch.width, h = ch.height;
    if (mode == ConvMode::kValid) {
        if (static_cast<int>(k.size()) > w)
            throw ContractError("convolve_separable: kernel larger than image in valid mode");
        ChannelImage out(w - 2 * r, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < out.width; ++x) {
                double acc = 0.0;
                for (int a = -r; a <= r; ++a) acc += k[static_cast<std::size_t>(r + a)] * ch.at(x + r - a, y);
                out.at(x, y) = acc;
            }
        return out;
    }
    ChannelImage out(w, h);
    const bool circ = mode == ConvMode::kCircular;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int a = -r; a <= r; ++a) {
                const int xx = circ ? wrapi(x - a, w) : clampi(x - a, w);
                acc += k[static_cast<std::size_t>(r + a)] * ch.at(xx, y);
            }
            out.at(x, y) = acc;
        }
    return out;
}

ChannelImage conv_cols(const ChannelImage& ch, const std::vector<double>& k, ConvMode mode) {
    const int r = static_cast<int>(k.size()) / 2;
    const int w = ch.width, h = ch.height;
    if (mode == ConvMode::kValid) {
        if (static_cast<int>(k.size()) > h)
            throw ContractError("convolve_separable: kernel larger than image in valid mode");
        ChannelImage out(w, h - 2 * r);
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int b = -r; b <= r; ++b) acc += k[static_cast<std::size_t>(r + b)] * ch.at(x, y + r - b);
                out.at(x, y) = acc;
            }
        return out;
    }
    ChannelImage out(w, h);
    const bool circ = mode == ConvMode::kCircular;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int b = -r; b <= r; ++b) {
                const int yy = circ ? wrapi(y - b, h) : clampi(y - b, h);
                acc += k[static_cast<std::size_t>(r + b)] * ch.at(x, yy);
            }
            out.at(x, y) = acc;
        }
    return out;
}

}  // namespace

ChannelImage convolve_separable(const ChannelImage& ch, const std::vector<double>& row,
                                const std::vector<double>& col, ConvMode mode) {
    if (row.empty() || col.empty() || row.size() % 2 == 0 || col.size() % 2 == 0)
        throw ContractError("convolve_separable: kernel lengths must be odd");
    // Replicate and circular borders clamp/wrap per axis, so the two 1D
    // passes reproduce the 2D result exactly in every mode.
    return conv_cols(conv_rows(ch, row, mode), col, mode);
}

ChannelImage correlate_same_replicate(const ChannelImage& ch, const Filter2d& f) {
    const int w = ch.width, h = ch.height, r = f.size / 2;
    ChannelImage out(w, h);
    parallel_for(h, [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            const bool y_interior = (y >= r && y < h - r);
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                if (y_interior && x >= r && x < w - r) {
                    // Hot path: no clamping, contiguous rows.
                    for (int b = -r; b <= r; ++b) {
                        const double* src = ch.data.data() + static_cast<std::size_t>(y + b) * w + (x - r);
                        const double* tap = f.taps.data() + static_cast<std::size_t>(b + r) * f.size;
                        for (int a = 0; a < f.size; ++a) acc += tap[a] * src[a];
                    }
                } else {
                    for (int b = -r; b <= r; ++b) {
                        const int yy = clampi(y + b, h);
                        for (int a = -r; a <= r; ++a)
                            acc += f.at(r + a, r + b) * ch.at(clampi(x + a, w), yy);
                    }
                }
                out.at(x, y) = acc;
            }
        }
    });
    return out;
}

}  // namespace kpl::img
