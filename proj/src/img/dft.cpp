#include "kpl/dft.hpp"

#include <cmath>

namespace kpl::img {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// e^{sign * 2*pi*i*k/N} table; powers are taken with k*n mod N.
std::vector<std::complex<double>> twiddles(int n, bool inverse) {
    std::vector<std::complex<double>> w(static_cast<std::size_t>(n));
    const double sign = inverse ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k)
        w[static_cast<std::size_t>(k)] =
            std::polar(1.0, sign * kTwoPi * static_cast<double>(k) / static_cast<double>(n));
    return w;
}

// Naive 1D DFT of one strided line, in place.
void dft_line(std::vector<std::complex<double>>& data, std::size_t start, int len, int stride,
              const std::vector<std::complex<double>>& w,
              std::vector<std::complex<double>>& tmp) {
    for (int k = 0; k < len; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (int n = 0; n < len; ++n) {
            const int tw = static_cast<int>((static_cast<long long>(k) * n) % len);
            acc += data[start + static_cast<std::size_t>(n) * stride] * w[static_cast<std::size_t>(tw)];
        }
        tmp[static_cast<std::size_t>(k)] = acc;
    }
    for (int k = 0; k < len; ++k)
        data[start + static_cast<std::size_t>(k) * stride] = tmp[static_cast<std::size_t>(k)];
}

void dft2_inplace(std::vector<std::complex<double>>& data, int w, int h, bool inverse) {
    const auto wr = twiddles(w, inverse);
    const auto wc = twiddles(h, inverse);
    std::vector<std::complex<double>> tmp(static_cast<std::size_t>(std::max(w, h)));
    for (int y = 0; y < h; ++y) dft_line(data, static_cast<std::size_t>(y) * w, w, 1, wr, tmp);
    for (int x = 0; x < w; ++x) dft_line(data, static_cast<std::size_t>(x), h, w, wc, tmp);
}

}  // namespace

Spectrum dft2(const ChannelImage& ch) {
    Spectrum sp(ch.width, ch.height);
    for (std::size_t i = 0; i < ch.data.size(); ++i) sp.data[i] = {ch.data[i], 0.0};
    dft2_inplace(sp.data, ch.width, ch.height, false);
    return sp;
}

ChannelImage idft2_real(const Spectrum& sp) {
    std::vector<std::complex<double>> data = sp.data;
    dft2_inplace(data, sp.width, sp.height, true);
    ChannelImage out(sp.width, sp.height);
    const double scale = 1.0 / (static_cast<double>(sp.width) * sp.height);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = data[i].real() * scale;
    return out;
}

}  // namespace kpl::img
