#pragma once

#include <complex>
#include <vector>

#include "kpl/image.hpp"

namespace kpl::img {

// Complex 2D spectrum, row-major, same layout as ChannelImage.
struct Spectrum {
    int width = 0;
    int height = 0;
    std::vector<std::complex<double>> data;

    Spectrum() = default;
    Spectrum(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h) {}
    std::complex<double>& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::complex<double> at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// Unnormalized forward 2D DFT (row-column, precomputed twiddles). Intended
// for patch-sized transforms and test oracles, not large-image throughput.
Spectrum dft2(const ChannelImage& ch);

// Inverse with the 1/(W*H) factor; returns the real part.
ChannelImage idft2_real(const Spectrum& sp);

}  // namespace kpl::img
