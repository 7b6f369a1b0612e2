#include <cmath>

#include "kpl/error.hpp"
#include "kpl/learner.hpp"

namespace kpl::learner {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kPi = 3.141592653589793238462643383279502884;

// Conjugate partner of bin (kx, ky) on a p x p grid.
inline std::pair<int, int> partner(int kx, int ky, int p) {
    return {(p - kx) % p, (p - ky) % p};
}

}  // namespace

RealDftPlan make_real_dft_plan(int size) {
    if (size <= 0 || size % 2 == 0)
        throw ContractError("real DFT plan: size must be odd and positive");
    RealDftPlan plan;
    plan.size = size;
    plan.dim = size * size;
    plan.coords.reserve(static_cast<std::size_t>(plan.dim));
    for (int ky = 0; ky < size; ++ky)
        for (int kx = 0; kx < size; ++kx) {
            const auto [px, py] = partner(kx, ky, size);
            if (px == kx && py == ky) {
                plan.coords.push_back({kx, ky, false, false});
            } else if (std::make_pair(ky, kx) < std::make_pair(py, px)) {
                plan.coords.push_back({kx, ky, false, true});
                plan.coords.push_back({kx, ky, true, true});
            }
        }
    if (static_cast<int>(plan.coords.size()) != plan.dim)
        throw NumericalError("real DFT plan: coordinate enumeration mismatch");
    return plan;
}

img::Spectrum RealDftPlan::unitary_dft(const double* tile) const {
    img::ChannelImage ch(size, size);
    for (int i = 0; i < dim; ++i) ch.data[static_cast<std::size_t>(i)] = tile[i];
    img::Spectrum sp = img::dft2(ch);
    const double scale = 1.0 / size;
    for (auto& v : sp.data) v *= scale;
    return sp;
}

Eigen::VectorXd RealDftPlan::to_real(const img::Spectrum& sp) const {
    if (sp.width != size || sp.height != size)
        throw ContractError("real DFT plan: spectrum size mismatch");
    Eigen::VectorXd out(dim);
    for (int r = 0; r < dim; ++r) {
        const Coord& c = coords[static_cast<std::size_t>(r)];
        const std::complex<double> v = sp.at(c.kx, c.ky);
        const double part = c.imag ? v.imag() : v.real();
        out(r) = c.paired ? kSqrt2 * part : part;
    }
    return out;
}

Eigen::VectorXd RealDftPlan::bin_power(const img::Spectrum& sp) const {
    if (sp.width != size || sp.height != size)
        throw ContractError("real DFT plan: spectrum size mismatch");
    Eigen::VectorXd out(dim);
    for (int r = 0; r < dim; ++r) {
        const Coord& c = coords[static_cast<std::size_t>(r)];
        out(r) = std::norm(sp.at(c.kx, c.ky));
    }
    return out;
}

Eigen::MatrixXd RealDftPlan::matrix() const {
    // Row r of the map sends a spatial tile to real coordinate r:
    // sqrt2 * Re / Im of the unitary basis function for paired bins, plain
    // Re for the self-conjugate bin.
    Eigen::MatrixXd phi(dim, dim);
    const double w0 = -2.0 * kPi / size;
    const double scale = 1.0 / size;
    for (int r = 0; r < dim; ++r) {
        const Coord& c = coords[static_cast<std::size_t>(r)];
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double ang = w0 * (c.kx * x + c.ky * y);
                const double part = c.imag ? std::sin(ang) : std::cos(ang);
                const double fac = c.paired ? kSqrt2 : 1.0;
                phi(r, y * size + x) = fac * scale * part;
            }
    }
    return phi;
}

}  // namespace kpl::learner
