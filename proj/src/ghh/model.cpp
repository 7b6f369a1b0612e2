#include "kpl/ghh.hpp"

#include <atomic>
#include <cmath>

namespace kpl::ghh {

void GhhModel::touch() {
    static std::atomic<std::uint64_t> counter{0};
    revision = ++counter;
}

void GhhModel::validate() const {
    if (patch_size <= 0 || patch_size % 2 == 0)
        throw ContractError("GhhModel: patch_size must be odd and positive");
    if (filters.empty()) throw ContractError("GhhModel: needs at least one component");
    if (delta.size() != filters.size())
        throw ContractError("GhhModel: delta count does not match component count");
    const int d = dim();
    const std::size_t m = filters.front().size();
    if (m == 0) throw ContractError("GhhModel: component with no hyperplanes");
    for (std::size_t n = 0; n < filters.size(); ++n) {
        if (delta[n] != 1 && delta[n] != -1)
            throw ContractError("GhhModel: delta entries must be +1 or -1");
        if (filters[n].size() != m)
            throw ContractError("GhhModel: ragged hyperplane counts");
        for (const auto& hp : filters[n]) {
            if (hp.taps.size() != d) throw ContractError("GhhModel: filter dimension mismatch");
            if (!hp.taps.allFinite() || !std::isfinite(hp.bias))
                throw ContractError("GhhModel: non-finite filter values");
        }
    }
}

GhhModel make_zero_model(int num_components, int hyperplanes, int patch_size) {
    GhhModel m;
    m.patch_size = patch_size;
    m.delta.assign(static_cast<std::size_t>(num_components), 1);
    m.filters.resize(static_cast<std::size_t>(num_components));
    for (auto& comp : m.filters) {
        comp.resize(static_cast<std::size_t>(hyperplanes));
        for (auto& hp : comp) hp.taps = Eigen::VectorXd::Zero(patch_dim(patch_size));
    }
    return m;
}

img::Filter2d channel_filter(const GhhModel& m, int n, int mm, int c) {
    const int p = m.patch_size;
    img::Filter2d f(p);
    const auto& taps = m.filters[static_cast<std::size_t>(n)][static_cast<std::size_t>(mm)].taps;
    const int off = c * p * p;
    for (int i = 0; i < p * p; ++i) f.taps[static_cast<std::size_t>(i)] = taps(off + i);
    return f;
}

void set_channel_filter(GhhModel& m, int n, int mm, int c, const img::Filter2d& f) {
    const int p = m.patch_size;
    if (f.size != p) throw ContractError("set_channel_filter: size mismatch");
    auto& taps = m.filters[static_cast<std::size_t>(n)][static_cast<std::size_t>(mm)].taps;
    const int off = c * p * p;
    for (int i = 0; i < p * p; ++i) taps(off + i) = f.taps[static_cast<std::size_t>(i)];
}

FeaturePatch patch_at(const img::FeatureStack& fs, int cx, int cy, int patch_size) {
    const int r = (patch_size - 1) / 2;
    if (cx - r < 0 || cy - r < 0 || cx + r >= fs.width || cy + r >= fs.height)
        throw ContractError("patch_at: patch exceeds image bounds");
    FeaturePatch x(patch_dim(patch_size));
    int idx = 0;
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        const auto& ch = fs.chan(c);
        for (int y = cy - r; y <= cy + r; ++y)
            for (int xx = cx - r; xx <= cx + r; ++xx) x(idx++) = ch.at(xx, y);
    }
    return x;
}

}  // namespace kpl::ghh
