#include <limits>

#include "kpl/ghh.hpp"
#include "kpl/parallel.hpp"

namespace kpl::ghh {

namespace {

void check_patch(const GhhModel& model, const FeaturePatch& patch) {
    if (patch.size() != model.dim())
        throw ContractError("score_patch: patch dimension mismatch");
}

double component_max(const GhhModel& model, const FeaturePatch& patch, int n, int* arg) {
    const auto& comp = model.filters[static_cast<std::size_t>(n)];
    double best = -std::numeric_limits<double>::infinity();
    int best_m = 0;
    for (int m = 0; m < static_cast<int>(comp.size()); ++m) {
        const double v = comp[static_cast<std::size_t>(m)].taps.dot(patch) +
                         comp[static_cast<std::size_t>(m)].bias;
        if (v > best) {
            best = v;
            best_m = m;
        }
    }
    if (arg) *arg = best_m;
    return best;
}

}  // namespace

double score_patch(const GhhModel& model, const FeaturePatch& patch) {
    check_patch(model, patch);
    double sum = 0.0;
    for (int n = 0; n < model.num_components(); ++n)
        sum += model.delta[static_cast<std::size_t>(n)] * component_max(model, patch, n, nullptr);
    return sum;
}

int active_index(const GhhModel& model, const FeaturePatch& patch, int n) {
    check_patch(model, patch);
    int arg = 0;
    component_max(model, patch, n, &arg);
    return arg;
}

namespace {

// Dense response of one hyperplane: cross-correlation of each channel filter
// with its channel, summed, plus bias. Replicate padding outside.
void hyperplane_response(const GhhModel& model, const img::FeatureStack& fs, int n, int m,
                         std::vector<double>& out) {
    const int w = fs.width, h = fs.height;
    const int p = model.patch_size, r = model.radius();
    const auto& hp = model.filters[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)];
    const double* taps = hp.taps.data();
    const double bias = hp.bias;

    parallel_for(h, [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y) {
            const bool yin = y >= r && y < h - r;
            for (int x = 0; x < w; ++x) {
                double acc = bias;
                if (yin && x >= r && x < w - r) {
                    for (int c = 0; c < img::kFeatureChannels; ++c) {
                        const double* chan = fs.chan(c).data.data();
                        const double* tap = taps + static_cast<std::size_t>(c) * p * p;
                        for (int b = 0; b < p; ++b) {
                            const double* src = chan + static_cast<std::size_t>(y - r + b) * w + (x - r);
                            const double* trow = tap + static_cast<std::size_t>(b) * p;
                            double row_acc = 0.0;
                            for (int a = 0; a < p; ++a) row_acc += trow[a] * src[a];
                            acc += row_acc;
                        }
                    }
                } else {
                    auto cl = [](int v, int nmax) { return v < 0 ? 0 : (v >= nmax ? nmax - 1 : v); };
                    for (int c = 0; c < img::kFeatureChannels; ++c) {
                        const auto& chan = fs.chan(c);
                        const double* tap = taps + static_cast<std::size_t>(c) * p * p;
                        for (int b = 0; b < p; ++b) {
                            const int yy = cl(y - r + b, h);
                            for (int a = 0; a < p; ++a)
                                acc += tap[static_cast<std::size_t>(b) * p + a] * chan.at(cl(x - r + a, w), yy);
                        }
                    }
                }
                out[static_cast<std::size_t>(y) * w + x] = acc;
            }
        }
    });
}

}  // namespace

ScoreMap score_map(const GhhModel& model, const img::FeatureStack& fs) {
    model.validate();
    if (fs.width < model.patch_size || fs.height < model.patch_size)
        throw ContractError("score_map: image smaller than patch");

    const std::size_t npix = static_cast<std::size_t>(fs.width) * fs.height;
    ScoreMap sm;
    sm.width = fs.width;
    sm.height = fs.height;
    sm.border = model.radius();
    sm.scores.assign(npix, 0.0);

    std::vector<double> resp(npix);
    std::vector<double> comp_max(npix);
    for (int n = 0; n < model.num_components(); ++n) {
        const int M = model.hyperplanes_per_component();
        for (int m = 0; m < M; ++m) {
            hyperplane_response(model, fs, n, m, resp);
            if (m == 0) {
                comp_max = resp;
            } else {
                for (std::size_t i = 0; i < npix; ++i)
                    if (resp[i] > comp_max[i]) comp_max[i] = resp[i];
            }
        }
        const double d = model.delta[static_cast<std::size_t>(n)];
        for (std::size_t i = 0; i < npix; ++i) sm.scores[i] += d * comp_max[i];
    }
    return sm;
}

}  // namespace kpl::ghh
