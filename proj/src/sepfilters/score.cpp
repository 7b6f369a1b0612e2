#include <algorithm>
#include <vector>

#include "kpl/convolve.hpp"
#include "kpl/sepfilters.hpp"

namespace kpl::sep {

ghh::ScoreMap score_map_separable(const ghh::GhhModel& model, const SeparableBank& bank,
                                  const img::FeatureStack& fs) {
    model.validate();
    if (bank.model_hash != model_taps_hash(model))
        throw ContractError("score_map_separable: bank was built for a different model");
    if (bank.patch_size != model.patch_size)
        throw ContractError("score_map_separable: patch size mismatch");
    if (fs.width < model.patch_size || fs.height < model.patch_size)
        throw ContractError("score_map_separable: image smaller than patch");

    const int N = model.num_components();
    const int M = model.hyperplanes_per_component();
    const int S = bank.rank;
    const std::size_t npix = static_cast<std::size_t>(fs.width) * fs.height;

    // Synthesized per-hyperplane responses, built up one atom at a time so
    // only a single atom response image is live at once.
    std::vector<std::vector<double>> resp(static_cast<std::size_t>(N) * M,
                                          std::vector<double>(npix, 0.0));
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        const auto& cb = bank.per_channel[static_cast<std::size_t>(c)];
        for (int s = 0; s < S; ++s) {
            const SeparableFilter& atom = cb.filters[static_cast<std::size_t>(s)];
            // Sliding the atom without flipping == convolving with the
            // reversed taps; borders replicate, matching the dense scorer.
            std::vector<double> row_rev(atom.row.rbegin(), atom.row.rend());
            std::vector<double> col_rev(atom.col.rbegin(), atom.col.rend());
            const img::ChannelImage conv =
                img::convolve_separable(fs.chan(c), row_rev, col_rev, img::ConvMode::kSameReplicate);
            for (int n = 0; n < N; ++n)
                for (int m = 0; m < M; ++m) {
                    const double w = bank.coefficients[static_cast<std::size_t>(n)]
                                                      [static_cast<std::size_t>(m)]
                                                      [static_cast<std::size_t>(c)]
                                                      [static_cast<std::size_t>(s)];
                    if (w == 0.0) continue;
                    double* dst = resp[static_cast<std::size_t>(n) * M + m].data();
                    const double* src = conv.data.data();
                    for (std::size_t i = 0; i < npix; ++i) dst[i] += w * src[i];
                }
        }
    }

    ghh::ScoreMap sm;
    sm.width = fs.width;
    sm.height = fs.height;
    sm.border = model.radius();
    sm.scores.assign(npix, 0.0);

    std::vector<double> comp_max(npix);
    for (int n = 0; n < N; ++n) {
        for (int m = 0; m < M; ++m) {
            const double bias =
                model.filters[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)].bias;
            const double* r = resp[static_cast<std::size_t>(n) * M + m].data();
            if (m == 0) {
                for (std::size_t i = 0; i < npix; ++i) comp_max[i] = r[i] + bias;
            } else {
                for (std::size_t i = 0; i < npix; ++i)
                    comp_max[i] = std::max(comp_max[i], r[i] + bias);
            }
        }
        const double d = model.delta[static_cast<std::size_t>(n)];
        for (std::size_t i = 0; i < npix; ++i) sm.scores[i] += d * comp_max[i];
    }
    return sm;
}

}  // namespace kpl::sep
