#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kpl/ghh.hpp"

namespace kpl::sep {

// One rank-1 atom: outer product col * row^T, both of length patch_size.
struct SeparableFilter {
    std::vector<double> row;
    std::vector<double> col;
};

// Shared per-channel dictionary of separable filters plus, for every
// original hyperplane filter, the mixing weights onto that dictionary.
struct SeparableBank {
    int rank = 0;  // S: atoms per channel
    int patch_size = 0;
    // per_channel[c].filters has `rank` atoms.
    struct ChannelBank {
        std::vector<SeparableFilter> filters;
    };
    std::array<ChannelBank, img::kFeatureChannels> per_channel;
    // coefficients[n][m][c][s]
    std::vector<std::vector<std::array<std::vector<double>, img::kFeatureChannels>>> coefficients;
    // Frobenius reconstruction error over all filters, and per (n,m) filter.
    double total_error = 0.0;
    std::vector<std::vector<double>> per_filter_error;  // [n][m]
    // Hash of the model's taps used to detect bank/model mismatches.
    std::uint64_t model_hash = 0;
};

// FNV-1a over the model's filter taps and biases.
std::uint64_t model_taps_hash(const ghh::GhhModel& model);

// Learns the shared dictionary greedily (one atom at a time, refined by
// alternating least squares after each addition). Adding atoms never
// increases the reconstruction error, so the error is monotone in S. S is
// clamped to patch_size * N * M with a warning.
SeparableBank approximate_separable(const ghh::GhhModel& model, int rank);

// Dense scoring through the separable dictionary. Same contract as
// ghh::score_map up to the recorded reconstruction error.
ghh::ScoreMap score_map_separable(const ghh::GhhModel& model, const SeparableBank& bank,
                                  const img::FeatureStack& fs);

}  // namespace kpl::sep
