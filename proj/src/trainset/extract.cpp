#include <algorithm>
#include <cmath>

#include "kpl/error.hpp"
#include "kpl/rng.hpp"
#include "kpl/trainset.hpp"

namespace kpl::trainset {

std::vector<int> TrainingSet::temporal_neighbors(int sample_index) const {
    const auto& s = samples[static_cast<std::size_t>(sample_index)];
    std::vector<int> out;
    const auto it = groups.find(s.group);
    if (it == groups.end()) return out;
    for (int j : it->second)
        if (j != sample_index && samples[static_cast<std::size_t>(j)].image_id != s.image_id)
            out.push_back(j);
    return out;
}

ExtractResult extract_samples(const std::vector<img::FeatureStack>& stacks,
                              const std::vector<AnchorLocation>& anchors,
                              const ExtractConfig& cfg) {
    if (stacks.size() < 2) throw ContractError("extract_samples: need at least 2 images");
    const int w = stacks.front().width, h = stacks.front().height;
    for (const auto& fs : stacks)
        if (fs.width != w || fs.height != h)
            throw ContractError("extract_samples: stack images must share dimensions");

    const int p = cfg.patch_size;
    if (p <= 0 || p % 2 == 0) throw ContractError("extract_samples: patch_size must be odd");
    const int r = (p - 1) / 2;
    if (w < p || h < p) throw ContractError("extract_samples: images smaller than patch");

    ExtractResult res;
    res.set.patch_size = p;
    res.set.seed = cfg.seed;

    // Anchors too close to the border are dropped across the whole stack.
    for (const auto& a : anchors) {
        const int cx = static_cast<int>(std::lround(a.x));
        const int cy = static_cast<int>(std::lround(a.y));
        if (cx - r < 0 || cy - r < 0 || cx + r >= w || cy + r >= h) {
            ++res.dropped_anchors;
            continue;
        }
        res.kept_anchors.push_back(a);
    }

    // Negative cells: grid of centers, each far from every kept anchor.
    const double min_dist = cfg.neg_min_dist > 0.0 ? cfg.neg_min_dist : 2.0 * r;
    const int step = cfg.neg_cell_step > 0 ? cfg.neg_cell_step : p;
    std::vector<std::pair<int, int>> cells;
    for (int cy = r; cy + r < h; cy += step)
        for (int cx = r; cx + r < w; cx += step) {
            bool far = true;
            for (const auto& a : res.kept_anchors)
                if (std::hypot(a.x - cx, a.y - cy) < min_dist) {
                    far = false;
                    break;
                }
            if (far) cells.emplace_back(cx, cy);
        }
    if (cfg.max_neg_cells > 0 && static_cast<int>(cells.size()) > cfg.max_neg_cells) {
        Rng rng(cfg.seed);
        std::vector<int> idx(cells.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        rng.shuffle(idx);
        idx.resize(static_cast<std::size_t>(cfg.max_neg_cells));
        std::sort(idx.begin(), idx.end());
        std::vector<std::pair<int, int>> chosen;
        chosen.reserve(idx.size());
        for (int i : idx) chosen.push_back(cells[static_cast<std::size_t>(i)]);
        cells = std::move(chosen);
    }

    const int num_images = static_cast<int>(stacks.size());
    const int num_anchors = static_cast<int>(res.kept_anchors.size());
    const int num_cells = static_cast<int>(cells.size());
    const int K = (num_anchors + num_cells) * num_images;
    const int D = ghh::patch_dim(p);

    TrainingSet& ts = res.set;
    ts.patches.resize(K, D);
    ts.samples.reserve(static_cast<std::size_t>(K));

    int row = 0;
    auto add_sample = [&](int cx, int cy, int label, int group, int image) {
        ts.patches.row(row) = ghh::patch_at(stacks[static_cast<std::size_t>(image)], cx, cy, p);
        ts.samples.push_back({label, group, image});
        ts.groups[group].push_back(row);
        ++row;
    };

    for (int a = 0; a < num_anchors; ++a) {
        const int cx = static_cast<int>(std::lround(res.kept_anchors[static_cast<std::size_t>(a)].x));
        const int cy = static_cast<int>(std::lround(res.kept_anchors[static_cast<std::size_t>(a)].y));
        for (int i = 0; i < num_images; ++i) add_sample(cx, cy, +1, a, i);
    }
    for (int c = 0; c < num_cells; ++c) {
        const auto [cx, cy] = cells[static_cast<std::size_t>(c)];
        for (int i = 0; i < num_images; ++i) add_sample(cx, cy, -1, num_anchors + c, i);
    }

    // Standardization constants from the extracted set itself; stored with
    // the set and later with the model.
    const int p2 = p * p;
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        const auto block = ts.patches.middleCols(c * p2, p2);
        const double mean = K > 0 ? block.mean() : 0.0;
        double var = 0.0;
        if (K > 0) var = (block.array() - mean).square().sum() / static_cast<double>(block.size());
        double scale = std::sqrt(var);
        if (!(scale > 1e-12)) scale = 1.0;
        ts.normalization[static_cast<std::size_t>(c)] = {mean, scale};
        ts.patches.middleCols(c * p2, p2) = (block.array() - mean) / scale;
    }
    return res;
}

}  // namespace kpl::trainset
