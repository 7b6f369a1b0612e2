#pragma once

#include <string>
#include <vector>

#include "kpl/ghh.hpp"

namespace kpl::det {

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double score = 0.0;
    double scale = 10.0;
};

// Strict local maxima of the score map within an L-inf window of the given
// radius, interior region only. Ties never survive (a pixel must strictly
// dominate every neighbor). Result is sorted by score descending, then by
// (y, x) for determinism.
std::vector<Keypoint> nonmax_suppress(const ghh::ScoreMap& map, int radius,
                                      double scale = 10.0);

// Top-`budget` keypoints by score. Input must already be sorted by score
// descending; order is preserved.
std::vector<Keypoint> select_keypoints(const std::vector<Keypoint>& cands, int budget);

// All keypoints with score >= threshold, order preserved.
std::vector<Keypoint> select_keypoints_threshold(const std::vector<Keypoint>& cands,
                                                 double threshold);

// Text format "x y score scale", one per line, score-descending.
void save_keypoints(const std::string& path, const std::vector<Keypoint>& kps);
std::vector<Keypoint> load_keypoints(const std::string& path);

}  // namespace kpl::det
