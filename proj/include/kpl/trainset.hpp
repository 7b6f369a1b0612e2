#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kpl/features.hpp"
#include "kpl/ghh.hpp"
#include "kpl/image.hpp"
#include "kpl/pca.hpp"

namespace kpl::trainset {

// A keypoint detected independently in one image of the stack.
struct Candidate {
    double x = 0.0;
    double y = 0.0;
    double scale = 0.0;
    double response = 0.0;
    int image_id = 0;
};

// Consensus location: mean of near-coincident detections across the stack.
struct AnchorLocation {
    double x = 0.0;
    double y = 0.0;
    int support = 0;      // images in which the cluster was detected
    double scale = 0.0;   // mean detection scale
    double response = 0.0;  // mean |response| of the cluster
};

struct DogConfig {
    double sigma0 = 1.6;
    double scale_ratio = 1.259921049894873;  // 2^(1/3)
    int num_scales = 8;                      // blur levels; DoG layers = num_scales - 1
    double contrast_threshold = 1.0;         // on |DoG| of the L channel (L in 0..100)
    int border = 4;                          // extrema closer to the edge are dropped
};

// Multi-scale difference-of-Gaussians extrema on the L channel, integer
// localization, sorted by |response| descending.
std::vector<Candidate> detect_candidates(const img::ChannelImage& luma, const DogConfig& cfg);

struct ConsensusConfig {
    int max_anchors = 100;
    double min_support_fraction = 0.5;
    // Minimum pairwise anchor separation; <= 0 means "mean candidate scale".
    double min_separation = 0.0;
};

struct ConsensusResult {
    std::vector<AnchorLocation> anchors;
    bool support_warning = false;  // no cluster met the support threshold
};

// Clusters per-image candidates (smallest scale first, two detections match
// when their distance is below the seed's scale) and keeps locations seen in
// enough images.
ConsensusResult consensus_keypoints(const std::vector<std::vector<Candidate>>& per_image,
                                    const ConsensusConfig& cfg);

// One labeled sample. Patches live in feature space, standardized with the
// set-wide constants.
struct Sample {
    int label = 0;      // +1 or -1
    int group = 0;      // anchor or cell id; temporal neighbors share it
    int image_id = 0;
};

struct TrainingSet {
    int patch_size = 21;
    Eigen::MatrixXd patches;  // K x D, one row per sample, channel-major features
    std::vector<Sample> samples;
    std::map<int, std::vector<int>> groups;  // group id -> sample indices
    img::StackNorm normalization;
    std::uint64_t seed = 0;

    int count() const { return static_cast<int>(samples.size()); }
    int positive_count() const {
        int k = 0;
        for (const auto& s : samples) k += s.label > 0 ? 1 : 0;
        return k;
    }
    int dim() const { return static_cast<int>(patches.cols()); }

    // Indices of samples in the same group but other images.
    std::vector<int> temporal_neighbors(int sample_index) const;
};

struct ExtractConfig {
    int patch_size = 21;
    // Negative cell centers must be at least this far from every anchor;
    // <= 0 means twice the patch radius.
    double neg_min_dist = 0.0;
    int neg_cell_step = 0;  // grid step; <= 0 means patch_size
    int max_neg_cells = 0;  // 0 = keep all qualifying cells
    std::uint64_t seed = 1;
};

struct ExtractResult {
    TrainingSet set;
    std::vector<AnchorLocation> kept_anchors;
    int dropped_anchors = 0;  // too close to the border
};

// Builds the labeled set: one positive per (anchor, image) including images
// where the detector missed, negatives on a grid of cells far from all
// anchors, one per (cell, image). Patches are standardized with constants
// computed from the extracted set itself.
ExtractResult extract_samples(const std::vector<img::FeatureStack>& stacks,
                              const std::vector<AnchorLocation>& anchors,
                              const ExtractConfig& cfg);

// Top-d principal components of the sample matrix.
PcaBasis fit_pca(const TrainingSet& ts, int d);
Eigen::MatrixXd project(const Eigen::MatrixXd& rows, const PcaBasis& basis);
TrainingSet project(const TrainingSet& ts, const PcaBasis& basis);

// Versioned binary archive (JSON header + raw float64 patch block).
void save_trainset(const std::string& path, const TrainingSet& ts);
TrainingSet load_trainset(const std::string& path);

// External keypoint files: lines "x y scale response".
std::vector<Candidate> load_candidate_file(const std::string& path, int image_id);

}  // namespace kpl::trainset
