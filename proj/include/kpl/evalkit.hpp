#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kpl/detector.hpp"
#include "kpl/error.hpp"

namespace kpl::eval {

// Pixel mapping from frame A into frame B. Stacks shot from a fixed
// viewpoint use the identity; planar scenes use a 3x3 homography.
class GroundTruthTransform {
public:
    static GroundTruthTransform identity();
    // Row-major 3x3; throws DataError when not invertible.
    static GroundTruthTransform homography(const std::array<double, 9>& h);

    GroundTruthTransform inverse() const;
    bool is_identity() const { return identity_; }

    // Maps (x, y) in frame A to frame B coordinates.
    void apply(double x, double y, double& ox, double& oy) const;

private:
    GroundTruthTransform() = default;
    bool identity_ = true;
    std::array<double, 9> h_ = {1, 0, 0, 0, 1, 0, 0, 0, 1};
};

// 3x3 whitespace-separated text file.
GroundTruthTransform load_homography(const std::string& path);

struct Extent {
    int width = 0;
    int height = 0;
};

enum class MatchMode { kStandard, kOneToOne };

struct RepeatabilityScore {
    int matched = 0;
    int evaluated = 0;  // min of the two common-region counts
    double score = 0.0;
    double threshold_px = 0.0;
    int budget = 0;  // keypoints requested per image; 0 when unbudgeted
};

// Fraction of keypoints re-detected across two aligned frames.
//
// Keypoints are kept only if they land inside both frames (margin pixels
// away from the edges) under the forward and inverse mapping. Distances are
// symmetrized: d = max(|T(a) - b|, |a - T^-1(b)|), so the one-to-one score
// is exactly invariant under swapping the two sides along with T <-> T^-1.
//
// Standard mode counts keypoints of A with any neighbor within the
// threshold; several of them may share one neighbor, which is the known
// inflation this metric suffers from (its score can then top 1). One-to-one
// mode instead matches greedily in ascending distance order with every
// keypoint usable at most once.
RepeatabilityScore repeatability(const std::vector<det::Keypoint>& kps_a,
                                 const std::vector<det::Keypoint>& kps_b,
                                 const GroundTruthTransform& a_to_b, double threshold_px,
                                 MatchMode mode, Extent frame_a, Extent frame_b,
                                 double margin = 0.0);

// Smallest per-image keypoint budget at which uniformly random detections
// reach the target one-to-one repeatability (Monte-Carlo, 10k trials per
// probe, deterministic in the seed). The random rate grows with the budget;
// if the rate window (+-0.25%) is skipped over or never reached, throws.
int budget_for_random_rate(int image_w, int image_h, double threshold_px,
                           double target_rate = 0.02, std::uint64_t seed = 9001);

// Sequence evaluation: detect (or load) keypoints on every image of a
// directory, score all pairs, aggregate.
struct SequenceConfig {
    double threshold_px = 5.0;
    MatchMode mode = MatchMode::kOneToOne;
    int budget = 0;           // fixed per-image budget; 0 = no cap
    bool budget_2pct = false; // derive the budget from budget_for_random_rate
    double target_rate = 0.02;
    std::uint64_t seed = 9001;
    bool stack = true;        // identity transforms; otherwise H_<a>_<b>.txt required
    bool all_pairs = true;    // otherwise every image against the first
    double margin = 0.0;      // common-region border margin, typically the patch radius
    int nms_radius = 5;
    double scale = 10.0;
    bool separable = false;   // use the model's separable section for scoring
    std::string sequence_name = "sequence";
};

struct PairResult {
    std::string image_a;
    std::string image_b;
    RepeatabilityScore score;
};

struct SequenceReport {
    std::string sequence;
    std::vector<PairResult> pairs;
    double mean = 0.0;
    double stddev = 0.0;
    int budget = 0;
    std::string mode;
};

// `detector` is either a model file (detection is run here) or a directory
// holding one <image-stem>.kp text file per image.
SequenceReport evaluate_sequence(const std::string& dataset_dir, const std::string& detector,
                                 const SequenceConfig& cfg);

// report.csv ("sequence,pair,mode,score,budget") and report.json.
void write_reports(const SequenceReport& rep, const SequenceConfig& cfg,
                   const std::string& out_dir);

}  // namespace kpl::eval
