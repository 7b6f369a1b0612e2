#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "kpl/evalkit.hpp"

namespace kpl::eval {

namespace {

double det3(const std::array<double, 9>& h) {
    return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
           h[2] * (h[3] * h[7] - h[4] * h[6]);
}

std::array<double, 9> inv3(const std::array<double, 9>& h, double d) {
    const double id = 1.0 / d;
    return {(h[4] * h[8] - h[5] * h[7]) * id, (h[2] * h[7] - h[1] * h[8]) * id,
            (h[1] * h[5] - h[2] * h[4]) * id, (h[5] * h[6] - h[3] * h[8]) * id,
            (h[0] * h[8] - h[2] * h[6]) * id, (h[2] * h[3] - h[0] * h[5]) * id,
            (h[3] * h[7] - h[4] * h[6]) * id, (h[1] * h[6] - h[0] * h[7]) * id,
            (h[0] * h[4] - h[1] * h[3]) * id};
}

}  // namespace

GroundTruthTransform GroundTruthTransform::identity() { return GroundTruthTransform{}; }

GroundTruthTransform GroundTruthTransform::homography(const std::array<double, 9>& h) {
    const double d = det3(h);
    if (std::abs(d) <= 1e-12) throw DataError("homography is singular");
    GroundTruthTransform t;
    t.identity_ = false;
    t.h_ = h;
    return t;
}

GroundTruthTransform GroundTruthTransform::inverse() const {
    if (identity_) return *this;
    return homography(inv3(h_, det3(h_)));
}

void GroundTruthTransform::apply(double x, double y, double& ox, double& oy) const {
    if (identity_) {
        ox = x;
        oy = y;
        return;
    }
    const double w = h_[6] * x + h_[7] * y + h_[8];
    if (std::abs(w) < 1e-300) throw NumericalError("homography maps point to infinity");
    ox = (h_[0] * x + h_[1] * y + h_[2]) / w;
    oy = (h_[3] * x + h_[4] * y + h_[5]) / w;
}

GroundTruthTransform load_homography(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open homography file: " + path);
    std::array<double, 9> h{};
    for (double& v : h)
        if (!(in >> v)) throw DataError("homography file needs 9 numbers: " + path);
    return GroundTruthTransform::homography(h);
}

namespace {

struct Projected {
    double x, y;    // original position
    double px, py;  // position mapped into the other frame
};

bool inside(double x, double y, Extent e, double margin) {
    return x >= margin && y >= margin && x <= e.width - 1 - margin && y <= e.height - 1 - margin;
}

// Keep keypoints visible in both frames: the original inside its own frame
// and the projection inside the other one.
std::vector<Projected> common_region(const std::vector<det::Keypoint>& kps,
                                     const GroundTruthTransform& t, Extent own, Extent other,
                                     double margin) {
    std::vector<Projected> out;
    out.reserve(kps.size());
    for (const auto& k : kps) {
        double px, py;
        t.apply(k.x, k.y, px, py);
        if (inside(k.x, k.y, own, margin) && inside(px, py, other, margin))
            out.push_back({k.x, k.y, px, py});
    }
    return out;
}

struct CandidatePair {
    double dist;
    int i, j;
};

}  // namespace

RepeatabilityScore repeatability(const std::vector<det::Keypoint>& kps_a,
                                 const std::vector<det::Keypoint>& kps_b,
                                 const GroundTruthTransform& a_to_b, double threshold_px,
                                 MatchMode mode, Extent frame_a, Extent frame_b, double margin) {
    if (kps_a.empty() || kps_b.empty())
        throw ContractError("repeatability: keypoint lists must be nonempty");
    if (threshold_px < 0.0) throw ContractError("repeatability: negative threshold");

    const GroundTruthTransform b_to_a = a_to_b.inverse();
    const std::vector<Projected> a = common_region(kps_a, a_to_b, frame_a, frame_b, margin);
    const std::vector<Projected> b = common_region(kps_b, b_to_a, frame_b, frame_a, margin);

    RepeatabilityScore rs;
    rs.threshold_px = threshold_px;
    rs.evaluated = static_cast<int>(std::min(a.size(), b.size()));
    if (rs.evaluated == 0) return rs;

    // Symmetrized distance: the larger of the two projection residuals.
    // max(x, y) is commutative in floating point, so swapping the inputs
    // (with the inverse transform) reproduces the same doubles exactly.
    auto dist = [&](const Projected& ka, const Projected& kb) {
        const double fwd = std::hypot(ka.px - kb.x, ka.py - kb.y);
        const double bwd = std::hypot(kb.px - ka.x, kb.py - ka.y);
        return std::max(fwd, bwd);
    };

    if (mode == MatchMode::kStandard) {
        int matched = 0;
        for (const auto& ka : a) {
            for (const auto& kb : b) {
                if (dist(ka, kb) <= threshold_px) {
                    ++matched;
                    break;
                }
            }
        }
        rs.matched = matched;
        rs.score = static_cast<double>(matched) / rs.evaluated;
        return rs;
    }

    std::vector<CandidatePair> cands;
    for (int i = 0; i < static_cast<int>(a.size()); ++i)
        for (int j = 0; j < static_cast<int>(b.size()); ++j) {
            const double d = dist(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]);
            if (d <= threshold_px) cands.push_back({d, i, j});
        }
    // Ascending distance; ties broken by swap-invariant keys so the greedy
    // outcome does not depend on which list is called A.
    std::sort(cands.begin(), cands.end(), [](const CandidatePair& u, const CandidatePair& v) {
        if (u.dist != v.dist) return u.dist < v.dist;
        if (u.i + u.j != v.i + v.j) return u.i + u.j < v.i + v.j;
        if (u.i * u.j != v.i * v.j) return u.i * u.j < v.i * v.j;
        return std::min(u.i, u.j) < std::min(v.i, v.j);
    });

    std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
    int matched = 0;
    for (const auto& c : cands) {
        if (used_a[static_cast<std::size_t>(c.i)] || used_b[static_cast<std::size_t>(c.j)]) continue;
        used_a[static_cast<std::size_t>(c.i)] = 1;
        used_b[static_cast<std::size_t>(c.j)] = 1;
        ++matched;
    }
    rs.matched = matched;
    rs.score = static_cast<double>(matched) / rs.evaluated;
    return rs;
}

}  // namespace kpl::eval
