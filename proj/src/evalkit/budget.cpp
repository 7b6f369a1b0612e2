#include <algorithm>
#include <map>
#include <vector>

#include "kpl/evalkit.hpp"
#include "kpl/rng.hpp"

namespace kpl::eval {

namespace {

constexpr int kTrials = 10000;
constexpr double kWindow = 0.0025;  // +-0.25 percentage points
constexpr int kBudgetCap = 20000;

// Mean one-to-one repeatability of uniformly random keypoint sets of size k.
// Each k gets its own generator so the estimate does not depend on the
// order in which the search probes budgets.
double random_rate(int k, int w, int h, double threshold_px, std::uint64_t seed) {
    Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k));
    const GroundTruthTransform id = GroundTruthTransform::identity();
    const Extent ext{w, h};

    std::vector<det::Keypoint> a(static_cast<std::size_t>(k)), b(static_cast<std::size_t>(k));
    double acc = 0.0;
    for (int t = 0; t < kTrials; ++t) {
        for (auto& kp : a) {
            kp.x = rng.uniform(0.0, w - 1.0);
            kp.y = rng.uniform(0.0, h - 1.0);
        }
        for (auto& kp : b) {
            kp.x = rng.uniform(0.0, w - 1.0);
            kp.y = rng.uniform(0.0, h - 1.0);
        }
        const RepeatabilityScore rs =
            repeatability(a, b, id, threshold_px, MatchMode::kOneToOne, ext, ext);
        acc += rs.score;
    }
    return acc / kTrials;
}

}  // namespace

int budget_for_random_rate(int image_w, int image_h, double threshold_px, double target_rate,
                           std::uint64_t seed) {
    if (image_w < 2 || image_h < 2)
        throw ContractError("budget_for_random_rate: image too small");
    if (!(target_rate > 0.0 && target_rate < 1.0))
        throw ContractError("budget_for_random_rate: target rate must be in (0,1)");
    if (threshold_px <= 0.0)
        throw ContractError(
            "budget_for_random_rate: zero threshold never matches random keypoints");

    std::map<int, double> cache;
    auto rate = [&](int k) {
        auto it = cache.find(k);
        if (it != cache.end()) return it->second;
        const double r = random_rate(k, image_w, image_h, threshold_px, seed);
        cache.emplace(k, r);
        return r;
    };

    const double lo_edge = target_rate - kWindow, hi_edge = target_rate + kWindow;
    if (rate(1) > hi_edge)
        throw ContractError(
            "budget_for_random_rate: threshold too large, a single random keypoint already "
            "overshoots the target rate");
    if (rate(1) >= lo_edge) return 1;

    // The rate grows with the budget: bracket by doubling, then find the
    // first budget at or above the window's lower edge.
    int lo = 1, hi = 2;
    while (rate(hi) < lo_edge) {
        lo = hi;
        hi *= 2;
        if (hi > kBudgetCap)
            throw ContractError(
                "budget_for_random_rate: target rate not reachable within the budget cap "
                "(threshold too small for this image size?)");
    }
    while (lo + 1 < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (rate(mid) < lo_edge)
            lo = mid;
        else
            hi = mid;
    }

    const double r = rate(hi);
    if (r > hi_edge)
        throw ContractError(
            "budget_for_random_rate: rate window skipped over between consecutive budgets");
    return hi;
}

}  // namespace kpl::eval
