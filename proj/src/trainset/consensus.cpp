#include <algorithm>
#include <cmath>

#include "kpl/trainset.hpp"

namespace kpl::trainset {

namespace {

struct Cluster {
    std::vector<const Candidate*> members;  // at most one per image
    double mean_x = 0.0, mean_y = 0.0, mean_scale = 0.0, mean_abs_response = 0.0;

    void finalize() {
        double sx = 0, sy = 0, ss = 0, sr = 0;
        for (const auto* c : members) {
            sx += c->x;
            sy += c->y;
            ss += c->scale;
            sr += std::abs(c->response);
        }
        const double n = static_cast<double>(members.size());
        mean_x = sx / n;
        mean_y = sy / n;
        mean_scale = ss / n;
        mean_abs_response = sr / n;
    }
};

}  // namespace

ConsensusResult consensus_keypoints(const std::vector<std::vector<Candidate>>& per_image,
                                    const ConsensusConfig& cfg) {
    if (per_image.size() < 3)
        throw ContractError("consensus_keypoints: need candidate lists from >= 3 images");
    const int num_images = static_cast<int>(per_image.size());

    // Flat pool sorted by scale ascending; each candidate joins one cluster.
    std::vector<Candidate> pool;
    for (int i = 0; i < num_images; ++i)
        for (Candidate c : per_image[static_cast<std::size_t>(i)]) {
            c.image_id = i;
            if (c.scale <= 0.0) throw ContractError("consensus_keypoints: candidate scale <= 0");
            pool.push_back(c);
        }
    std::vector<int> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const Candidate &ca = pool[static_cast<std::size_t>(a)], &cb = pool[static_cast<std::size_t>(b)];
        if (ca.scale != cb.scale) return ca.scale < cb.scale;
        if (std::abs(ca.response) != std::abs(cb.response))
            return std::abs(ca.response) > std::abs(cb.response);
        if (ca.image_id != cb.image_id) return ca.image_id < cb.image_id;
        if (ca.y != cb.y) return ca.y < cb.y;
        return ca.x < cb.x;
    });

    std::vector<char> used(pool.size(), 0);
    std::vector<Cluster> clusters;
    double scale_sum = 0.0;
    for (const auto& c : pool) scale_sum += c.scale;
    const double mean_scale_all = pool.empty() ? 1.0 : scale_sum / static_cast<double>(pool.size());

    for (int oi : order) {
        if (used[static_cast<std::size_t>(oi)]) continue;
        const Candidate& seed = pool[static_cast<std::size_t>(oi)];
        Cluster cl;
        // Closest unused candidate per image within the seed's scale radius.
        std::vector<int> pick(static_cast<std::size_t>(num_images), -1);
        std::vector<double> pick_d(static_cast<std::size_t>(num_images), 0.0);
        for (std::size_t j = 0; j < pool.size(); ++j) {
            if (used[j]) continue;
            const Candidate& c = pool[j];
            const double d = std::hypot(c.x - seed.x, c.y - seed.y);
            if (d >= seed.scale) continue;
            const auto im = static_cast<std::size_t>(c.image_id);
            if (pick[im] < 0 || d < pick_d[im]) {
                pick[im] = static_cast<int>(j);
                pick_d[im] = d;
            }
        }
        for (int im = 0; im < num_images; ++im)
            if (pick[static_cast<std::size_t>(im)] >= 0) {
                used[static_cast<std::size_t>(pick[static_cast<std::size_t>(im)])] = 1;
                cl.members.push_back(&pool[static_cast<std::size_t>(pick[static_cast<std::size_t>(im)])]);
            }
        cl.finalize();
        clusters.push_back(std::move(cl));
    }

    const int min_support =
        std::max(1, static_cast<int>(std::ceil(cfg.min_support_fraction * num_images)));
    std::vector<Cluster> kept;
    for (auto& cl : clusters)
        if (static_cast<int>(cl.members.size()) >= min_support) kept.push_back(std::move(cl));

    ConsensusResult res;
    if (kept.empty()) {
        res.support_warning = true;
        return res;
    }

    std::stable_sort(kept.begin(), kept.end(), [](const Cluster& a, const Cluster& b) {
        if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
        return a.mean_abs_response > b.mean_abs_response;
    });

    const double min_sep = cfg.min_separation > 0.0 ? cfg.min_separation : mean_scale_all;
    for (const auto& cl : kept) {
        if (static_cast<int>(res.anchors.size()) >= cfg.max_anchors) break;
        bool ok = true;
        for (const auto& a : res.anchors)
            if (std::hypot(a.x - cl.mean_x, a.y - cl.mean_y) < min_sep) {
                ok = false;
                break;
            }
        if (!ok) continue;
        res.anchors.push_back({cl.mean_x, cl.mean_y, static_cast<int>(cl.members.size()),
                               cl.mean_scale, cl.mean_abs_response});
    }
    return res;
}

}  // namespace kpl::trainset
