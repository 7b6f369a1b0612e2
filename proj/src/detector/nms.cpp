#include "kpl/detector.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kpl::det {

std::vector<Keypoint> nonmax_suppress(const ghh::ScoreMap& map, int radius, double scale) {
    if (radius < 1) throw ContractError("nonmax_suppress: radius must be >= 1");
    std::vector<Keypoint> out;
    const int b = map.border;
    for (int y = b; y < map.height - b; ++y) {
        for (int x = b; x < map.width - b; ++x) {
            const double v = map.at(x, y);
            bool is_max = true;
            // Window clipped to the interior; border scores never compete.
            const int y0 = std::max(b, y - radius), y1 = std::min(map.height - b - 1, y + radius);
            const int x0 = std::max(b, x - radius), x1 = std::min(map.width - b - 1, x + radius);
            for (int yy = y0; yy <= y1 && is_max; ++yy)
                for (int xx = x0; xx <= x1; ++xx) {
                    if (xx == x && yy == y) continue;
                    if (map.at(xx, yy) >= v) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) out.push_back({static_cast<double>(x), static_cast<double>(y), v, scale});
        }
    }
    std::sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b2) {
        if (a.score != b2.score) return a.score > b2.score;
        if (a.y != b2.y) return a.y < b2.y;
        return a.x < b2.x;
    });
    return out;
}

std::vector<Keypoint> select_keypoints(const std::vector<Keypoint>& cands, int budget) {
    if (budget <= 0) throw ContractError("select_keypoints: budget must be positive");
    if (budget >= static_cast<int>(cands.size())) return cands;
    return {cands.begin(), cands.begin() + budget};
}

std::vector<Keypoint> select_keypoints_threshold(const std::vector<Keypoint>& cands,
                                                 double threshold) {
    std::vector<Keypoint> out;
    for (const auto& k : cands)
        if (k.score >= threshold) out.push_back(k);
    return out;
}

void save_keypoints(const std::string& path, const std::vector<Keypoint>& kps) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write keypoints: " + path);
    char line[128];
    for (const auto& k : kps) {
        std::snprintf(line, sizeof(line), "%.6f %.6f %.9g %.6f\n", k.x, k.y, k.score, k.scale);
        out << line;
    }
    if (!out) throw DataError("short write: " + path);
}

std::vector<Keypoint> load_keypoints(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open keypoints: " + path);
    std::vector<Keypoint> kps;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        Keypoint k;
        if (!(ss >> k.x >> k.y >> k.score >> k.scale))
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 'x y score scale'");
        kps.push_back(k);
    }
    return kps;
}

}  // namespace kpl::det
