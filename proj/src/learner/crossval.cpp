#include <algorithm>
#include <cmath>
#include <limits>

#include "kpl/error.hpp"
#include "kpl/learner.hpp"

#include "internal.hpp"

namespace kpl::learner {

std::vector<CvPoint> log_grid(int points, double lo, double hi) {
    if (points < 1) throw ContractError("grid: need at least one point per weight");
    if (!(lo > 0.0) || !(hi >= lo)) throw ContractError("grid: bad weight range");
    std::vector<double> vals;
    if (points == 1) {
        vals.push_back(lo);
    } else {
        const double llo = std::log(lo), lhi = std::log(hi);
        for (int i = 0; i < points; ++i)
            vals.push_back(std::exp(llo + (lhi - llo) * i / (points - 1)));
    }
    std::vector<CvPoint> grid;
    grid.reserve(vals.size() * vals.size() * vals.size());
    for (double c : vals)
        for (double s : vals)
            for (double t : vals) grid.push_back({c, s, t});
    return grid;
}

CvResult cross_validate(const trainset::TrainingSet& ts_train, const trainset::TrainingSet& ts_val,
                        const std::vector<CvPoint>& grid, const TrainConfig& base) {
    if (grid.empty()) throw ContractError("cross-validation: empty grid");
    if (ts_val.count() == 0) throw ContractError("cross-validation: empty validation split");

    // Duplicate points train once.
    std::vector<CvPoint> unique;
    for (const auto& p : grid) {
        const bool seen = std::any_of(unique.begin(), unique.end(), [&](const CvPoint& q) {
            return q.gamma_c == p.gamma_c && q.gamma_s == p.gamma_s && q.gamma_t == p.gamma_t;
        });
        if (!seen) unique.push_back(p);
    }

    CvResult res;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& p : unique) {
        TrainConfig cfg = base;
        cfg.gamma_c = p.gamma_c;
        cfg.gamma_s = p.gamma_s;
        cfg.gamma_t = p.gamma_t;
        cfg.trace_path.clear();
        const TrainResult tr = train_greedy(ts_train, cfg);

        const detail::ResponseTable rt = detail::compute_responses(tr.model, ts_val);
        int correct = 0;
        for (int i = 0; i < ts_val.count(); ++i) {
            const bool pos = ts_val.samples[static_cast<std::size_t>(i)].label > 0;
            if ((rt.score(i) > 0.0) == pos) ++correct;
        }
        const double accuracy = static_cast<double>(correct) / ts_val.count();

        // Within-group response variance relative to the overall variance:
        // small means stable responses across the stack.
        const double mean_all = rt.score.mean();
        const double var_all = (rt.score.array() - mean_all).square().mean();
        double within = 0.0;
        int groups = 0;
        for (const auto& [gid, members] : ts_val.groups) {
            (void)gid;
            if (members.size() < 2) continue;
            double gm = 0.0;
            for (int i : members) gm += rt.score(i);
            gm /= static_cast<double>(members.size());
            double gv = 0.0;
            for (int i : members) gv += (rt.score(i) - gm) * (rt.score(i) - gm);
            within += gv / static_cast<double>(members.size());
            ++groups;
        }
        const double spread = groups > 0 ? (within / groups) / (var_all + 1e-12) : 0.0;

        CvEntry e;
        e.point = p;
        e.accuracy = accuracy;
        e.temporal_spread = spread;
        e.score = accuracy - spread;
        res.table.push_back(e);
        if (e.score > best_score) {
            best_score = e.score;
            res.best = p;
        }
    }
    return res;
}

}  // namespace kpl::learner
