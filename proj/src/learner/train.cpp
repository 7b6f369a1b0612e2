#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>

#include <json.hpp>

#include "kpl/error.hpp"
#include "kpl/learner.hpp"
#include "kpl/rng.hpp"

#include "internal.hpp"

namespace kpl::learner {

namespace detail {

void ridge_fit(const trainset::TrainingSet& ts, const Eigen::VectorXd& targets, double lambda,
               Eigen::VectorXd& w, double& b) {
    const Eigen::Index d = ts.dim();
    Eigen::VectorXd rhs(d + 1);
    rhs.head(d) = ts.patches.transpose() * targets;
    rhs(d) = targets.sum();
    auto apply = [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
        Eigen::VectorXd u = ts.patches * v.head(d);
        u.array() += v(d);
        out.head(d) = ts.patches.transpose() * u + lambda * v.head(d);
        out(d) = u.sum();
    };
    // Conjugate gradients on the normal equations, started from zero.
    Eigen::VectorXd z = Eigen::VectorXd::Zero(d + 1);
    Eigen::VectorXd res = rhs;
    Eigen::VectorXd dir = res, ad(d + 1);
    double r2 = res.squaredNorm();
    const double target2 = 1e-16 * r2;
    const int max_iter = std::min<int>(2 * static_cast<int>(d) + 2, 400);
    for (int it = 0; it < max_iter && r2 > target2 && r2 > 0.0; ++it) {
        apply(dir, ad);
        const double dad = dir.dot(ad);
        if (dad <= 0.0) break;
        const double alpha = r2 / dad;
        z += alpha * dir;
        res -= alpha * ad;
        const double r2n = res.squaredNorm();
        dir = res + (r2n / r2) * dir;
        r2 = r2n;
    }
    w = z.head(d);
    b = z(d);
}

}  // namespace detail

namespace {

Eigen::VectorXd residual_targets(const ghh::GhhModel& model, const trainset::TrainingSet& ts) {
    const detail::ResponseTable rt = detail::compute_responses(model, ts);
    Eigen::VectorXd r(ts.count());
    for (int i = 0; i < ts.count(); ++i) {
        const double y = ts.samples[static_cast<std::size_t>(i)].label;
        r(i) = y * std::max(0.0, 1.0 - y * rt.score(i));
    }
    return r;
}

// Smallest per-sample max response of component n; a new hyperplane with
// zero taps and a bias below this can never become active.
double component_floor(const ghh::GhhModel& model, const trainset::TrainingSet& ts, int n) {
    const detail::ResponseTable rt = detail::compute_responses(model, ts);
    double lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < ts.count(); ++i)
        lo = std::min(lo, rt.resp(i, rt.offset[static_cast<std::size_t>(n)] + rt.eta(i, n)));
    return lo;
}

// Hyperplane of component n that wins the per-sample max most often.
int busiest_hyperplane(const ghh::GhhModel& model, const trainset::TrainingSet& ts, int n) {
    const detail::ResponseTable rt = detail::compute_responses(model, ts);
    std::vector<int> hits(model.filters[static_cast<std::size_t>(n)].size(), 0);
    for (int i = 0; i < ts.count(); ++i) ++hits[static_cast<std::size_t>(rt.eta(i, n))];
    return static_cast<int>(std::max_element(hits.begin(), hits.end()) - hits.begin());
}

void write_trace(const std::string& path, const std::vector<TraceEntry>& trace) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write training trace: " + path);
    for (const auto& e : trace) {
        nlohmann::json j{{"step", e.step},
                         {"event", e.event},
                         {"n", e.n},
                         {"m", e.m},
                         {"classification", e.objective.classification},
                         {"shape", e.objective.shape},
                         {"temporal", e.objective.temporal},
                         {"objective", e.objective.total}};
        os << j.dump() << '\n';
    }
    if (!os) throw DataError("cannot write training trace: " + path);
}

}  // namespace

TrainResult train_greedy(const trainset::TrainingSet& ts, const TrainConfig& cfg) {
    if (ts.count() == 0) throw ContractError("train: empty training set");
    if (ts.positive_count() == 0 || ts.positive_count() == ts.count())
        throw ContractError("train: need both positive and negative samples");
    if (cfg.num_components < 1 || cfg.hyperplanes_per_component < 1)
        throw ContractError("train: model size must be at least 1 x 1");
    if (cfg.gamma_c < 0.0 || cfg.gamma_s < 0.0 || cfg.gamma_t < 0.0)
        throw ContractError("train: loss weights must be nonnegative");
    if (ts.dim() != ghh::patch_dim(ts.patch_size))
        throw ContractError("train: training set must hold full-dimension patches");

    std::optional<trainset::PcaBasis> basis;
    trainset::TrainingSet reduced;
    const trainset::TrainingSet* op = &ts;
    if (cfg.pca_dim >= 0) {
        if (cfg.exact_shape)
            throw ContractError("train: the exact shape path needs full tap space (pca_dim < 0)");
        basis = trainset::fit_pca(ts, cfg.pca_dim);
        reduced = trainset::project(ts, *basis);
        op = &reduced;
    }

    const double beta =
        cfg.shape_beta > 0.0 ? cfg.shape_beta : std::max((ts.patch_size - 1) / 4.0, 0.25);
    const ShapeTemplate tmpl = shape_template(cfg.shape_alpha, beta, ts.patch_size);

    ghh::GhhModel model;
    model.patch_size = ts.patch_size;
    model.normalization = ts.normalization;
    if (basis) model.pca = *basis;

    const bool mean_shape = cfg.gamma_s > 0.0 && !cfg.exact_shape;
    ShapeQuadratic sq;
    if (mean_shape) {
        sq = build_shape_quadratic(ts, tmpl, basis ? &*basis : nullptr);
        sq.refresh(model, *op);
    }
    auto sync_quadratic = [&](const ghh::GhhModel& mdl) {
        if (mean_shape && sq.revision != mdl.revision) sq.refresh(mdl, *op);
    };
    auto eval_obj = [&](const ghh::GhhModel& mdl) -> Objective {
        if (cfg.gamma_s > 0.0 && cfg.exact_shape) {
            Objective o;
            o.classification = loss_classification(mdl, *op, cfg.gamma_c);
            o.shape = loss_shape_spatial(mdl, *op, tmpl, cfg.gamma_s);
            o.temporal = cfg.gamma_t > 0.0 ? loss_temporal(mdl, *op, cfg.gamma_t) : 0.0;
            o.total = o.classification + o.shape + o.temporal;
            if (!std::isfinite(o.total)) throw NumericalError("objective is not finite");
            return o;
        }
        return evaluate_objective(mdl, *op, sq, cfg);
    };

    TrainResult res;
    int step = 0;
    Objective cur = eval_obj(model);
    res.trace.push_back({step++, "init", -1, -1, cur});

    const int N = cfg.num_components;
    const int M = cfg.hyperplanes_per_component;
    for (int n = 0; n < N; ++n) {
        // Open the component: residual-fitted first hyperplane, both signs.
        const Eigen::VectorXd targ = residual_targets(model, *op);
        ghh::GhhModel best_mdl;
        Objective best_obj;
        bool have_best = false;
        for (const int sign : {+1, -1}) {
            ghh::GhhModel mdl = model;
            mdl.delta.push_back(sign);
            ghh::Hyperplane hp;
            detail::ridge_fit(*op, sign > 0 ? targ : Eigen::VectorXd(-targ), cfg.gamma_c, hp.taps,
                              hp.bias);
            mdl.filters.push_back({hp});
            mdl.touch();
            sync_quadratic(mdl);
            const NewtonReport rpt = newton_refine(mdl, n, 0, *op, tmpl, cfg, sq);
            if (!have_best || rpt.objective.total < best_obj.total) {
                have_best = true;
                best_mdl = std::move(mdl);
                best_obj = rpt.objective;
            }
        }
        if (best_obj.total <= cur.total) {
            model = std::move(best_mdl);
            cur = best_obj;
            sync_quadratic(model);
            res.trace.push_back({step, "open-component", n, 0, cur});
        } else {
            // Neutral fallback: a zero hyperplane leaves every response,
            // and therefore the objective, unchanged.
            model.delta.push_back(1);
            ghh::Hyperplane hp;
            hp.taps = Eigen::VectorXd::Zero(op->dim());
            model.filters.push_back({hp});
            model.touch();
            sync_quadratic(model);
            res.improvement_warning = true;
            std::cerr << "warning: component " << n
                      << " could not improve the objective; neutral hyperplane kept\n";
            res.trace.push_back({step, "fallback-hyperplane", n, 0, cur});
        }
        ++step;

        for (int m = 1; m < M; ++m) {
            const Eigen::VectorXd t2 = residual_targets(model, *op);
            ghh::GhhModel mdl = model;
            ghh::Hyperplane hp;
            const int sign = model.delta[static_cast<std::size_t>(n)];
            detail::ridge_fit(*op, sign > 0 ? t2 : Eigen::VectorXd(-t2), cfg.gamma_c, hp.taps,
                              hp.bias);
            mdl.filters[static_cast<std::size_t>(n)].push_back(hp);
            mdl.touch();
            sync_quadratic(mdl);
            NewtonReport rpt = newton_refine(mdl, n, m, *op, tmpl, cfg, sq);
            if (rpt.objective.total > cur.total) {
                // A fresh residual fit grabs the max in the wrong places as
                // often as not. Second attempt: split the busiest hyperplane
                // and nudge the copy toward the residual direction, so the
                // start is response-neutral and Newton only has to improve.
                ghh::GhhModel mdl2 = model;
                ghh::Hyperplane hp2 =
                    model.filters[static_cast<std::size_t>(n)]
                                 [static_cast<std::size_t>(busiest_hyperplane(model, *op, n))];
                hp2.taps += 0.05 * hp.taps;
                hp2.bias += 0.05 * hp.bias;
                mdl2.filters[static_cast<std::size_t>(n)].push_back(hp2);
                mdl2.touch();
                sync_quadratic(mdl2);
                const NewtonReport rpt2 = newton_refine(mdl2, n, m, *op, tmpl, cfg, sq);
                if (rpt2.objective.total < rpt.objective.total) {
                    mdl = std::move(mdl2);
                    rpt = rpt2;
                }
            }
            if (rpt.objective.total <= cur.total) {
                model = std::move(mdl);
                cur = rpt.objective;
                sync_quadratic(model);
                res.trace.push_back({step, "add-hyperplane", n, m, cur});
            } else {
                // Neutral fallback: zero taps with a bias below the
                // component's smallest response can never win the max.
                ghh::Hyperplane neutral;
                neutral.taps = Eigen::VectorXd::Zero(op->dim());
                neutral.bias = component_floor(model, *op, n) - 1.0;
                model.filters[static_cast<std::size_t>(n)].push_back(neutral);
                model.touch();
                sync_quadratic(model);
                res.improvement_warning = true;
                std::cerr << "warning: hyperplane (" << n << ", " << m
                          << ") could not improve the objective; neutral hyperplane kept\n";
                res.trace.push_back({step, "fallback-hyperplane", n, m, cur});
            }
            ++step;
        }
    }

    // Refinement sweeps in seeded-random order; component signs stay fixed.
    std::vector<std::pair<int, int>> order;
    for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) order.emplace_back(n, m);
    Rng rng(cfg.seed);
    for (int sweep = 0; sweep < cfg.refine_sweeps; ++sweep) {
        rng.shuffle(order);
        for (const auto& [n, m] : order) {
            const NewtonReport rpt = newton_refine(model, n, m, *op, tmpl, cfg, sq);
            cur = rpt.objective;
            res.trace.push_back({step++, "sweep-refine", n, m, cur});
        }
    }

    // Return full-resolution spatial taps even if training ran reduced.
    if (basis) {
        const Eigen::VectorXd bmean = basis->basis * basis->mean;
        for (auto& bank : model.filters)
            for (auto& hp : bank) {
                hp.bias -= hp.taps.dot(bmean);
                hp.taps = basis->basis.transpose() * hp.taps;
            }
        model.touch();
    }
    model.validate();

    if (!cfg.trace_path.empty()) write_trace(cfg.trace_path, res.trace);
    res.model = std::move(model);
    return res;
}

}  // namespace kpl::learner
