#include <cmath>

#include "kpl/error.hpp"
#include "kpl/learner.hpp"
#include "kpl/rng.hpp"

#include "internal.hpp"

namespace kpl::learner {

namespace {

// The objective restricted to one hyperplane (w, b) with every other
// hyperplane and all active indices frozen. Constant contributions are
// dropped: only differences matter inside the trust-region loop.
struct Restricted {
    int dim = 0;              // tap dimension
    double inv_k = 0.0;       // 1 / K
    double gamma_c = 0.0;
    double gamma_t = 0.0;
    Eigen::MatrixXd xa;       // active samples (eta picks this hyperplane)
    Eigen::VectorXd ya;       // labels of active samples
    Eigen::VectorXd base;     // scores minus this hyperplane's contribution
    double sgn = 1.0;         // component sign

    struct Pair {
        int i_slot = -1;  // -1: endpoint not active (contributes a constant)
        int j_slot = -1;
        double dbase = 0.0;
        double si = 0.0;
        double sj = 0.0;
    };
    std::vector<Pair> pairs;

    double shape_coef = 0.0;           // multiplies w'Qw
    const ShapeQuadratic* shape = nullptr;

    int actives() const { return static_cast<int>(xa.rows()); }

    Eigen::VectorXd responses(const Eigen::VectorXd& w, double b) const {
        if (actives() == 0) return Eigen::VectorXd();
        return ((xa * w).array() + b).matrix();
    }

    double value(const Eigen::VectorXd& w, double b) const {
        KahanSum acc;
        acc.add(gamma_c * w.squaredNorm());
        const Eigen::VectorXd g = responses(w, b);
        for (int a = 0; a < actives(); ++a) {
            const double h = std::max(0.0, 1.0 - ya(a) * (base(a) + sgn * g(a)));
            acc.add(inv_k * h * h);
        }
        if (shape_coef != 0.0) acc.add(shape_coef * shape->quad(w));
        for (const Pair& pr : pairs) {
            const double diff = pr.dbase + (pr.i_slot >= 0 ? pr.si * g(pr.i_slot) : 0.0) -
                                (pr.j_slot >= 0 ? pr.sj * g(pr.j_slot) : 0.0);
            acc.add(gamma_t * inv_k * diff * diff);
        }
        return acc.value();
    }

    // Gradient plus the hinge-active rows used by the generalized Hessian.
    void gradient(const Eigen::VectorXd& w, double b, Eigen::VectorXd& gw, double& gb,
                  std::vector<int>& hinge_rows) const {
        gw = 2.0 * gamma_c * w;
        gb = 0.0;
        hinge_rows.clear();
        const Eigen::VectorXd g = responses(w, b);
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(actives());
        for (int a = 0; a < actives(); ++a) {
            const double h = std::max(0.0, 1.0 - ya(a) * (base(a) + sgn * g(a)));
            if (h > 0.0) {
                hinge_rows.push_back(a);
                coef(a) += -2.0 * inv_k * h * ya(a) * sgn;
            }
        }
        for (const Pair& pr : pairs) {
            const double diff = pr.dbase + (pr.i_slot >= 0 ? pr.si * g(pr.i_slot) : 0.0) -
                                (pr.j_slot >= 0 ? pr.sj * g(pr.j_slot) : 0.0);
            const double c = 2.0 * gamma_t * inv_k * diff;
            if (pr.i_slot >= 0) coef(pr.i_slot) += c * pr.si;
            if (pr.j_slot >= 0) coef(pr.j_slot) -= c * pr.sj;
        }
        if (actives() > 0) {
            gw += xa.transpose() * coef;
            gb += coef.sum();
        }
        if (shape_coef != 0.0) gw += 2.0 * shape_coef * shape->apply(w);
    }

    // Generalized-Hessian product with the hinge active set frozen.
    void hessian_product(const std::vector<int>& hinge_rows, const Eigen::VectorXd& vw, double vb,
                         Eigen::VectorXd& hw, double& hb) const {
        hw = 2.0 * gamma_c * vw;
        hb = 0.0;
        Eigen::VectorXd gv;
        if (actives() > 0) gv = xa * vw;
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(actives());
        for (int a : hinge_rows) coef(a) += 2.0 * inv_k * (gv(a) + vb);
        for (const Pair& pr : pairs) {
            const double t = (pr.i_slot >= 0 ? pr.si * (gv(pr.i_slot) + vb) : 0.0) -
                             (pr.j_slot >= 0 ? pr.sj * (gv(pr.j_slot) + vb) : 0.0);
            const double c = 2.0 * gamma_t * inv_k * t;
            if (pr.i_slot >= 0) coef(pr.i_slot) += c * pr.si;
            if (pr.j_slot >= 0) coef(pr.j_slot) -= c * pr.sj;
        }
        if (actives() > 0) {
            hw += xa.transpose() * coef;
            hb += coef.sum();
        }
        if (shape_coef != 0.0) hw += 2.0 * shape_coef * shape->apply(vw);
    }
};

Restricted build_restricted(const ghh::GhhModel& model, int n, int m,
                            const trainset::TrainingSet& ts, const TrainConfig& cfg,
                            const ShapeQuadratic* sq, const ShapeQuadratic* exact_sub) {
    const detail::ResponseTable rt = detail::compute_responses(model, ts);
    const int K = ts.count();
    Restricted r;
    r.dim = static_cast<int>(ts.dim());
    r.inv_k = 1.0 / K;
    r.gamma_c = cfg.gamma_c;
    r.gamma_t = cfg.gamma_t;
    r.sgn = model.delta[static_cast<std::size_t>(n)];

    std::vector<int> slot(static_cast<std::size_t>(K), -1);
    std::vector<int> rows;
    for (int i = 0; i < K; ++i)
        if (rt.eta(i, n) == m) {
            slot[static_cast<std::size_t>(i)] = static_cast<int>(rows.size());
            rows.push_back(i);
        }
    r.xa.resize(static_cast<int>(rows.size()), r.dim);
    r.ya.resize(static_cast<int>(rows.size()));
    r.base.resize(static_cast<int>(rows.size()));
    for (std::size_t a = 0; a < rows.size(); ++a) {
        const int i = rows[a];
        r.xa.row(static_cast<int>(a)) = ts.patches.row(i);
        r.ya(static_cast<int>(a)) = ts.samples[static_cast<std::size_t>(i)].label;
        r.base(static_cast<int>(a)) = rt.score(i) - r.sgn * rt.resp(i, rt.offset[static_cast<std::size_t>(n)] + m);
    }

    if (cfg.gamma_t > 0.0) {
        for (int i = 0; i < K; ++i)
            for (int j : ts.temporal_neighbors(i)) {
                const int si = slot[static_cast<std::size_t>(i)];
                const int sj = slot[static_cast<std::size_t>(j)];
                if (si < 0 && sj < 0) continue;  // constant pair
                Restricted::Pair pr;
                pr.i_slot = si;
                pr.j_slot = sj;
                pr.si = si >= 0 ? r.sgn : 0.0;
                pr.sj = sj >= 0 ? r.sgn : 0.0;
                const double fi = si >= 0 ? r.base(si) : rt.score(i);
                const double fj = sj >= 0 ? r.base(sj) : rt.score(j);
                pr.dbase = fi - fj;
                r.pairs.push_back(pr);
            }
    }

    if (cfg.gamma_s > 0.0) {
        if (cfg.exact_shape) {
            r.shape = exact_sub;
            r.shape_coef = exact_sub ? cfg.gamma_s / std::max(1, ts.positive_count()) : 0.0;
        } else if (sq && sq->positives > 0) {
            r.shape = sq;
            r.shape_coef = cfg.gamma_s * sq->occupancy(n, m) / sq->positives;
        }
        if (r.shape_coef == 0.0) r.shape = nullptr;
    }
    return r;
}

// Steihaug conjugate gradients: approximately solve H s = -g inside the
// trust region.
Eigen::VectorXd steihaug(const Restricted& r, const std::vector<int>& hinge_rows,
                         const Eigen::VectorXd& grad, double radius) {
    const Eigen::Index dim = grad.size();
    Eigen::VectorXd s = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd res = grad;  // residual of H s + g
    Eigen::VectorXd d = -grad;
    const double gnorm = grad.norm();
    if (gnorm == 0.0) return s;
    const double tol = 1e-6 * gnorm;
    const int max_iter = 2 * static_cast<int>(dim) + 10;
    Eigen::VectorXd hd(dim);
    double res2 = res.squaredNorm();
    for (int it = 0; it < max_iter; ++it) {
        double hb = 0.0;
        Eigen::VectorXd hw;
        r.hessian_product(hinge_rows, d.head(dim - 1), d(dim - 1), hw, hb);
        hd.head(dim - 1) = hw;
        hd(dim - 1) = hb;
        const double dhd = d.dot(hd);
        const double snorm2 = s.squaredNorm();
        const double sd = s.dot(d);
        const double dnorm2 = d.squaredNorm();
        auto boundary_step = [&]() {
            // tau >= 0 with |s + tau d| = radius
            const double disc = std::max(0.0, sd * sd + dnorm2 * (radius * radius - snorm2));
            const double tau = dnorm2 > 0.0 ? (-sd + std::sqrt(disc)) / dnorm2 : 0.0;
            return (s + tau * d).eval();
        };
        if (dhd <= 0.0) return boundary_step();
        const double alpha = res2 / dhd;
        if ((s + alpha * d).norm() >= radius) return boundary_step();
        s += alpha * d;
        res += alpha * hd;
        const double res2_new = res.squaredNorm();
        if (std::sqrt(res2_new) <= tol) return s;
        d = -res + (res2_new / res2) * d;
        res2 = res2_new;
    }
    return s;
}

// Minimizes the restricted objective from (w0, b0). Returns the new point.
void tron_solve(const Restricted& r, Eigen::VectorXd& w, double& b, const TrainConfig& cfg) {
    const Eigen::Index dim = w.size() + 1;
    Eigen::VectorXd z(dim);
    z.head(dim - 1) = w;
    z(dim - 1) = b;
    double radius = 1.0;

    Eigen::VectorXd gw;
    double gb = 0.0;
    std::vector<int> hinge_rows;
    double f = r.value(z.head(dim - 1), z(dim - 1));
    double g0 = -1.0;
    for (int it = 0; it < cfg.newton_iterations; ++it) {
        r.gradient(z.head(dim - 1), z(dim - 1), gw, gb, hinge_rows);
        Eigen::VectorXd grad(dim);
        grad.head(dim - 1) = gw;
        grad(dim - 1) = gb;
        const double gnorm = grad.norm();
        if (g0 < 0.0) g0 = gnorm;
        if (gnorm <= cfg.newton_tolerance * std::max(1.0, g0)) break;

        const Eigen::VectorXd step = steihaug(r, hinge_rows, grad, radius);
        if (step.norm() == 0.0) break;
        Eigen::VectorXd hs(dim);
        {
            Eigen::VectorXd hw;
            double hb = 0.0;
            r.hessian_product(hinge_rows, step.head(dim - 1), step(dim - 1), hw, hb);
            hs.head(dim - 1) = hw;
            hs(dim - 1) = hb;
        }
        const double pred = -(grad.dot(step) + 0.5 * step.dot(hs));
        const Eigen::VectorXd znew = z + step;
        const double fnew = r.value(znew.head(dim - 1), znew(dim - 1));
        if (!std::isfinite(fnew)) throw NumericalError("trust-region step produced a non-finite value");
        const double actual = f - fnew;
        const double rho = pred > 0.0 ? actual / pred : (actual > 0.0 ? 1.0 : -1.0);
        if (actual > 0.0) {
            z = znew;
            f = fnew;
            if (rho > 0.75) radius *= 2.0;
        } else {
            radius *= 0.25;
        }
        if (radius < 1e-14) break;
    }
    w = z.head(dim - 1);
    b = z(dim - 1);
}

}  // namespace

NewtonReport newton_refine(ghh::GhhModel& model, int n, int m, const trainset::TrainingSet& ts,
                           const ShapeTemplate& tmpl, const TrainConfig& cfg, ShapeQuadratic& sq) {
    if (n < 0 || n >= model.num_components() || m < 0 ||
        m >= static_cast<int>(model.filters[static_cast<std::size_t>(n)].size()))
        throw ContractError("newton_refine: hyperplane index out of range");
    if (ts.count() == 0) throw ContractError("newton_refine: empty training set");

    const bool with_shape = cfg.gamma_s > 0.0;
    if (with_shape && !cfg.exact_shape && sq.revision != model.revision) sq.refresh(model, ts);

    auto eval_obj = [&](const ghh::GhhModel& mdl) -> Objective {
        if (with_shape && cfg.exact_shape) {
            Objective obj;
            obj.classification = loss_classification(mdl, ts, cfg.gamma_c);
            obj.shape = loss_shape_spatial(mdl, ts, tmpl, cfg.gamma_s);
            obj.temporal = cfg.gamma_t > 0.0 ? loss_temporal(mdl, ts, cfg.gamma_t) : 0.0;
            obj.total = obj.classification + obj.shape + obj.temporal;
            if (!std::isfinite(obj.total)) throw NumericalError("objective is not finite");
            return obj;
        }
        return evaluate_objective(mdl, ts, sq, cfg);
    };

    NewtonReport report;
    Objective cur = eval_obj(model);
    report.objective_before = cur.total;

    constexpr int kMaxRounds = 3;
    for (int round = 0; round < kMaxRounds; ++round) {
        // Exact mode: quadratic over the positives currently assigned here.
        ShapeQuadratic exact_sub;
        if (with_shape && cfg.exact_shape) {
            const detail::ResponseTable rt = detail::compute_responses(model, ts);
            std::vector<int> rows;
            for (int i = 0; i < ts.count(); ++i)
                if (ts.samples[static_cast<std::size_t>(i)].label > 0 && rt.eta(i, n) == m)
                    rows.push_back(i);
            if (!rows.empty()) {
                exact_sub.patch_size = tmpl.size;
                exact_sub.positives = static_cast<int>(rows.size());
                exact_sub.q_channel = detail::shape_quadratic_spatial_sum(ts, tmpl, rows);
            }
        }
        const Restricted r = build_restricted(model, n, m, ts, cfg, &sq,
                                              exact_sub.positives > 0 ? &exact_sub : nullptr);

        auto& hp = model.filters[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)];
        Eigen::VectorXd w = hp.taps;
        double b = hp.bias;
        tron_solve(r, w, b, cfg);
        if ((w - hp.taps).norm() == 0.0 && b == hp.bias) break;

        const Eigen::VectorXd old_taps = hp.taps;
        const double old_bias = hp.bias;
        const std::uint64_t old_rev = model.revision;
        hp.taps = w;
        hp.bias = b;
        model.touch();
        if (with_shape && !cfg.exact_shape) sq.refresh(model, ts);

        const Objective next = eval_obj(model);
        ++report.rounds;
        if (next.total <= cur.total) {
            const double gain = cur.total - next.total;
            report.accepted = true;
            cur = next;
            if (gain <= 1e-12 * std::max(1.0, std::abs(cur.total))) break;
        } else {
            hp.taps = old_taps;
            hp.bias = old_bias;
            model.revision = old_rev;
            if (with_shape && !cfg.exact_shape) sq.refresh(model, ts);
            break;
        }
    }
    report.objective_after = cur.total;
    report.objective = cur;
    return report;
}

NewtonReport newton_refine(ghh::GhhModel& model, int n, int m, const trainset::TrainingSet& ts,
                           const ShapeTemplate& tmpl, const TrainConfig& cfg) {
    ShapeQuadratic sq;
    if (cfg.gamma_s > 0.0 && !cfg.exact_shape) sq = precompute_shape_quadratic(ts, tmpl, model);
    return newton_refine(model, n, m, ts, tmpl, cfg, sq);
}

}  // namespace kpl::learner
