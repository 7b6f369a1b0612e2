#include <cmath>

#include "kpl/error.hpp"
#include "kpl/learner.hpp"
#include "kpl/rng.hpp"

#include "internal.hpp"

namespace kpl::learner {

namespace {

void check_dims(const ghh::GhhModel& model, const trainset::TrainingSet& ts) {
    for (const auto& bank : model.filters)
        for (const auto& hp : bank)
            if (hp.taps.size() != ts.dim())
                throw ContractError("loss: model taps and sample dimension disagree");
}

}  // namespace

ModelGrad ModelGrad::zero(const ghh::GhhModel& model) {
    ModelGrad g;
    g.taps.resize(model.filters.size());
    g.bias.resize(model.filters.size());
    for (std::size_t n = 0; n < model.filters.size(); ++n) {
        g.taps[n].resize(model.filters[n].size());
        g.bias[n].assign(model.filters[n].size(), 0.0);
        for (std::size_t m = 0; m < model.filters[n].size(); ++m)
            g.taps[n][m] = Eigen::VectorXd::Zero(model.filters[n][m].taps.size());
    }
    return g;
}

void ModelGrad::accumulate(const ModelGrad& other, double factor) {
    for (std::size_t n = 0; n < taps.size(); ++n)
        for (std::size_t m = 0; m < taps[n].size(); ++m) {
            taps[n][m] += factor * other.taps[n][m];
            bias[n][m] += factor * other.bias[n][m];
        }
}

Eigen::VectorXd ModelGrad::flatten() const {
    Eigen::Index total = 0;
    for (const auto& bank : taps)
        for (const auto& t : bank) total += t.size() + 1;
    Eigen::VectorXd out(total);
    Eigen::Index pos = 0;
    for (std::size_t n = 0; n < taps.size(); ++n)
        for (std::size_t m = 0; m < taps[n].size(); ++m) {
            out.segment(pos, taps[n][m].size()) = taps[n][m];
            pos += taps[n][m].size();
            out(pos++) = bias[n][m];
        }
    return out;
}

namespace detail {

ResponseTable compute_responses(const ghh::GhhModel& model, const trainset::TrainingSet& ts) {
    const int K = ts.count();
    const int N = model.num_components();
    ResponseTable rt;
    rt.eta.setZero(K, N);
    rt.score.setZero(K);
    rt.offset.assign(static_cast<std::size_t>(N) + 1, 0);
    for (int n = 0; n < N; ++n)
        rt.offset[static_cast<std::size_t>(n) + 1] =
            rt.offset[static_cast<std::size_t>(n)] + static_cast<int>(model.filters[static_cast<std::size_t>(n)].size());
    const int total = rt.offset[static_cast<std::size_t>(N)];
    if (total == 0) {
        rt.resp.resize(K, 0);
        return rt;
    }
    const Eigen::Index d = ts.dim();
    Eigen::MatrixXd w(d, total);
    Eigen::RowVectorXd b(total);
    for (int n = 0; n < N; ++n) {
        const auto& bank = model.filters[static_cast<std::size_t>(n)];
        for (std::size_t m = 0; m < bank.size(); ++m) {
            w.col(rt.offset[static_cast<std::size_t>(n)] + static_cast<int>(m)) = bank[m].taps;
            b(rt.offset[static_cast<std::size_t>(n)] + static_cast<int>(m)) = bank[m].bias;
        }
    }
    rt.resp = ts.patches * w;
    rt.resp.rowwise() += b;
    for (int i = 0; i < K; ++i)
        for (int n = 0; n < N; ++n) {
            const int lo = rt.offset[static_cast<std::size_t>(n)];
            const int hi = rt.offset[static_cast<std::size_t>(n) + 1];
            int best = 0;
            double bestv = rt.resp(i, lo);
            for (int col = lo + 1; col < hi; ++col)
                if (rt.resp(i, col) > bestv) {
                    bestv = rt.resp(i, col);
                    best = col - lo;
                }
            rt.eta(i, n) = best;
            rt.score(i) += model.delta[static_cast<std::size_t>(n)] * bestv;
        }
    return rt;
}

}  // namespace detail

double loss_classification(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                           double gamma_c, ModelGrad* grad) {
    if (ts.count() == 0) throw ContractError("loss: empty training set");
    check_dims(model, ts);
    const int K = ts.count();
    const detail::ResponseTable rt = detail::compute_responses(model, ts);

    KahanSum reg;
    for (const auto& bank : model.filters)
        for (const auto& hp : bank) reg.add(hp.taps.squaredNorm());
    KahanSum hinge;
    for (int i = 0; i < K; ++i) {
        const double y = ts.samples[static_cast<std::size_t>(i)].label;
        const double h = std::max(0.0, 1.0 - y * rt.score(i));
        hinge.add(h * h);
    }
    const double value = gamma_c * reg.value() + hinge.value() / K;

    if (grad) {
        *grad = ModelGrad::zero(model);
        for (std::size_t n = 0; n < model.filters.size(); ++n)
            for (std::size_t m = 0; m < model.filters[n].size(); ++m)
                grad->taps[n][m] = 2.0 * gamma_c * model.filters[n][m].taps;
        for (int i = 0; i < K; ++i) {
            const double y = ts.samples[static_cast<std::size_t>(i)].label;
            const double h = std::max(0.0, 1.0 - y * rt.score(i));
            if (h <= 0.0) continue;
            const double coef = -2.0 * h * y / K;
            for (int n = 0; n < model.num_components(); ++n) {
                const int m = rt.eta(i, n);
                const double s = coef * model.delta[static_cast<std::size_t>(n)];
                grad->taps[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)] +=
                    s * ts.patches.row(i).transpose();
                grad->bias[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)] += s;
            }
        }
    }
    return value;
}

double loss_temporal(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                     double gamma_t, ModelGrad* grad) {
    const int K = ts.count();
    if (K == 0) return 0.0;
    check_dims(model, ts);
    const detail::ResponseTable rt = detail::compute_responses(model, ts);
    if (grad) *grad = ModelGrad::zero(model);

    KahanSum acc;
    for (int i = 0; i < K; ++i) {
        for (int j : ts.temporal_neighbors(i)) {
            const double diff = rt.score(i) - rt.score(j);
            acc.add(diff * diff);
            if (grad && diff != 0.0) {
                const double coef = 2.0 * gamma_t * diff / K;
                for (int n = 0; n < model.num_components(); ++n) {
                    const double dn = model.delta[static_cast<std::size_t>(n)];
                    const int mi = rt.eta(i, n);
                    const int mj = rt.eta(j, n);
                    grad->taps[static_cast<std::size_t>(n)][static_cast<std::size_t>(mi)] +=
                        coef * dn * ts.patches.row(i).transpose();
                    grad->bias[static_cast<std::size_t>(n)][static_cast<std::size_t>(mi)] += coef * dn;
                    grad->taps[static_cast<std::size_t>(n)][static_cast<std::size_t>(mj)] -=
                        coef * dn * ts.patches.row(j).transpose();
                    grad->bias[static_cast<std::size_t>(n)][static_cast<std::size_t>(mj)] -= coef * dn;
                }
            }
        }
    }
    return gamma_t / K * acc.value();
}

Objective evaluate_objective(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                             const ShapeQuadratic& sq, const TrainConfig& cfg) {
    Objective obj;
    obj.classification = loss_classification(model, ts, cfg.gamma_c);
    obj.shape = cfg.gamma_s > 0.0 ? loss_shape_fourier(model, sq, cfg.gamma_s) : 0.0;
    obj.temporal = cfg.gamma_t > 0.0 ? loss_temporal(model, ts, cfg.gamma_t) : 0.0;
    obj.total = obj.classification + obj.shape + obj.temporal;
    if (!std::isfinite(obj.total)) throw NumericalError("objective is not finite");
    return obj;
}

double total_objective(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                       const ShapeTemplate& tmpl, const TrainConfig& cfg) {
    double shape = 0.0;
    if (cfg.gamma_s > 0.0) {
        if (cfg.exact_shape) {
            shape = loss_shape_spatial(model, ts, tmpl, cfg.gamma_s);
        } else {
            const ShapeQuadratic sq = precompute_shape_quadratic(ts, tmpl, model);
            shape = loss_shape_fourier(model, sq, cfg.gamma_s);
        }
    }
    const double cls = loss_classification(model, ts, cfg.gamma_c);
    const double tmp = cfg.gamma_t > 0.0 ? loss_temporal(model, ts, cfg.gamma_t) : 0.0;
    const double total = cls + shape + tmp;
    if (!std::isfinite(total)) throw NumericalError("objective is not finite");
    return total;
}

}  // namespace kpl::learner
