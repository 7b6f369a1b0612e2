#include <algorithm>
#include <cmath>

#include "kpl/error.hpp"
#include "kpl/learner.hpp"
#include "kpl/parallel.hpp"
#include "kpl/rng.hpp"

#include "internal.hpp"

namespace kpl::learner {

namespace detail {

std::vector<Eigen::MatrixXd> shape_quadratic_spatial_sum(const trainset::TrainingSet& ts,
                                                         const ShapeTemplate& tmpl,
                                                         const std::vector<int>& rows) {
    const int p = tmpl.size;
    const int p2 = p * p;
    if (ts.dim() != img::kFeatureChannels * p2)
        throw ContractError("shape quadratic: needs full tap space samples");
    const RealDftPlan plan = make_real_dft_plan(p);
    const Eigen::MatrixXd phi = plan.matrix();

    std::vector<Eigen::MatrixXd> out(img::kFeatureChannels);
    // Channels are independent; each worker owns whole channels.
    parallel_for(img::kFeatureChannels, [&](int cb, int ce) {
        Eigen::VectorXd patch(ts.dim());
        for (int c = cb; c < ce; ++c) {
            Eigen::MatrixXd q_real = Eigen::MatrixXd::Zero(p2, p2);
            Eigen::VectorXd diag = Eigen::VectorXd::Zero(p2);
            for (int i : rows) {
                patch = ts.patches.row(i);
                const img::Spectrum x_spec = plan.unitary_dft(patch.data() + c * p2);
                img::Spectrum u_spec(p, p);
                for (std::size_t k = 0; k < x_spec.data.size(); ++k)
                    u_spec.data[k] = std::conj(x_spec.data[k]) * tmpl.H.data[k];
                const Eigen::VectorXd x_r = plan.to_real(x_spec);
                const Eigen::VectorXd u_r = plan.to_real(u_spec);
                diag += static_cast<double>(p2) * plan.bin_power(x_spec);
                q_real.selfadjointView<Eigen::Lower>().rankUpdate(x_r, u_r, -static_cast<double>(p));
                q_real.selfadjointView<Eigen::Lower>().rankUpdate(x_r, tmpl.h_norm2);
            }
            Eigen::MatrixXd full = q_real.selfadjointView<Eigen::Lower>();
            full.diagonal() += diag;
            Eigen::MatrixXd spat = phi.transpose() * full * phi;
            out[static_cast<std::size_t>(c)] = 0.5 * (spat + spat.transpose());
        }
    });
    return out;
}

}  // namespace detail

ShapeQuadratic build_shape_quadratic(const trainset::TrainingSet& full_ts, const ShapeTemplate& tmpl,
                                     const trainset::PcaBasis* basis) {
    ShapeQuadratic sq;
    sq.patch_size = tmpl.size;
    std::vector<int> rows;
    for (int i = 0; i < full_ts.count(); ++i)
        if (full_ts.samples[static_cast<std::size_t>(i)].label > 0) rows.push_back(i);
    sq.positives = static_cast<int>(rows.size());
    if (sq.positives == 0) return sq;

    sq.q_channel = detail::shape_quadratic_spatial_sum(full_ts, tmpl, rows);
    for (auto& q : sq.q_channel) q /= sq.positives;

    if (basis) {
        const int p2 = tmpl.size * tmpl.size;
        if (basis->full_dim() != img::kFeatureChannels * p2)
            throw ContractError("shape quadratic: basis dimension mismatch");
        const int d = basis->reduced_dim();
        sq.q_reduced = Eigen::MatrixXd::Zero(d, d);
        for (int c = 0; c < img::kFeatureChannels; ++c) {
            const Eigen::MatrixXd bc = basis->basis.middleCols(c * p2, p2);
            sq.q_reduced += bc * sq.q_channel[static_cast<std::size_t>(c)] * bc.transpose();
        }
        sq.q_reduced = 0.5 * (sq.q_reduced + sq.q_reduced.transpose()).eval();
        sq.reduced = true;
        sq.q_channel.clear();
    }
    return sq;
}

ShapeQuadratic precompute_shape_quadratic(const trainset::TrainingSet& ts, const ShapeTemplate& tmpl,
                                          const ghh::GhhModel& model) {
    if (ts.dim() != img::kFeatureChannels * tmpl.size * tmpl.size)
        throw ContractError("shape quadratic: needs full tap space samples");
    ShapeQuadratic sq = build_shape_quadratic(ts, tmpl, nullptr);
    sq.refresh(model, ts);
    return sq;
}

double ShapeQuadratic::quad(const Eigen::VectorXd& taps) const {
    if (reduced) {
        if (taps.size() != q_reduced.rows())
            throw ContractError("shape quadratic: taps dimension mismatch");
        return taps.dot(q_reduced * taps);
    }
    const int p2 = patch_size * patch_size;
    if (taps.size() != img::kFeatureChannels * p2)
        throw ContractError("shape quadratic: taps dimension mismatch");
    double acc = 0.0;
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        const auto seg = taps.segment(c * p2, p2);
        acc += seg.dot(q_channel[static_cast<std::size_t>(c)] * seg);
    }
    return acc;
}

Eigen::VectorXd ShapeQuadratic::apply(const Eigen::VectorXd& taps) const {
    if (reduced) {
        if (taps.size() != q_reduced.rows())
            throw ContractError("shape quadratic: taps dimension mismatch");
        return q_reduced * taps;
    }
    const int p2 = patch_size * patch_size;
    if (taps.size() != img::kFeatureChannels * p2)
        throw ContractError("shape quadratic: taps dimension mismatch");
    Eigen::VectorXd out(taps.size());
    for (int c = 0; c < img::kFeatureChannels; ++c)
        out.segment(c * p2, p2) = q_channel[static_cast<std::size_t>(c)] * taps.segment(c * p2, p2);
    return out;
}

void ShapeQuadratic::refresh(const ghh::GhhModel& model, const trainset::TrainingSet& ts) {
    const int N = model.num_components();
    int max_m = 0;
    for (const auto& bank : model.filters) max_m = std::max(max_m, static_cast<int>(bank.size()));
    occupancy.setZero(N, max_m);
    if (N > 0 && max_m > 0) {
        const detail::ResponseTable rt = detail::compute_responses(model, ts);
        for (int i = 0; i < ts.count(); ++i) {
            if (ts.samples[static_cast<std::size_t>(i)].label <= 0) continue;
            for (int n = 0; n < N; ++n) ++occupancy(n, rt.eta(i, n));
        }
    }
    revision = model.revision;
}

double loss_shape_fourier(const ghh::GhhModel& model, const ShapeQuadratic& sq, double gamma_s,
                          ModelGrad* grad) {
    if (grad) *grad = ModelGrad::zero(model);
    if (sq.positives == 0) return 0.0;
    if (sq.revision != model.revision)
        throw ContractError("shape quadratic is stale: refresh occupancy after filter changes");
    int max_m = 0;
    for (const auto& bank : model.filters) max_m = std::max(max_m, static_cast<int>(bank.size()));
    if (sq.occupancy.rows() != model.num_components() || sq.occupancy.cols() != max_m)
        throw ContractError("shape quadratic occupancy does not match the model layout");

    KahanSum acc;
    for (int n = 0; n < model.num_components(); ++n)
        for (std::size_t m = 0; m < model.filters[static_cast<std::size_t>(n)].size(); ++m) {
            const int k = sq.occupancy(n, static_cast<int>(m));
            if (k == 0) continue;
            const auto& w = model.filters[static_cast<std::size_t>(n)][m].taps;
            acc.add(k * sq.quad(w));
            if (grad)
                grad->taps[static_cast<std::size_t>(n)][m] +=
                    2.0 * gamma_s * k / sq.positives * sq.apply(w);
        }
    return gamma_s / sq.positives * acc.value();
}

double loss_shape_fourier_exact(const ghh::GhhModel& model, const trainset::TrainingSet& ts,
                                const ShapeTemplate& tmpl, double gamma_s) {
    const int p = tmpl.size;
    const int p2 = p * p;
    if (ts.dim() != img::kFeatureChannels * p2)
        throw ContractError("shape loss: exact path needs full tap space");
    const int kp = ts.positive_count();
    if (kp == 0) return 0.0;
    const RealDftPlan plan = make_real_dft_plan(p);
    const detail::ResponseTable rt = detail::compute_responses(model, ts);

    const int N = model.num_components();
    // Real coordinates of every filter channel, computed once.
    std::vector<std::vector<std::vector<Eigen::VectorXd>>> w_r(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        const auto& bank = model.filters[static_cast<std::size_t>(n)];
        w_r[static_cast<std::size_t>(n)].resize(bank.size());
        for (std::size_t m = 0; m < bank.size(); ++m) {
            const auto& taps = bank[m].taps;
            if (taps.size() != ts.dim())
                throw ContractError("shape loss: model taps and sample dimension disagree");
            auto& per_chan = w_r[static_cast<std::size_t>(n)][m];
            per_chan.resize(img::kFeatureChannels);
            for (int c = 0; c < img::kFeatureChannels; ++c)
                per_chan[static_cast<std::size_t>(c)] = plan.to_real(plan.unitary_dft(taps.data() + c * p2));
        }
    }

    KahanSum acc;
    Eigen::VectorXd patch(ts.dim());
    for (int i = 0; i < ts.count(); ++i) {
        if (ts.samples[static_cast<std::size_t>(i)].label <= 0) continue;
        patch = ts.patches.row(i);
        for (int c = 0; c < img::kFeatureChannels; ++c) {
            const img::Spectrum x_spec = plan.unitary_dft(patch.data() + c * p2);
            img::Spectrum u_spec(p, p);
            for (std::size_t k = 0; k < x_spec.data.size(); ++k)
                u_spec.data[k] = std::conj(x_spec.data[k]) * tmpl.H.data[k];
            const Eigen::VectorXd x_r = plan.to_real(x_spec);
            const Eigen::VectorXd u_r = plan.to_real(u_spec);
            const Eigen::VectorXd pow = plan.bin_power(x_spec);
            for (int n = 0; n < N; ++n) {
                const Eigen::VectorXd& w =
                    w_r[static_cast<std::size_t>(n)][static_cast<std::size_t>(rt.eta(i, n))]
                       [static_cast<std::size_t>(c)];
                const double dot_x = x_r.dot(w);
                const double dot_u = u_r.dot(w);
                acc.add(p2 * pow.dot(w.cwiseAbs2()) - 2.0 * p * dot_x * dot_u +
                        tmpl.h_norm2 * dot_x * dot_x);
            }
        }
    }
    return gamma_s / kp * acc.value();
}

}  // namespace kpl::learner
