#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iostream>
#include <vector>

#include "kpl/parallel.hpp"
#include "kpl/sepfilters.hpp"

namespace kpl::sep {

namespace {

void hash_bytes(std::uint64_t& h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

void hash_double(std::uint64_t& h, double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    hash_bytes(h, &bits, sizeof bits);
}

// State of the greedy dictionary fit for one channel.
struct ChannelFit {
    std::vector<Eigen::VectorXd> rows;        // atom row vectors, unit norm
    std::vector<Eigen::VectorXd> cols;        // atom column vectors, unit norm
    Eigen::MatrixXd coeff;                    // F x S mixing weights
    std::vector<double> filter_err2;          // per original filter
};

// Flip signs so the largest-magnitude entry (lowest index on ties) is
// positive; keeps runs reproducible regardless of SVD sign conventions.
void canonical_sign(Eigen::VectorXd& u, Eigen::VectorXd& v) {
    auto fix = [](Eigen::VectorXd& w) {
        int best = 0;
        for (int i = 1; i < w.size(); ++i)
            if (std::abs(w[i]) > std::abs(w[best])) best = i;
        return w[best] < 0.0 ? (w = -w, true) : false;
    };
    fix(u);
    fix(v);
}

// Best shared rank-1 term for a set of residual matrices: minimizes
// sum_f || R_f - alpha_f * u v^T ||_F^2 over unit u, v and free alpha.
// Classic alternation; each half-step has a closed-form optimum given the
// other side, so the captured energy sum_f (u^T R_f v)^2 never decreases.
void fit_rank1(const std::vector<Eigen::MatrixXd>& resid, Eigen::VectorXd& u, Eigen::VectorXd& v,
               int max_iters) {
    const int p = static_cast<int>(resid.front().rows());
    const int F = static_cast<int>(resid.size());

    if (v.size() != p || v.norm() < 1e-300) {
        // Cold start: dominant right-singular direction of the stacked pile.
        Eigen::MatrixXd stacked(F * p, p);
        for (int f = 0; f < F; ++f) stacked.middleRows(f * p, p) = resid[static_cast<std::size_t>(f)];
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinV);
        v = svd.matrixV().col(0);
    }
    v.normalize();

    double energy = 0.0;
    Eigen::MatrixXd y(p, F);
    for (int it = 0; it < max_iters; ++it) {
        for (int f = 0; f < F; ++f) y.col(f) = resid[static_cast<std::size_t>(f)] * v;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd_u(y, Eigen::ComputeThinU);
        u = svd_u.matrixU().col(0);

        for (int f = 0; f < F; ++f) y.col(f) = resid[static_cast<std::size_t>(f)].transpose() * u;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd_v(y, Eigen::ComputeThinU);
        v = svd_v.matrixU().col(0);

        const double e = (y.transpose() * v).squaredNorm();
        if (e - energy <= 1e-12 * std::max(1.0, e)) {
            energy = e;
            break;
        }
        energy = e;
    }
    canonical_sign(u, v);
}

Eigen::MatrixXd atom_matrix(const ChannelFit& fit, int p) {
    const int S = static_cast<int>(fit.rows.size());
    Eigen::MatrixXd a(p * p, S);
    for (int s = 0; s < S; ++s) {
        const Eigen::MatrixXd outer =
            fit.cols[static_cast<std::size_t>(s)] * fit.rows[static_cast<std::size_t>(s)].transpose();
        a.col(s) = Eigen::Map<const Eigen::VectorXd>(outer.data(), p * p);
        // note: Eigen stores column-major, but the flattening is consistent
        // on both sides of the least-squares system, so the order cancels.
    }
    return a;
}

// Least-squares mixing weights for the current dictionary; returns the total
// squared error and refreshes recon/filter_err2.
double solve_coefficients(const std::vector<Eigen::MatrixXd>& targets, ChannelFit& fit,
                          std::vector<Eigen::MatrixXd>& recon, int p) {
    const int F = static_cast<int>(targets.size());
    const int S = static_cast<int>(fit.rows.size());
    const Eigen::MatrixXd a = atom_matrix(fit, p);
    Eigen::MatrixXd gram = a.transpose() * a;
    gram.diagonal().array() += 1e-12;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);

    fit.coeff.resize(F, S);
    double total = 0.0;
    for (int f = 0; f < F; ++f) {
        const Eigen::Map<const Eigen::VectorXd> t(targets[static_cast<std::size_t>(f)].data(), p * p);
        fit.coeff.row(f) = ldlt.solve(a.transpose() * t).transpose();
        Eigen::VectorXd r = a * fit.coeff.row(f).transpose();
        recon[static_cast<std::size_t>(f)] =
            Eigen::Map<const Eigen::MatrixXd>(r.data(), p, p);
        const double e2 = (targets[static_cast<std::size_t>(f)] - recon[static_cast<std::size_t>(f)])
                              .squaredNorm();
        fit.filter_err2[static_cast<std::size_t>(f)] = e2;
        total += e2;
    }
    return total;
}

// One alternating refinement pass: re-fit each atom against the residual it
// is responsible for (Gauss-Seidel over atoms), then re-solve all weights.
double als_round(const std::vector<Eigen::MatrixXd>& targets, ChannelFit& fit,
                 std::vector<Eigen::MatrixXd>& recon, int p) {
    const int F = static_cast<int>(targets.size());
    const int S = static_cast<int>(fit.rows.size());
    std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(F));
    for (int s = 0; s < S; ++s) {
        Eigen::VectorXd& u = fit.cols[static_cast<std::size_t>(s)];
        Eigen::VectorXd& v = fit.rows[static_cast<std::size_t>(s)];
        for (int f = 0; f < F; ++f) {
            partial[static_cast<std::size_t>(f)] =
                targets[static_cast<std::size_t>(f)] - recon[static_cast<std::size_t>(f)] +
                fit.coeff(f, s) * (u * v.transpose());
        }
        const Eigen::VectorXd old_u = u, old_v = v;
        fit_rank1(partial, u, v, 10);
        for (int f = 0; f < F; ++f) {
            const double alpha = u.dot(partial[static_cast<std::size_t>(f)] * v);
            recon[static_cast<std::size_t>(f)] +=
                alpha * (u * v.transpose()) - fit.coeff(f, s) * (old_u * old_v.transpose());
            fit.coeff(f, s) = alpha;
        }
    }
    return solve_coefficients(targets, fit, recon, p);
}

ChannelFit fit_channel(const std::vector<Eigen::MatrixXd>& targets, int S, int p) {
    const int F = static_cast<int>(targets.size());
    ChannelFit fit;
    fit.filter_err2.assign(static_cast<std::size_t>(F), 0.0);
    std::vector<Eigen::MatrixXd> recon(static_cast<std::size_t>(F), Eigen::MatrixXd::Zero(p, p));

    double err2 = 0.0;
    for (int f = 0; f < F; ++f) err2 += targets[static_cast<std::size_t>(f)].squaredNorm();

    std::vector<Eigen::MatrixXd> resid(static_cast<std::size_t>(F));
    for (int s = 0; s < S; ++s) {
        for (int f = 0; f < F; ++f)
            resid[static_cast<std::size_t>(f)] =
                targets[static_cast<std::size_t>(f)] - recon[static_cast<std::size_t>(f)];

        Eigen::VectorXd u, v;
        if (err2 < 1e-24) {
            // Targets already reproduced exactly; pad with basis atoms so the
            // requested rank is honored.
            u = Eigen::VectorXd::Zero(p);
            v = Eigen::VectorXd::Zero(p);
            u[s % p] = 1.0;
            v[(s / p) % p] = 1.0;
        } else {
            fit_rank1(resid, u, v, 30);
        }

        // Grow the dictionary. Keeping a snapshot lets us fall back to "new
        // atom unused" if the refreshed solve ever loses to it numerically,
        // which makes the error provably non-increasing in the rank.
        const ChannelFit before = fit;
        const std::vector<Eigen::MatrixXd> recon_before = recon;
        fit.cols.push_back(u);
        fit.rows.push_back(v);
        double new_err2 = solve_coefficients(targets, fit, recon, p);
        if (new_err2 > err2) {
            fit.coeff.conservativeResize(F, s + 1);
            if (s > 0) fit.coeff.leftCols(s) = before.coeff;
            fit.coeff.col(s).setZero();
            fit.filter_err2 = before.filter_err2;
            recon = recon_before;
            new_err2 = err2;
        }
        err2 = new_err2;

        // Refine with guarded alternating least squares. Later additions get
        // a smaller budget: the dictionary is nearly complete there and the
        // per-round cost grows with the atom count.
        const int rounds = (s + 1) <= 48 ? 100 : 3;
        for (int it = 0; it < rounds && err2 >= 1e-26; ++it) {
            const ChannelFit saved = fit;
            const std::vector<Eigen::MatrixXd> recon_saved = recon;
            const double trial = als_round(targets, fit, recon, p);
            if (trial > err2) {
                fit = saved;
                recon = recon_saved;
                break;
            }
            const double rel = (err2 - trial) / std::max(err2, 1e-300);
            err2 = trial;
            if (rel < 1e-6) break;
        }
    }
    return fit;
}

}  // namespace

std::uint64_t model_taps_hash(const ghh::GhhModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const std::int64_t header[3] = {model.patch_size, model.num_components(),
                                    model.hyperplanes_per_component()};
    hash_bytes(h, header, sizeof header);
    for (int d : model.delta) hash_double(h, static_cast<double>(d));
    for (const auto& comp : model.filters)
        for (const auto& hp : comp) {
            for (int i = 0; i < hp.taps.size(); ++i) hash_double(h, hp.taps[i]);
            hash_double(h, hp.bias);
        }
    return h;
}

SeparableBank approximate_separable(const ghh::GhhModel& model, int rank) {
    model.validate();
    if (rank <= 0) throw ContractError("approximate_separable: rank must be positive");
    const int N = model.num_components();
    const int M = model.hyperplanes_per_component();
    const int p = model.patch_size;
    const int max_rank = p * N * M;
    if (rank > max_rank) {
        std::cerr << "approximate_separable: rank " << rank << " exceeds the exact rank "
                  << max_rank << "; clamping\n";
        rank = max_rank;
    }

    // Per-channel targets, hyperplanes in (n, m) order.
    const int F = N * M;
    std::array<std::vector<Eigen::MatrixXd>, img::kFeatureChannels> targets;
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        targets[static_cast<std::size_t>(c)].reserve(static_cast<std::size_t>(F));
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < M; ++m) {
                const auto& taps = model.filters[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)].taps;
                Eigen::MatrixXd t(p, p);
                for (int y = 0; y < p; ++y)
                    for (int x = 0; x < p; ++x)
                        t(y, x) = taps[(static_cast<std::int64_t>(c) * p + y) * p + x];
                targets[static_cast<std::size_t>(c)].push_back(std::move(t));
            }
    }

    std::array<ChannelFit, img::kFeatureChannels> fits;
    parallel_for(img::kFeatureChannels, [&](int c0, int c1) {
        for (int c = c0; c < c1; ++c)
            fits[static_cast<std::size_t>(c)] = fit_channel(targets[static_cast<std::size_t>(c)], rank, p);
    });

    SeparableBank bank;
    bank.rank = rank;
    bank.patch_size = p;
    bank.model_hash = model_taps_hash(model);
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        auto& cb = bank.per_channel[static_cast<std::size_t>(c)];
        const ChannelFit& fit = fits[static_cast<std::size_t>(c)];
        cb.filters.resize(static_cast<std::size_t>(rank));
        for (int s = 0; s < rank; ++s) {
            const Eigen::VectorXd& u = fit.cols[static_cast<std::size_t>(s)];
            const Eigen::VectorXd& v = fit.rows[static_cast<std::size_t>(s)];
            cb.filters[static_cast<std::size_t>(s)].col.assign(u.data(), u.data() + p);
            cb.filters[static_cast<std::size_t>(s)].row.assign(v.data(), v.data() + p);
        }
    }

    bank.coefficients.resize(static_cast<std::size_t>(N));
    bank.per_filter_error.assign(static_cast<std::size_t>(N),
                                 std::vector<double>(static_cast<std::size_t>(M), 0.0));
    double total2 = 0.0;
    for (int n = 0; n < N; ++n) {
        bank.coefficients[static_cast<std::size_t>(n)].resize(static_cast<std::size_t>(M));
        for (int m = 0; m < M; ++m) {
            const int f = n * M + m;
            double e2 = 0.0;
            for (int c = 0; c < img::kFeatureChannels; ++c) {
                const ChannelFit& fit = fits[static_cast<std::size_t>(c)];
                auto& dst = bank.coefficients[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)]
                                             [static_cast<std::size_t>(c)];
                dst.resize(static_cast<std::size_t>(rank));
                for (int s = 0; s < rank; ++s) dst[static_cast<std::size_t>(s)] = fit.coeff(f, s);
                e2 += fit.filter_err2[static_cast<std::size_t>(f)];
            }
            bank.per_filter_error[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)] = std::sqrt(e2);
            total2 += e2;
        }
    }
    bank.total_error = std::sqrt(total2);
    return bank;
}

}  // namespace kpl::sep
