#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include <Eigen/Dense>

#include "kpl/learner.hpp"
#include "kpl/rng.hpp"
#include "test_support.hpp"

using namespace kpl;

namespace {

// Flat read/write access to every free parameter of a model, taps first and
// then the bias, hyperplanes in (n, m) order. Used by the finite-difference
// probes below.
double* param_ptr(ghh::GhhModel& model, int idx) {
    for (auto& bank : model.filters)
        for (auto& hp : bank) {
            const int d = static_cast<int>(hp.taps.size());
            if (idx < d) return hp.taps.data() + idx;
            idx -= d;
            if (idx == 0) return &hp.bias;
            idx -= 1;
        }
    REQUIRE(false);
    return nullptr;
}

double grad_entry(const learner::ModelGrad& g, int idx) {
    return g.flatten()(idx);
}

// Smallest distance of any sample to a hinge kink or an argmax switch; the
// finite-difference tests only probe configurations that are safely away
// from both.
double kink_margin(const ghh::GhhModel& model, const trainset::TrainingSet& ts) {
    double margin = 1e300;
    for (int i = 0; i < ts.count(); ++i) {
        const ghh::FeaturePatch x = ts.patches.row(i);
        const double s = ghh::score_patch(model, x);
        margin = std::min(margin, std::abs(1.0 - ts.samples[static_cast<std::size_t>(i)].label * s));
        for (int n = 0; n < model.num_components(); ++n) {
            std::vector<double> resp;
            for (const auto& hp : model.filters[static_cast<std::size_t>(n)])
                resp.push_back(hp.taps.dot(x) + hp.bias);
            std::sort(resp.begin(), resp.end(), std::greater<>());
            if (resp.size() > 1) margin = std::min(margin, resp[0] - resp[1]);
        }
    }
    return margin;
}

template <typename LossFn>
void check_gradient(ghh::GhhModel& model, const learner::ModelGrad& analytic, LossFn&& loss,
                    const std::vector<int>& coords, double tol_abs, double tol_rel) {
    const double h = 1e-5;
    for (int idx : coords) {
        double* p = param_ptr(model, idx);
        const double saved = *p;
        *p = saved + h;
        const double fp = loss(model);
        *p = saved - h;
        const double fm = loss(model);
        *p = saved;
        const double num = (fp - fm) / (2.0 * h);
        const double ana = grad_entry(analytic, idx);
        CHECK(std::abs(num - ana) <= tol_abs + tol_rel * std::abs(ana));
    }
}

std::vector<int> probe_coords(const ghh::GhhModel& model, Rng& rng, int taps_per_hp) {
    std::vector<int> coords;
    int base = 0;
    for (const auto& bank : model.filters)
        for (const auto& hp : bank) {
            const int d = static_cast<int>(hp.taps.size());
            for (int k = 0; k < taps_per_hp; ++k)
                coords.push_back(base + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(d))));
            coords.push_back(base + d);  // the bias
            base += d + 1;
        }
    return coords;
}

}  // namespace

TEST_SUITE("learner") {

TEST_CASE("real-coordinate DFT is an orthogonal change of basis") {
    Rng rng(601);
    for (const int p : {3, 5, 7}) {
        const auto plan = learner::make_real_dft_plan(p);
        CHECK(plan.size == p);
        CHECK(plan.dim == p * p);
        CHECK(static_cast<int>(plan.coords.size()) == p * p);

        const Eigen::MatrixXd M = plan.matrix();
        REQUIRE(M.rows() == p * p);
        REQUIRE(M.cols() == p * p);
        CHECK((M.transpose() * M - Eigen::MatrixXd::Identity(p * p, p * p)).cwiseAbs().maxCoeff() <
              1e-10);

        std::vector<double> tile(static_cast<std::size_t>(p) * p);
        for (auto& v : tile) v = rng.normal();
        const Eigen::Map<const Eigen::VectorXd> tv(tile.data(), p * p);

        const img::Spectrum sp = plan.unitary_dft(tile.data());
        const Eigen::VectorXd r = plan.to_real(sp);
        CHECK((r - M * tv).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(r.squaredNorm() == doctest::Approx(tv.squaredNorm()).epsilon(1e-12));

        // bin_power carries |X_k|^2, totalling the same energy.
        CHECK(plan.bin_power(sp).sum() == doctest::Approx(tv.squaredNorm()).epsilon(1e-12));
    }
}

TEST_CASE("shape template profile") {
    const auto t = learner::shape_template(1.0, 5.0, 21);
    const int c = 10;
    CHECK(t.h.at(c, c) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
    CHECK(t.h.at(c + 5, c) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));  // zero on r = beta
    CHECK(t.h.at(c + 10, c) < 0.0);                                             // negative outside
    for (int d = 1; d <= 10; ++d) {
        CHECK(t.h.at(c + d, c) == t.h.at(c - d, c));
        CHECK(t.h.at(c, c + d) == t.h.at(c, c - d));
    }
    double n2 = 0.0;
    for (double v : t.h.taps) n2 += v * v;
    CHECK(t.h_norm2 == doctest::Approx(n2).epsilon(1e-12));
    // The stored spectrum is unitary, so energy is preserved.
    double e = 0.0;
    for (const auto& z : t.H.data) e += std::norm(z);
    CHECK(e == doctest::Approx(n2).epsilon(1e-10));

    CHECK_THROWS_AS(learner::shape_template(0.0, 5.0, 21), ContractError);
    CHECK_THROWS_AS(learner::shape_template(1.0, 0.0, 21), ContractError);
    CHECK_THROWS_AS(learner::shape_template(1.0, 5.0, 20), ContractError);
}

TEST_CASE("all loss terms vanish appropriately on the zero model") {
    Rng rng(602);
    const auto ts = testkit::random_trainset(rng, 6, 3, 2, 3);
    auto model = ghh::make_zero_model(2, 2, 3);

    // F = 0 everywhere: every hinge is exactly 1.
    CHECK(learner::loss_classification(model, ts, 0.5) == 1.0);
    CHECK(learner::loss_temporal(model, ts, 0.7) == 0.0);

    const auto tmpl = learner::shape_template(1.0, 0.5, 3);
    const auto sq = learner::precompute_shape_quadratic(ts, tmpl, model);
    CHECK(learner::loss_shape_fourier(model, sq, 0.3) == 0.0);
    CHECK(learner::loss_shape_spatial(model, ts, tmpl, 0.3) == 0.0);

    learner::TrainConfig cfg;
    cfg.gamma_c = 0.5;
    cfg.gamma_s = 0.3;
    cfg.gamma_t = 0.7;
    const auto obj = learner::evaluate_objective(model, ts, sq, cfg);
    CHECK(obj.classification == 1.0);
    CHECK(obj.shape == 0.0);
    CHECK(obj.temporal == 0.0);
    CHECK(obj.total == 1.0);
}

TEST_CASE("classification gradient matches finite differences") {
    Rng rng(603);
    const auto ts = testkit::random_trainset(rng, 8, 4, 3, 5);
    auto model = testkit::random_model(rng, 2, 2, 5);
    REQUIRE(kink_margin(model, ts) > 1e-3);

    const double gamma_c = 0.01;
    learner::ModelGrad grad;
    learner::loss_classification(model, ts, gamma_c, &grad);
    const auto coords = probe_coords(model, rng, 6);
    check_gradient(
        model, grad,
        [&](const ghh::GhhModel& m) { return learner::loss_classification(m, ts, gamma_c); },
        coords, 1e-6, 1e-4);
}

TEST_CASE("temporal gradient matches finite differences") {
    Rng rng(604);
    const auto ts = testkit::random_trainset(rng, 8, 4, 3, 5);
    auto model = testkit::random_model(rng, 2, 2, 5);
    REQUIRE(kink_margin(model, ts) > 1e-3);

    const double gamma_t = 0.05;
    learner::ModelGrad grad;
    learner::loss_temporal(model, ts, gamma_t, &grad);
    const auto coords = probe_coords(model, rng, 6);
    check_gradient(model, grad,
                   [&](const ghh::GhhModel& m) { return learner::loss_temporal(m, ts, gamma_t); },
                   coords, 1e-6, 1e-4);
}

TEST_CASE("frequency-domain shape gradient matches finite differences") {
    Rng rng(605);
    const auto ts = testkit::random_trainset(rng, 8, 4, 2, 5);
    auto model = testkit::random_model(rng, 2, 2, 5);

    const double gamma_s = 0.02;
    const auto tmpl = learner::shape_template(1.0, 1.0, 5);
    const auto sq = learner::precompute_shape_quadratic(ts, tmpl, model);
    learner::ModelGrad grad;
    learner::loss_shape_fourier(model, sq, gamma_s, &grad);

    // Tap edits below deliberately skip touch(): the occupancy counts stay
    // frozen, which keeps the probed function the exact quadratic the
    // gradient describes.
    const auto coords = probe_coords(model, rng, 8);
    check_gradient(model, grad,
                   [&](const ghh::GhhModel& m) { return learner::loss_shape_fourier(m, sq, gamma_s); },
                   coords, 1e-7, 1e-5);

    // The quadratic has no bias dependence at all.
    int base = 0;
    for (const auto& bank : model.filters)
        for (const auto& hp : bank) {
            base += static_cast<int>(hp.taps.size());
            CHECK(grad_entry(grad, base) == 0.0);
            base += 1;
        }
}

TEST_CASE("spatial, exact-frequency and mean-frequency shape losses agree on one positive") {
    Rng rng(606);
    for (int trial = 0; trial < 5; ++trial) {
        const auto ts = testkit::random_trainset(rng, 1, 1, 1, 5);  // a single positive
        const auto model = testkit::random_model(rng, 2, 2, 5);
        const auto tmpl = learner::shape_template(1.0, 1.0, 5);
        const double gamma_s = 0.4;

        const double spatial = learner::loss_shape_spatial(model, ts, tmpl, gamma_s);
        const double exact = learner::loss_shape_fourier_exact(model, ts, tmpl, gamma_s);
        const auto sq = learner::precompute_shape_quadratic(ts, tmpl, model);
        const double mean = learner::loss_shape_fourier(model, sq, gamma_s);

        CHECK(exact == doctest::Approx(spatial).epsilon(1e-8));
        CHECK(mean == doctest::Approx(spatial).epsilon(1e-8));
        CHECK(spatial > 0.0);
    }
}

TEST_CASE("exact frequency path equals the spatial loss on many positives") {
    Rng rng(607);
    const auto ts = testkit::random_trainset(rng, 6, 6, 2, 5);  // twelve positives
    const auto model = testkit::random_model(rng, 2, 2, 5);
    const auto tmpl = learner::shape_template(1.2, 1.5, 5);
    const double spatial = learner::loss_shape_spatial(model, ts, tmpl, 0.25);
    const double exact = learner::loss_shape_fourier_exact(model, ts, tmpl, 0.25);
    CHECK(exact == doctest::Approx(spatial).epsilon(1e-8));
}

TEST_CASE("shape and temporal losses are quadratically homogeneous in the taps") {
    Rng rng(608);
    const auto ts = testkit::random_trainset(rng, 6, 3, 2, 5);
    auto model = testkit::random_model(rng, 2, 2, 5);
    for (auto& bank : model.filters)
        for (auto& hp : bank) hp.bias = 0.0;  // homogeneity needs zero offsets
    model.touch();
    const auto tmpl = learner::shape_template(1.0, 1.0, 5);

    const double s1 = learner::loss_shape_spatial(model, ts, tmpl, 0.3);
    const auto sq1 = learner::precompute_shape_quadratic(ts, tmpl, model);
    const double f1 = learner::loss_shape_fourier(model, sq1, 0.3);
    const double t1 = learner::loss_temporal(model, ts, 0.3);

    const double c = 3.0;
    for (auto& bank : model.filters)
        for (auto& hp : bank) hp.taps *= c;
    model.touch();

    CHECK(learner::loss_shape_spatial(model, ts, tmpl, 0.3) ==
          doctest::Approx(c * c * s1).epsilon(1e-10));
    const auto sq2 = learner::precompute_shape_quadratic(ts, tmpl, model);
    CHECK(learner::loss_shape_fourier(model, sq2, 0.3) ==
          doctest::Approx(c * c * f1).epsilon(1e-10));
    CHECK(learner::loss_temporal(model, ts, 0.3) == doctest::Approx(c * c * t1).epsilon(1e-10));
}

TEST_CASE("stale occupancy counts are rejected until refreshed") {
    Rng rng(609);
    const auto ts = testkit::random_trainset(rng, 6, 3, 2, 5);
    auto model = testkit::random_model(rng, 2, 2, 5);
    const auto tmpl = learner::shape_template(1.0, 1.0, 5);
    auto sq = learner::precompute_shape_quadratic(ts, tmpl, model);
    CHECK(learner::loss_shape_fourier(model, sq, 0.1) >= 0.0);

    model.filters[0][0].taps[3] += 0.1;
    model.touch();
    CHECK_THROWS_AS(learner::loss_shape_fourier(model, sq, 0.1), ContractError);

    sq.refresh(model, ts);
    CHECK(learner::loss_shape_fourier(model, sq, 0.1) >= 0.0);
}

TEST_CASE("with every hinge active the refined hyperplane solves the ridge problem") {
    Rng rng(610);
    const auto ts = testkit::random_trainset(rng, 20, 10, 2, 1);  // K = 40, D = 6
    const int K = ts.count();
    const int D = static_cast<int>(ts.dim());
    const double gamma_c = 1.0;

    // Closed-form ridge oracle over [w; b] (bias unpenalized).
    Eigen::MatrixXd Z(K, D + 1);
    Eigen::VectorXd y(K);
    for (int i = 0; i < K; ++i) {
        Z.row(i).head(D) = ts.patches.row(i);
        Z(i, D) = 1.0;
        y(i) = ts.samples[static_cast<std::size_t>(i)].label;
    }
    Eigen::MatrixXd A = Z.transpose() * Z / K;
    for (int d = 0; d < D; ++d) A(d, d) += gamma_c;
    const Eigen::VectorXd theta = A.ldlt().solve(Z.transpose() * y / K);
    const Eigen::VectorXd f_star = Z * theta;
    // Validity of the oracle: every sample keeps a strictly positive hinge.
    for (int i = 0; i < K; ++i) REQUIRE(y(i) * f_star(i) < 0.99);
    const double oracle_obj =
        gamma_c * theta.head(D).squaredNorm() + (f_star - y).squaredNorm() / K;

    auto model = ghh::make_zero_model(1, 1, 1);
    learner::TrainConfig cfg;
    cfg.gamma_c = gamma_c;
    cfg.gamma_s = 0.0;
    cfg.gamma_t = 0.0;
    cfg.newton_iterations = 60;
    cfg.newton_tolerance = 1e-14;
    const auto tmpl = learner::shape_template(1.0, 0.25, 1);
    const auto rpt = learner::newton_refine(model, 0, 0, ts, tmpl, cfg);
    CHECK(rpt.accepted);
    CHECK(rpt.objective_after <= rpt.objective_before);

    const double got = learner::loss_classification(model, ts, gamma_c);
    CHECK(got == doctest::Approx(oracle_obj).epsilon(1e-8));
    for (int i = 0; i < K; ++i) {
        const ghh::FeaturePatch x = ts.patches.row(i);
        CHECK(ghh::score_patch(model, x) == doctest::Approx(f_star(i)).epsilon(1e-5).scale(1.0));
    }
}

TEST_CASE("a degenerate 1x1 greedy run reaches the direct solution") {
    Rng rng(611);
    const auto ts = testkit::random_trainset(rng, 20, 10, 2, 1);
    const int K = ts.count();
    const int D = static_cast<int>(ts.dim());
    const double gamma_c = 1.0;

    Eigen::MatrixXd Z(K, D + 1);
    Eigen::VectorXd y(K);
    for (int i = 0; i < K; ++i) {
        Z.row(i).head(D) = ts.patches.row(i);
        Z(i, D) = 1.0;
        y(i) = ts.samples[static_cast<std::size_t>(i)].label;
    }
    Eigen::MatrixXd A = Z.transpose() * Z / K;
    for (int d = 0; d < D; ++d) A(d, d) += gamma_c;
    const Eigen::VectorXd theta = A.ldlt().solve(Z.transpose() * y / K);
    const Eigen::VectorXd f_star = Z * theta;
    for (int i = 0; i < K; ++i) REQUIRE(y(i) * f_star(i) < 0.99);
    const double oracle_obj =
        gamma_c * theta.head(D).squaredNorm() + (f_star - y).squaredNorm() / K;

    learner::TrainConfig cfg;
    cfg.gamma_c = gamma_c;
    cfg.gamma_s = 0.0;
    cfg.gamma_t = 0.0;
    cfg.num_components = 1;
    cfg.hyperplanes_per_component = 1;
    cfg.newton_iterations = 60;
    cfg.newton_tolerance = 1e-14;
    cfg.refine_sweeps = 2;
    cfg.pca_dim = -1;
    const auto res = learner::train_greedy(ts, cfg);
    CHECK_FALSE(res.improvement_warning);
    const double got = learner::loss_classification(res.model, ts, gamma_c);
    CHECK(got == doctest::Approx(oracle_obj).epsilon(1e-6));
    for (int i = 0; i < K; ++i) {
        const ghh::FeaturePatch x = ts.patches.row(i);
        CHECK(ghh::score_patch(res.model, x) ==
              doctest::Approx(f_star(i)).epsilon(1e-4).scale(1.0));
    }
}

TEST_CASE("hyperplane refinement never worsens the objective") {
    Rng rng(612);
    const auto ts = testkit::random_trainset(rng, 8, 4, 2, 5);
    auto model = testkit::random_model(rng, 2, 2, 5);
    learner::TrainConfig cfg;
    cfg.gamma_c = 0.01;
    cfg.gamma_s = 0.05;
    cfg.gamma_t = 0.02;
    cfg.newton_iterations = 15;
    const auto tmpl = learner::shape_template(1.0, 1.0, 5);
    auto sq = learner::precompute_shape_quadratic(ts, tmpl, model);
    for (int n = 0; n < 2; ++n)
        for (int m = 0; m < 2; ++m) {
            const auto rpt = learner::newton_refine(model, n, m, ts, tmpl, cfg, sq);
            CHECK(rpt.objective_after <= rpt.objective_before + 1e-12);
            // The quadratic must be left fresh for the updated model.
            CHECK_NOTHROW(learner::loss_shape_fourier(model, sq, cfg.gamma_s));
        }
}

TEST_CASE("greedy training: structure, trace monotonicity, trace file") {
    namespace fsys = std::filesystem;
    Rng rng(613);
    auto ts = testkit::random_trainset(rng, 10, 5, 2, 5);
    for (int c = 0; c < img::kFeatureChannels; ++c)
        ts.normalization[static_cast<std::size_t>(c)] = {0.25 * c, 1.0 + 0.1 * c};

    const auto trace_path = fsys::temp_directory_path() / "kpl_test_trace.jsonl";
    learner::TrainConfig cfg;
    cfg.gamma_c = 0.01;
    cfg.gamma_s = 0.02;
    cfg.gamma_t = 0.01;
    cfg.num_components = 2;
    cfg.hyperplanes_per_component = 2;
    cfg.newton_iterations = 10;
    cfg.refine_sweeps = 1;
    cfg.pca_dim = 12;
    cfg.trace_path = trace_path.string();

    const auto res = learner::train_greedy(ts, cfg);
    CHECK(res.model.num_components() == 2);
    CHECK(res.model.hyperplanes_per_component() == 2);
    for (int d : res.model.delta) CHECK((d == 1 || d == -1));
    // Taps come back in full tap space even though training ran reduced.
    for (const auto& bank : res.model.filters)
        for (const auto& hp : bank) CHECK(hp.taps.size() == ghh::patch_dim(5));
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        CHECK(res.model.normalization[static_cast<std::size_t>(c)].mean == 0.25 * c);
        CHECK(res.model.normalization[static_cast<std::size_t>(c)].scale == 1.0 + 0.1 * c);
    }

    REQUIRE(!res.trace.empty());
    CHECK(res.trace.front().event == "init");
    for (std::size_t i = 1; i < res.trace.size(); ++i)
        CHECK(res.trace[i].objective.total <= res.trace[i - 1].objective.total + 1e-12);

    std::ifstream tf(trace_path);
    REQUIRE(tf.good());
    std::string line;
    int lines = 0;
    while (std::getline(tf, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("event"));
        CHECK(j.contains("objective"));
        ++lines;
    }
    CHECK(lines == static_cast<int>(res.trace.size()));
    fsys::remove(trace_path);
}

TEST_CASE("exact shape loss requires full tap space") {
    Rng rng(614);
    const auto ts = testkit::random_trainset(rng, 6, 3, 2, 3);
    learner::TrainConfig cfg;
    cfg.num_components = 1;
    cfg.hyperplanes_per_component = 1;
    cfg.newton_iterations = 5;
    cfg.refine_sweeps = 0;
    cfg.exact_shape = true;
    cfg.pca_dim = 8;
    CHECK_THROWS_AS(learner::train_greedy(ts, cfg), ContractError);

    cfg.pca_dim = -1;
    const auto res = learner::train_greedy(ts, cfg);
    CHECK(res.model.num_components() == 1);
}

TEST_CASE("training set and configuration validation") {
    Rng rng(615);
    trainset::TrainingSet empty;
    empty.patch_size = 3;
    empty.patches.resize(0, ghh::patch_dim(3));
    learner::TrainConfig cfg;
    CHECK_THROWS_AS(learner::train_greedy(empty, cfg), ContractError);

    auto all_pos = testkit::random_trainset(rng, 4, 4, 2, 3);
    CHECK_THROWS_AS(learner::train_greedy(all_pos, cfg), ContractError);

    auto ts = testkit::random_trainset(rng, 4, 2, 2, 3);
    learner::TrainConfig bad = cfg;
    bad.num_components = 0;
    CHECK_THROWS_AS(learner::train_greedy(ts, bad), ContractError);
    bad = cfg;
    bad.gamma_c = -1.0;
    CHECK_THROWS_AS(learner::train_greedy(ts, bad), ContractError);
}

TEST_CASE("log grids are cubes of log-spaced values") {
    const auto single = learner::log_grid(1, 0.01, 1.0);
    REQUIRE(single.size() == 1);
    CHECK(single[0].gamma_c == 0.01);
    CHECK(single[0].gamma_s == 0.01);
    CHECK(single[0].gamma_t == 0.01);

    const auto grid = learner::log_grid(3, 1e-3, 1e-1);
    REQUIRE(grid.size() == 27);
    CHECK(grid.front().gamma_c == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(grid.front().gamma_t == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(grid.back().gamma_c == doctest::Approx(1e-1).epsilon(1e-12));
    CHECK(grid[13].gamma_c == doctest::Approx(1e-2).epsilon(1e-12));  // the middle point
    CHECK(grid[13].gamma_s == doctest::Approx(1e-2).epsilon(1e-12));
    CHECK(grid[13].gamma_t == doctest::Approx(1e-2).epsilon(1e-12));

    CHECK_THROWS_AS(learner::log_grid(0, 0.1, 1.0), ContractError);
    CHECK_THROWS_AS(learner::log_grid(2, 0.0, 1.0), ContractError);
    CHECK_THROWS_AS(learner::log_grid(2, 1.0, 0.1), ContractError);
}

TEST_CASE("grid search scores every distinct point and is deterministic") {
    Rng rng(616);
    const auto ts_train = testkit::random_trainset(rng, 12, 6, 2, 1);
    const auto ts_val = testkit::random_trainset(rng, 8, 4, 2, 1);

    learner::TrainConfig base;
    base.num_components = 1;
    base.hyperplanes_per_component = 1;
    base.newton_iterations = 15;
    base.refine_sweeps = 1;
    base.pca_dim = -1;

    const std::vector<learner::CvPoint> grid = {
        {1e-2, 1e-2, 1e-2}, {1.0, 1e-2, 1e-2}, {1e-2, 1e-2, 1e-2}};  // one duplicate
    const auto res = learner::cross_validate(ts_train, ts_val, grid, base);
    CHECK(res.table.size() == 2);  // duplicates train once
    for (const auto& e : res.table) {
        CHECK(e.accuracy >= 0.0);
        CHECK(e.accuracy <= 1.0);
        CHECK(std::isfinite(e.score));
        CHECK(e.score == doctest::Approx(e.accuracy - e.temporal_spread).epsilon(1e-12));
    }
    const bool best_in_grid =
        (res.best.gamma_c == 1e-2 || res.best.gamma_c == 1.0) && res.best.gamma_s == 1e-2;
    CHECK(best_in_grid);

    const auto res2 = learner::cross_validate(ts_train, ts_val, grid, base);
    CHECK(res2.best.gamma_c == res.best.gamma_c);
    REQUIRE(res2.table.size() == res.table.size());
    for (std::size_t i = 0; i < res.table.size(); ++i)
        CHECK(res2.table[i].score == res.table[i].score);

    CHECK_THROWS_AS(learner::cross_validate(ts_train, ts_val, {}, base), ContractError);
}

}  // TEST_SUITE
