#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "kpl/rng.hpp"
#include "kpl/trainset.hpp"
#include "test_support.hpp"

using namespace kpl;

namespace {

img::ChannelImage gaussian_spot(int w, int h, double cx, double cy, double sigma, double amp,
                                double bg) {
    img::ChannelImage ch(w, h, bg);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            ch.at(x, y) += amp * std::exp(-d2 / (2.0 * sigma * sigma));
        }
    return ch;
}

}  // namespace

TEST_SUITE("trainset") {

TEST_CASE("blob detection localizes an isolated spot") {
    const double cx = 32.0, cy = 40.0;
    const img::ChannelImage luma = gaussian_spot(64, 64, cx, cy, 3.0, 40.0, 50.0);
    trainset::DogConfig cfg;
    const auto cands = trainset::detect_candidates(luma, cfg);
    REQUIRE(!cands.empty());
    // Strongest response lands on the spot.
    CHECK(std::hypot(cands.front().x - cx, cands.front().y - cy) <= 2.0);
    CHECK(std::abs(cands.front().response) >= cfg.contrast_threshold);
    // Sorted by |response| descending.
    for (std::size_t i = 1; i < cands.size(); ++i)
        CHECK(std::abs(cands[i - 1].response) >= std::abs(cands[i].response));
}

TEST_CASE("flat images produce no candidates") {
    const img::ChannelImage flat(64, 64, 77.0);
    CHECK(trainset::detect_candidates(flat, trainset::DogConfig{}).empty());
}

TEST_CASE("border extrema are dropped") {
    trainset::DogConfig cfg;
    cfg.border = 10;
    const img::ChannelImage luma = gaussian_spot(64, 64, 5.0, 32.0, 2.5, 60.0, 50.0);
    for (const auto& c : trainset::detect_candidates(luma, cfg)) {
        CHECK(c.x >= 10);
        CHECK(c.x < 54);
        CHECK(c.y >= 10);
        CHECK(c.y < 54);
    }
}

TEST_CASE("consensus keeps well-supported clusters and averages them") {
    // Cluster A in all four images (jittered), cluster B in two, C in one.
    std::vector<std::vector<trainset::Candidate>> per_image(4);
    const double jit[4] = {0.4, -0.3, 0.2, -0.1};
    for (int i = 0; i < 4; ++i)
        per_image[static_cast<std::size_t>(i)].push_back({50.0 + jit[i], 50.0 - jit[i], 4.0, 30.0, i});
    per_image[0].push_back({90.0, 30.0, 4.0, 20.0, 0});
    per_image[2].push_back({90.3, 30.1, 4.0, 20.0, 2});
    per_image[1].push_back({20.0, 70.0, 4.0, 50.0, 1});

    trainset::ConsensusConfig cfg;
    cfg.min_support_fraction = 0.5;  // >= 2 of 4 images
    cfg.min_separation = 8.0;
    const auto res = trainset::consensus_keypoints(per_image, cfg);
    REQUIRE(res.anchors.size() == 2);
    CHECK_FALSE(res.support_warning);

    // Best-supported first.
    CHECK(res.anchors[0].support == 4);
    CHECK(res.anchors[0].x == doctest::Approx(50.0 + (0.4 - 0.3 + 0.2 - 0.1) / 4).epsilon(1e-12));
    CHECK(res.anchors[0].y == doctest::Approx(50.0 - (0.4 - 0.3 + 0.2 - 0.1) / 4).epsilon(1e-12));
    CHECK(res.anchors[1].support == 2);
    CHECK(res.anchors[1].x == doctest::Approx(90.15).epsilon(1e-12));

    trainset::ConsensusConfig strict = cfg;
    strict.min_support_fraction = 1.0;
    const auto only_full = trainset::consensus_keypoints(per_image, strict);
    REQUIRE(only_full.anchors.size() == 1);
    CHECK(only_full.anchors[0].support == 4);
}

TEST_CASE("consensus separation and anchor cap") {
    std::vector<std::vector<trainset::Candidate>> per_image(3);
    for (int i = 0; i < 3; ++i) {
        per_image[static_cast<std::size_t>(i)].push_back({40.0, 40.0, 3.0, 50.0, i});
        per_image[static_cast<std::size_t>(i)].push_back({44.0, 40.0, 3.0, 10.0, i});
        per_image[static_cast<std::size_t>(i)].push_back({80.0, 80.0, 3.0, 30.0, i});
    }
    trainset::ConsensusConfig cfg;
    cfg.min_separation = 10.0;
    const auto res = trainset::consensus_keypoints(per_image, cfg);
    // The 44,40 cluster is inside the separation radius of the stronger one.
    REQUIRE(res.anchors.size() == 2);
    CHECK(res.anchors[0].x == doctest::Approx(40.0));
    CHECK(res.anchors[1].x == doctest::Approx(80.0));

    cfg.max_anchors = 1;
    CHECK(trainset::consensus_keypoints(per_image, cfg).anchors.size() == 1);

    CHECK_THROWS_AS(
        trainset::consensus_keypoints(std::vector<std::vector<trainset::Candidate>>(2), cfg),
        ContractError);
}

TEST_CASE("no qualifying cluster raises the support warning") {
    std::vector<std::vector<trainset::Candidate>> per_image(3);
    per_image[0].push_back({10.0, 10.0, 3.0, 5.0, 0});
    per_image[1].push_back({60.0, 60.0, 3.0, 5.0, 1});
    trainset::ConsensusConfig cfg;
    cfg.min_support_fraction = 0.9;
    const auto res = trainset::consensus_keypoints(per_image, cfg);
    CHECK(res.anchors.empty());
    CHECK(res.support_warning);
}

TEST_CASE("extraction: labels, groups, border drops, negative distances") {
    Rng rng(301);
    std::vector<img::FeatureStack> stacks;
    stacks.push_back(testkit::random_stack(rng, 64, 57));
    stacks.push_back(testkit::random_stack(rng, 64, 57));
    stacks.push_back(testkit::random_stack(rng, 64, 57));

    std::vector<trainset::AnchorLocation> anchors;
    anchors.push_back({30.2, 28.7, 3, 4.0, 1.0});
    anchors.push_back({45.9, 12.4, 3, 4.0, 1.0});
    anchors.push_back({2.0, 2.0, 3, 4.0, 1.0});  // too close to the border

    trainset::ExtractConfig cfg;
    cfg.patch_size = 9;
    const auto res = trainset::extract_samples(stacks, anchors, cfg);
    const auto& ts = res.set;

    CHECK(res.dropped_anchors == 1);
    REQUIRE(res.kept_anchors.size() == 2);
    CHECK(ts.positive_count() == 2 * 3);

    // Reproduce the negative grid by brute force.
    const int r = 4, step = 9;
    const double min_dist = 2.0 * r;
    int want_cells = 0;
    for (int cy = r; cy + r < 57; cy += step)
        for (int cx = r; cx + r < 64; cx += step) {
            bool far = true;
            for (const auto& a : res.kept_anchors)
                if (std::hypot(a.x - cx, a.y - cy) < min_dist) far = false;
            if (far) ++want_cells;
        }
    CHECK(ts.count() - ts.positive_count() == want_cells * 3);

    // Every group holds one sample per image; labels are uniform within it.
    for (const auto& [gid, rows] : ts.groups) {
        REQUIRE(rows.size() == 3);
        std::vector<int> image_ids;
        for (int row : rows) {
            image_ids.push_back(ts.samples[static_cast<std::size_t>(row)].image_id);
            CHECK(ts.samples[static_cast<std::size_t>(row)].label ==
                  ts.samples[static_cast<std::size_t>(rows[0])].label);
        }
        std::sort(image_ids.begin(), image_ids.end());
        CHECK(image_ids == std::vector<int>{0, 1, 2});
    }

    // Temporal neighbors: same group, other images.
    const auto nbrs = ts.temporal_neighbors(0);
    REQUIRE(nbrs.size() == 2);
    for (int j : nbrs) {
        CHECK(ts.samples[static_cast<std::size_t>(j)].group == ts.samples[0].group);
        CHECK(ts.samples[static_cast<std::size_t>(j)].image_id != ts.samples[0].image_id);
    }

    // Positive rows are the standardized patches at the rounded anchor.
    const int p2 = 9 * 9;
    const ghh::FeaturePatch raw = ghh::patch_at(stacks[0], 30, 29, 9);
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        const auto& nm = ts.normalization[static_cast<std::size_t>(c)];
        for (int i = 0; i < p2; ++i) {
            const double want = (raw(c * p2 + i) - nm.mean) / nm.scale;
            CHECK(ts.patches(0, c * p2 + i) == doctest::Approx(want).epsilon(1e-12).scale(1.0));
        }
    }

    // Standardized channels have zero mean and unit variance.
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        const auto block = ts.patches.middleCols(c * p2, p2);
        CHECK(std::abs(block.mean()) < 1e-9);
        const double var = (block.array() - block.mean()).square().sum() /
                           static_cast<double>(block.size());
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("negative-cell subsampling is seeded and bounded") {
    Rng rng(311);
    std::vector<img::FeatureStack> stacks;
    stacks.push_back(testkit::random_stack(rng, 80, 80));
    stacks.push_back(testkit::random_stack(rng, 80, 80));

    trainset::ExtractConfig cfg;
    cfg.patch_size = 9;
    cfg.max_neg_cells = 5;
    cfg.seed = 77;
    const auto a = trainset::extract_samples(stacks, {}, cfg);
    CHECK(a.set.count() == 5 * 2);
    const auto b = trainset::extract_samples(stacks, {}, cfg);
    CHECK(a.set.patches == b.set.patches);

    cfg.seed = 78;
    const auto c = trainset::extract_samples(stacks, {}, cfg);
    CHECK(c.set.count() == 5 * 2);
    CHECK(a.set.patches != c.set.patches);  // different cells chosen
}

TEST_CASE("extraction contract errors") {
    Rng rng(321);
    std::vector<img::FeatureStack> one;
    one.push_back(testkit::random_stack(rng, 32, 32));
    CHECK_THROWS_AS(trainset::extract_samples(one, {}, trainset::ExtractConfig{}), ContractError);

    std::vector<img::FeatureStack> mismatched;
    mismatched.push_back(testkit::random_stack(rng, 32, 32));
    mismatched.push_back(testkit::random_stack(rng, 32, 31));
    CHECK_THROWS_AS(trainset::extract_samples(mismatched, {}, trainset::ExtractConfig{}),
                    ContractError);

    std::vector<img::FeatureStack> ok;
    ok.push_back(testkit::random_stack(rng, 32, 32));
    ok.push_back(testkit::random_stack(rng, 32, 32));
    trainset::ExtractConfig even;
    even.patch_size = 8;
    CHECK_THROWS_AS(trainset::extract_samples(ok, {}, even), ContractError);
}

TEST_CASE("pca recovers axis-aligned structure exactly") {
    // Rows mean +- a_d e_d: the scatter is exactly diag(2 a_d^2).
    trainset::TrainingSet ts;
    ts.patch_size = 1;  // D = 6
    const int D = 6;
    const double a[D] = {4.0, 3.0, 2.5, 2.0, 1.0, 0.5};
    Eigen::VectorXd mu(D);
    mu << 10, -5, 3, 0, 7, 1;
    ts.patches.resize(2 * D, D);
    for (int d = 0; d < D; ++d) {
        ts.patches.row(2 * d) = mu.transpose();
        ts.patches.row(2 * d + 1) = mu.transpose();
        ts.patches(2 * d, d) += a[d];
        ts.patches(2 * d + 1, d) -= a[d];
    }
    for (int i = 0; i < 2 * D; ++i) ts.samples.push_back({1, i, 0});

    const auto basis = trainset::fit_pca(ts, 3);
    REQUIRE(basis.reduced_dim() == 3);
    REQUIRE(basis.full_dim() == D);
    CHECK((basis.mean - mu).cwiseAbs().maxCoeff() < 1e-12);
    // Principal directions are the first three axes, positively signed.
    for (int k = 0; k < 3; ++k)
        for (int d = 0; d < D; ++d)
            CHECK(basis.basis(k, d) == doctest::Approx(d == k ? 1.0 : 0.0).scale(1.0).epsilon(1e-9));

    // Orthonormal rows.
    const Eigen::MatrixXd gram = basis.basis * basis.basis.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);

    // Projection of a pure axis point.
    Eigen::MatrixXd probe(1, D);
    probe = mu.transpose();
    probe(0, 1) += 2.0;
    const Eigen::MatrixXd z = trainset::project(probe, basis);
    CHECK(z(0, 0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(z(0, 1) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("pca dimension rules and failure modes") {
    Rng rng(331);
    trainset::TrainingSet ts = testkit::random_trainset(rng, 10, 5, 2, 1);  // K=20, D=6

    CHECK_THROWS_AS(trainset::fit_pca(ts, 7), ContractError);  // > min(K, D)

    // Rank-deficient data: only 2 independent directions.
    trainset::TrainingSet flat = ts;
    for (int i = 0; i < flat.count(); ++i) {
        const double u = flat.patches(i, 0), v = flat.patches(i, 1);
        flat.patches.row(i) << u, v, u + v, u - v, 2 * u, 3 * v;
    }
    CHECK_THROWS_AS(trainset::fit_pca(flat, 4), DataError);  // beyond the rank
    const auto b2 = trainset::fit_pca(flat, 0);              // auto: min(1024, rank)
    CHECK(b2.reduced_dim() == 2);

    // Snapshot path (fewer samples than dimensions) stays orthonormal.
    trainset::TrainingSet wide = testkit::random_trainset(rng, 2, 1, 2, 3);  // K=4, D=54
    const auto b3 = trainset::fit_pca(wide, 3);
    const Eigen::MatrixXd gram = b3.basis * b3.basis.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-9);

    trainset::TrainingSet tiny;
    tiny.patch_size = 1;
    tiny.patches.resize(1, 6);
    tiny.samples.push_back({1, 0, 0});
    CHECK_THROWS_AS(trainset::fit_pca(tiny, 1), ContractError);
}

TEST_CASE("projected training set keeps bookkeeping") {
    Rng rng(341);
    trainset::TrainingSet ts = testkit::random_trainset(rng, 8, 4, 3, 3);
    const auto basis = trainset::fit_pca(ts, 5);
    const auto red = trainset::project(ts, basis);
    CHECK(red.dim() == 5);
    CHECK(red.count() == ts.count());
    CHECK(red.samples.size() == ts.samples.size());
    CHECK(red.groups.size() == ts.groups.size());
    CHECK(red.patch_size == ts.patch_size);
}

TEST_CASE("archive round trip is lossless") {
    namespace fs = std::filesystem;
    Rng rng(351);
    trainset::TrainingSet ts = testkit::random_trainset(rng, 6, 3, 2, 3);
    for (int c = 0; c < img::kFeatureChannels; ++c)
        ts.normalization[static_cast<std::size_t>(c)] = {rng.normal(), 1.0 + rng.uniform()};
    ts.seed = 424242;

    const auto path = fs::temp_directory_path() / "kpl_test_ts.tset";
    trainset::save_trainset(path.string(), ts);
    const auto back = trainset::load_trainset(path.string());

    CHECK(back.patch_size == ts.patch_size);
    CHECK(back.seed == ts.seed);
    CHECK(back.patches == ts.patches);  // float64 block, bit exact
    REQUIRE(back.samples.size() == ts.samples.size());
    for (std::size_t i = 0; i < ts.samples.size(); ++i) {
        CHECK(back.samples[i].label == ts.samples[i].label);
        CHECK(back.samples[i].group == ts.samples[i].group);
        CHECK(back.samples[i].image_id == ts.samples[i].image_id);
    }
    CHECK(back.groups == ts.groups);
    for (int c = 0; c < img::kFeatureChannels; ++c) {
        CHECK(back.normalization[static_cast<std::size_t>(c)].mean ==
              ts.normalization[static_cast<std::size_t>(c)].mean);
        CHECK(back.normalization[static_cast<std::size_t>(c)].scale ==
              ts.normalization[static_cast<std::size_t>(c)].scale);
    }

    // Corrupt the magic.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.put('X');
    }
    CHECK_THROWS_AS(trainset::load_trainset(path.string()), DataError);
    fs::remove(path);

    CHECK_THROWS_AS(trainset::load_trainset("/nonexistent.tset"), DataError);
}

TEST_CASE("candidate files parse with comments") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "kpl_test_cands.txt";
    {
        std::ofstream out(path);
        out << "# header comment\n";
        out << "12.5 40.25 3.5 17.0\n";
        out << "\n";
        out << "100 7 2.0 -9.5\n";
    }
    const auto cands = trainset::load_candidate_file(path.string(), 3);
    REQUIRE(cands.size() == 2);
    CHECK(cands[0].x == 12.5);
    CHECK(cands[0].scale == 3.5);
    CHECK(cands[0].image_id == 3);
    CHECK(cands[1].response == -9.5);

    {
        std::ofstream out(path);
        out << "1.0 2.0 oops\n";
    }
    CHECK_THROWS_AS(trainset::load_candidate_file(path.string(), 0), DataError);
    fs::remove(path);
}

}  // TEST_SUITE
