#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include <json.hpp>

#include "kpl/evalkit.hpp"
#include "kpl/features.hpp"
#include "kpl/model_io.hpp"
#include "kpl/parallel.hpp"
#include "kpl/pnm.hpp"

namespace fs = std::filesystem;

namespace kpl::eval {

namespace {

struct ImageEntry {
    std::string stem;
    fs::path path;
    Extent extent;
    std::vector<det::Keypoint> kps;
    int budget = 0;  // cap applied to this image; 0 = uncapped
};

std::vector<fs::path> list_images(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("evaluate_sequence: not a directory: " + dir);
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.size() < 2)
        throw DataError("evaluate_sequence: need at least two images in " + dir);
    return paths;
}

std::string mode_name(MatchMode m) {
    return m == MatchMode::kOneToOne ? "one_to_one" : "standard";
}

}  // namespace

SequenceReport evaluate_sequence(const std::string& dataset_dir, const std::string& detector,
                                 const SequenceConfig& cfg) {
    const std::vector<fs::path> paths = list_images(dataset_dir);

    const bool from_files = fs::is_directory(detector);
    ghh::ModelFile mf;
    if (!from_files) {
        mf = ghh::load_model(detector);
        if (cfg.separable && !mf.separable)
            throw ContractError("evaluate_sequence: model has no separable section");
    }

    std::vector<ImageEntry> images;
    images.reserve(paths.size());
    std::map<std::pair<int, int>, int> budget_by_size;
    for (const auto& p : paths) {
        ImageEntry entry;
        entry.stem = p.stem().string();
        entry.path = p;
        const img::RgbImage rgb = img::load_image(p.string());
        entry.extent = {rgb.width, rgb.height};

        if (from_files) {
            const fs::path kp_path = fs::path(detector) / (entry.stem + ".kp");
            if (!fs::exists(kp_path))
                throw DataError("evaluate_sequence: missing keypoint file " + kp_path.string());
            entry.kps = det::load_keypoints(kp_path.string());
        } else {
            const img::FeatureStack fstack =
                img::compute_feature_stack(rgb, mf.model.normalization);
            const ghh::ScoreMap sm = cfg.separable
                                         ? sep::score_map_separable(mf.model, *mf.separable, fstack)
                                         : ghh::score_map(mf.model, fstack);
            entry.kps = det::nonmax_suppress(sm, cfg.nms_radius, cfg.scale);
        }

        int budget = cfg.budget;
        if (cfg.budget_2pct) {
            const auto key = std::make_pair(rgb.width, rgb.height);
            auto it = budget_by_size.find(key);
            if (it == budget_by_size.end())
                it = budget_by_size
                         .emplace(key, budget_for_random_rate(rgb.width, rgb.height,
                                                              cfg.threshold_px, cfg.target_rate,
                                                              cfg.seed))
                         .first;
            budget = it->second;
        }
        if (budget > 0) entry.kps = det::select_keypoints(entry.kps, budget);
        entry.budget = budget;
        if (entry.kps.empty())
            throw DataError("evaluate_sequence: no keypoints for image " + p.string());
        images.push_back(std::move(entry));
    }

    std::vector<std::pair<int, int>> pair_idx;
    if (cfg.all_pairs) {
        for (int i = 0; i < static_cast<int>(images.size()); ++i)
            for (int j = i + 1; j < static_cast<int>(images.size()); ++j)
                pair_idx.emplace_back(i, j);
    } else {
        for (int j = 1; j < static_cast<int>(images.size()); ++j) pair_idx.emplace_back(0, j);
    }

    // Transforms are resolved up front so a missing file fails before any
    // heavy pairwise work.
    std::vector<GroundTruthTransform> transforms;
    transforms.reserve(pair_idx.size());
    for (const auto& [i, j] : pair_idx) {
        if (cfg.stack) {
            transforms.push_back(GroundTruthTransform::identity());
        } else {
            const fs::path hp = fs::path(dataset_dir) / ("H_" + images[static_cast<std::size_t>(i)].stem +
                                                         "_" + images[static_cast<std::size_t>(j)].stem +
                                                         ".txt");
            if (!fs::exists(hp))
                throw DataError("evaluate_sequence: missing transform for pair " +
                                images[static_cast<std::size_t>(i)].stem + "," +
                                images[static_cast<std::size_t>(j)].stem + " (expected " +
                                hp.string() + ")");
            transforms.push_back(load_homography(hp.string()));
        }
    }

    SequenceReport rep;
    rep.sequence = cfg.sequence_name;
    rep.mode = mode_name(cfg.mode);
    rep.pairs.resize(pair_idx.size());
    parallel_for(static_cast<int>(pair_idx.size()), [&](int lo, int hi) {
        for (int k = lo; k < hi; ++k) {
            const auto [i, j] = pair_idx[static_cast<std::size_t>(k)];
            const ImageEntry& A = images[static_cast<std::size_t>(i)];
            const ImageEntry& B = images[static_cast<std::size_t>(j)];
            PairResult pr;
            pr.image_a = A.stem;
            pr.image_b = B.stem;
            pr.score = repeatability(A.kps, B.kps, transforms[static_cast<std::size_t>(k)],
                                     cfg.threshold_px, cfg.mode, A.extent, B.extent, cfg.margin);
            pr.score.budget = std::max(A.budget, B.budget);
            rep.pairs[static_cast<std::size_t>(k)] = std::move(pr);
        }
    });

    double mean = 0.0;
    for (const auto& pr : rep.pairs) mean += pr.score.score;
    mean /= static_cast<double>(rep.pairs.size());
    double var = 0.0;
    for (const auto& pr : rep.pairs) var += (pr.score.score - mean) * (pr.score.score - mean);
    var /= static_cast<double>(rep.pairs.size());
    rep.mean = mean;
    rep.stddev = std::sqrt(var);
    rep.budget = rep.pairs.empty() ? 0 : rep.pairs.front().score.budget;
    return rep;
}

void write_reports(const SequenceReport& rep, const SequenceConfig& cfg,
                   const std::string& out_dir) {
    fs::create_directories(out_dir);

    std::ofstream csv(fs::path(out_dir) / "report.csv");
    if (!csv) throw DataError("cannot write report.csv in " + out_dir);
    csv << "sequence,pair,mode,score,budget\n";
    for (const auto& pr : rep.pairs) {
        csv << rep.sequence << ',' << pr.image_a << '-' << pr.image_b << ',' << rep.mode << ','
            << pr.score.score << ',' << pr.score.budget << '\n';
    }

    nlohmann::json j;
    j["sequence"] = rep.sequence;
    j["mode"] = rep.mode;
    j["mean"] = rep.mean;
    j["stddev"] = rep.stddev;
    j["budget"] = rep.budget;
    j["config"] = {{"threshold_px", cfg.threshold_px},
                   {"mode", rep.mode},
                   {"budget", cfg.budget},
                   {"budget_2pct", cfg.budget_2pct},
                   {"target_rate", cfg.target_rate},
                   {"seed", cfg.seed},
                   {"stack", cfg.stack},
                   {"all_pairs", cfg.all_pairs},
                   {"margin", cfg.margin},
                   {"nms_radius", cfg.nms_radius},
                   {"scale", cfg.scale},
                   {"separable", cfg.separable}};
    j["pairs"] = nlohmann::json::array();
    for (const auto& pr : rep.pairs) {
        j["pairs"].push_back({{"a", pr.image_a},
                              {"b", pr.image_b},
                              {"matched", pr.score.matched},
                              {"evaluated", pr.score.evaluated},
                              {"score", pr.score.score}});
    }
    std::ofstream js(fs::path(out_dir) / "report.json");
    if (!js) throw DataError("cannot write report.json in " + out_dir);
    js << j.dump(2) << '\n';
}

}  // namespace kpl::eval
