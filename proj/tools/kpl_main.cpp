// Command-line front end: build-trainset, train, cv, approx, detect, eval.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kpl/detector.hpp"
#include "kpl/evalkit.hpp"
#include "kpl/features.hpp"
#include "kpl/learner.hpp"
#include "kpl/model_io.hpp"
#include "kpl/parallel.hpp"
#include "kpl/pnm.hpp"
#include "kpl/sepfilters.hpp"
#include "kpl/trainset.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "kpl 1.0.0 (model schema 1, trainset schema 1)";

std::vector<fs::path> scene_images(const std::string& dir) {
    if (!fs::is_directory(dir)) throw kpl::DataError("not a directory: " + dir);
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") paths.push_back(e.path());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw kpl::DataError("no .ppm/.pgm images in " + dir);
    return paths;
}

// ---------------------------------------------------------------------- //

struct BuildTrainsetArgs {
    std::string scene_dir;
    std::string out;
    std::string candidates_dir;  // optional external detections, <stem>.txt
    kpl::trainset::DogConfig dog;
    kpl::trainset::ConsensusConfig consensus;
    kpl::trainset::ExtractConfig extract;
};

int cmd_build_trainset(const BuildTrainsetArgs& a) {
    const auto paths = scene_images(a.scene_dir);
    std::vector<kpl::img::FeatureStack> stacks;
    std::vector<std::vector<kpl::trainset::Candidate>> per_image;
    stacks.reserve(paths.size());

    std::vector<std::string> unreadable;
    for (int i = 0; i < static_cast<int>(paths.size()); ++i) {
        const auto& p = paths[static_cast<std::size_t>(i)];
        try {
            const kpl::img::RgbImage rgb = kpl::img::load_image(p.string());
            stacks.push_back(kpl::img::compute_feature_stack(rgb));
        } catch (const kpl::DataError& e) {
            unreadable.push_back(p.string() + ": " + e.what());
            continue;
        }
        if (!a.candidates_dir.empty()) {
            const fs::path cf = fs::path(a.candidates_dir) / (p.stem().string() + ".txt");
            per_image.push_back(kpl::trainset::load_candidate_file(cf.string(), i));
        } else {
            per_image.push_back(
                kpl::trainset::detect_candidates(stacks.back().chan(kpl::img::kChanL), a.dog));
        }
    }
    if (!unreadable.empty()) {
        std::string msg = "unreadable images:";
        for (const auto& u : unreadable) msg += "\n  " + u;
        throw kpl::DataError(msg);
    }

    const auto cons = kpl::trainset::consensus_keypoints(per_image, a.consensus);
    if (cons.support_warning)
        std::cerr << "warning: no candidate cluster met the support threshold\n";

    const auto res = kpl::trainset::extract_samples(stacks, cons.anchors, a.extract);
    kpl::trainset::save_trainset(a.out, res.set);

    const int k = res.set.count();
    const int kp = res.set.positive_count();
    std::cout << "anchors_kept=" << res.kept_anchors.size()
              << " anchors_dropped=" << res.dropped_anchors << " samples=" << k
              << " positives=" << kp << " negatives=" << (k - kp) << " dim=" << res.set.dim()
              << "\n";
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------- //

struct TrainArgs {
    std::string trainset;
    std::string out;
    kpl::learner::TrainConfig cfg;
};

int cmd_train(const TrainArgs& a) {
    const auto ts = kpl::trainset::load_trainset(a.trainset);
    const auto result = kpl::learner::train_greedy(ts, a.cfg);
    if (result.improvement_warning)
        std::cerr << "warning: some hyperplanes could not improve the objective and were "
                     "left neutral\n";

    kpl::ghh::ModelFile mf;
    mf.model = result.model;
    kpl::ghh::save_model(a.out, mf);

    const auto& last = result.trace.back().objective;
    std::cout << "filters=" << result.model.num_components() * result.model.hyperplanes_per_component() *
                     kpl::img::kFeatureChannels
              << " objective=" << last.total << " classification=" << last.classification
              << " shape=" << last.shape << " temporal=" << last.temporal << "\n";
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------- //

struct CvArgs {
    std::string train_set;
    std::string val_set;
    std::string table_out;
    int points = 3;
    double lo = 1e-4;
    double hi = 1.0;
    kpl::learner::TrainConfig base;
};

int cmd_cv(const CvArgs& a) {
    const auto ts_train = kpl::trainset::load_trainset(a.train_set);
    const auto ts_val = kpl::trainset::load_trainset(a.val_set);
    const auto grid = kpl::learner::log_grid(a.points, a.lo, a.hi);
    const auto res = kpl::learner::cross_validate(ts_train, ts_val, grid, a.base);

    if (!a.table_out.empty()) {
        std::ofstream out(a.table_out);
        if (!out) throw kpl::DataError("cannot write " + a.table_out);
        out << "gamma_c,gamma_s,gamma_t,accuracy,temporal_spread,score\n";
        for (const auto& e : res.table)
            out << e.point.gamma_c << ',' << e.point.gamma_s << ',' << e.point.gamma_t << ','
                << e.accuracy << ',' << e.temporal_spread << ',' << e.score << '\n';
    }
    std::cout << "best gamma_c=" << res.best.gamma_c << " gamma_s=" << res.best.gamma_s
              << " gamma_t=" << res.best.gamma_t << "\n";
    return 0;
}

// ---------------------------------------------------------------------- //

struct ApproxArgs {
    std::string model;
    std::string out;  // empty: rewrite in place
    int rank = 24;
};

int cmd_approx(const ApproxArgs& a) {
    kpl::ghh::ModelFile mf = kpl::ghh::load_model(a.model);
    mf.separable = kpl::sep::approximate_separable(mf.model, a.rank);
    const std::string out = a.out.empty() ? a.model : a.out;
    kpl::ghh::save_model(out, mf);
    std::cout << "S=" << mf.separable->rank << " total_error=" << mf.separable->total_error
              << "\n";
    std::cout << "wrote " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------- //

struct DetectArgs {
    std::string model;
    std::string image;
    std::string out;
    int budget = 0;
    double threshold = 0.0;
    bool use_threshold = false;
    bool separable = false;
    int nms_radius = 5;
    double scale = 10.0;
};

int cmd_detect(const DetectArgs& a) {
    const kpl::ghh::ModelFile mf = kpl::ghh::load_model(a.model);
    if (a.separable && !mf.separable)
        throw kpl::ContractError("model has no separable section; run `kpl approx` first");

    const kpl::img::RgbImage rgb = kpl::img::load_image(a.image);
    const kpl::img::FeatureStack fstack =
        kpl::img::compute_feature_stack(rgb, mf.model.normalization);
    const kpl::ghh::ScoreMap sm = a.separable
                                      ? kpl::sep::score_map_separable(mf.model, *mf.separable, fstack)
                                      : kpl::ghh::score_map(mf.model, fstack);

    auto kps = kpl::det::nonmax_suppress(sm, a.nms_radius, a.scale);
    if (a.use_threshold)
        kps = kpl::det::select_keypoints_threshold(kps, a.threshold);
    else if (a.budget > 0)
        kps = kpl::det::select_keypoints(kps, a.budget);
    kpl::det::save_keypoints(a.out, kps);
    std::cout << "keypoints=" << kps.size() << "\n";
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------- //

struct EvalArgs {
    std::string dataset;
    std::string detector;
    std::string out_dir;
    kpl::eval::SequenceConfig cfg;
    std::string mode = "one_to_one";
};

int cmd_eval(EvalArgs& a) {
    if (a.mode == "one_to_one")
        a.cfg.mode = kpl::eval::MatchMode::kOneToOne;
    else if (a.mode == "standard")
        a.cfg.mode = kpl::eval::MatchMode::kStandard;
    else
        throw kpl::ContractError("unknown mode: " + a.mode);

    const auto rep = kpl::eval::evaluate_sequence(a.dataset, a.detector, a.cfg);
    kpl::eval::write_reports(rep, a.cfg, a.out_dir);
    std::cout << "pairs=" << rep.pairs.size() << " mean=" << rep.mean << " stddev=" << rep.stddev
              << " budget=" << rep.budget << "\n";
    std::cout << "wrote " << (fs::path(a.out_dir) / "report.csv").string() << " and report.json\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned keypoint detector: training, approximation, detection, evaluation"};
    app.require_subcommand(1);
    app.set_config("--config");
    app.set_version_flag("--version", kVersion);

    int jobs = 0;
    app.add_option("--jobs", jobs, "Worker threads (0 = hardware concurrency)")
        ->capture_default_str();

    BuildTrainsetArgs bt;
    auto* c_bt = app.add_subcommand("build-trainset", "Build a labeled training set from an image stack");
    c_bt->add_option("scene_dir", bt.scene_dir, "Directory of aligned .ppm/.pgm images")->required();
    c_bt->add_option("-o,--out", bt.out, "Output archive path")->required();
    c_bt->add_option("--candidates-dir", bt.candidates_dir,
                     "Directory of external per-image detections (<stem>.txt: x y scale response)");
    c_bt->add_option("--contrast", bt.dog.contrast_threshold, "Blob contrast threshold")
        ->capture_default_str();
    c_bt->add_option("--scales", bt.dog.num_scales, "Blur levels in the blob pyramid")
        ->capture_default_str();
    c_bt->add_option("--max-anchors", bt.consensus.max_anchors, "Keep at most this many anchors")
        ->capture_default_str();
    c_bt->add_option("--min-support", bt.consensus.min_support_fraction,
                     "Fraction of images an anchor must appear in")
        ->capture_default_str();
    c_bt->add_option("--patch-size", bt.extract.patch_size, "Patch side length (odd)")
        ->capture_default_str();
    c_bt->add_option("--neg-min-dist", bt.extract.neg_min_dist,
                     "Minimum negative-to-anchor distance (<=0: twice the patch radius)")
        ->capture_default_str();
    c_bt->add_option("--max-neg-cells", bt.extract.max_neg_cells,
                     "Subsample the negative grid to this many cells (0 = all)")
        ->capture_default_str();
    c_bt->add_option("--seed", bt.extract.seed, "Negative-cell subsampling seed")
        ->capture_default_str();

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train the regressor on a training-set archive");
    c_tr->add_option("trainset", tr.trainset, "Training-set archive")->required();
    c_tr->add_option("-o,--out", tr.out, "Output model path")->required();
    c_tr->add_option("--gamma-c", tr.cfg.gamma_c, "Tap-norm weight")->capture_default_str();
    c_tr->add_option("--gamma-s", tr.cfg.gamma_s, "Response-shape weight")->capture_default_str();
    c_tr->add_option("--gamma-t", tr.cfg.gamma_t, "Response-stability weight")->capture_default_str();
    c_tr->add_option("-N,--components", tr.cfg.num_components, "Max-of-linear components")
        ->capture_default_str();
    c_tr->add_option("-M,--hyperplanes", tr.cfg.hyperplanes_per_component,
                     "Hyperplanes per component")
        ->capture_default_str();
    c_tr->add_option("--alpha", tr.cfg.shape_alpha, "Shape-template sharpness")->capture_default_str();
    c_tr->add_option("--beta", tr.cfg.shape_beta, "Shape-template radius (<=0: (p-1)/4)")
        ->capture_default_str();
    c_tr->add_option("--sweeps", tr.cfg.refine_sweeps, "Refinement sweeps after growth")
        ->capture_default_str();
    c_tr->add_option("--pca-dim", tr.cfg.pca_dim,
                     "Training-time tap subspace (0: auto, <0: full tap space)")
        ->capture_default_str();
    c_tr->add_option("--seed", tr.cfg.seed, "Sweep-order seed")->capture_default_str();
    c_tr->add_option("--trace", tr.cfg.trace_path, "JSON-lines training trace path");

    CvArgs cv;
    auto* c_cv = app.add_subcommand("cv", "Grid-search the loss weights on a validation split");
    c_cv->add_option("train_set", cv.train_set, "Training archive")->required();
    c_cv->add_option("val_set", cv.val_set, "Validation archive")->required();
    c_cv->add_option("-o,--table", cv.table_out, "CSV output for the full grid table");
    c_cv->add_option("--points", cv.points, "Grid points per weight")->capture_default_str();
    c_cv->add_option("--lo", cv.lo, "Smallest weight")->capture_default_str();
    c_cv->add_option("--hi", cv.hi, "Largest weight")->capture_default_str();
    c_cv->add_option("-N,--components", cv.base.num_components, "Max-of-linear components")
        ->capture_default_str();
    c_cv->add_option("-M,--hyperplanes", cv.base.hyperplanes_per_component,
                     "Hyperplanes per component")
        ->capture_default_str();
    c_cv->add_option("--pca-dim", cv.base.pca_dim, "Training-time tap subspace")
        ->capture_default_str();
    c_cv->add_option("--seed", cv.base.seed, "Sweep-order seed")->capture_default_str();

    ApproxArgs ap;
    auto* c_ap = app.add_subcommand("approx", "Attach a separable approximation to a model");
    c_ap->add_option("model", ap.model, "Model file")->required();
    c_ap->add_option("-S,--rank", ap.rank, "Atoms per channel")->capture_default_str();
    c_ap->add_option("-o,--out", ap.out, "Output path (default: rewrite the model in place)");

    DetectArgs de;
    auto* c_de = app.add_subcommand("detect", "Detect keypoints in one image");
    c_de->add_option("model", de.model, "Model file")->required();
    c_de->add_option("image", de.image, "Image (.ppm/.pgm)")->required();
    c_de->add_option("-o,--out", de.out, "Output keypoint file")->required();
    auto* opt_budget = c_de->add_option("--budget", de.budget, "Keep the top-scoring keypoints");
    auto* opt_thresh = c_de->add_option("--threshold", de.threshold, "Keep keypoints scoring at least this");
    opt_budget->excludes(opt_thresh);
    opt_thresh->excludes(opt_budget);
    c_de->add_flag("--separable", de.separable, "Score through the separable dictionary");
    c_de->add_option("--nms-radius", de.nms_radius, "Suppression window radius")->capture_default_str();
    c_de->add_option("--scale", de.scale, "Scale written with every keypoint")->capture_default_str();

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "Repeatability of a detector over an image sequence");
    c_ev->add_option("dataset", ev.dataset, "Directory of images (+ H_<a>_<b>.txt for non-stacks)")
        ->required();
    c_ev->add_option("detector", ev.detector, "Model file, or directory of <stem>.kp files")
        ->required();
    c_ev->add_option("-o,--out", ev.out_dir, "Report output directory")->required();
    c_ev->add_option("--mode", ev.mode, "one_to_one or standard")->capture_default_str();
    c_ev->add_option("--threshold", ev.cfg.threshold_px, "Match threshold in pixels")
        ->capture_default_str();
    auto* opt_ebudget = c_ev->add_option("--budget", ev.cfg.budget, "Fixed per-image keypoint budget");
    auto* opt_2pct = c_ev->add_flag("--budget-2pct", ev.cfg.budget_2pct,
                                    "Budget at which random detection scores the target rate");
    opt_ebudget->excludes(opt_2pct);
    opt_2pct->excludes(opt_ebudget);
    c_ev->add_option("--target-rate", ev.cfg.target_rate, "Random-baseline target rate")
        ->capture_default_str();
    c_ev->add_flag("!--no-stack", ev.cfg.stack, "Require homography files instead of identity");
    c_ev->add_flag("!--ref-only", ev.cfg.all_pairs, "Evaluate only against the first image");
    c_ev->add_option("--margin", ev.cfg.margin, "Common-region border margin in pixels")
        ->capture_default_str();
    c_ev->add_option("--nms-radius", ev.cfg.nms_radius, "Suppression window radius")
        ->capture_default_str();
    c_ev->add_flag("--separable", ev.cfg.separable, "Score through the separable dictionary");
    c_ev->add_option("--seed", ev.cfg.seed, "Random-baseline seed")->capture_default_str();
    c_ev->add_option("--name", ev.cfg.sequence_name, "Sequence name in the reports")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // uniform usage-error code
    }
    kpl::set_worker_count(jobs);

    try {
        if (*c_bt) return cmd_build_trainset(bt);
        if (*c_tr) return cmd_train(tr);
        if (*c_cv) return cmd_cv(cv);
        if (*c_ap) return cmd_approx(ap);
        if (*c_de) return cmd_detect(de);
        if (*c_ev) return cmd_eval(ev);
    } catch (const kpl::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const kpl::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
