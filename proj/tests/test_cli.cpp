// End-to-end checks of the command-line tool as a subprocess: exit codes,
// artifact round trips, flag validation. KPL_CLI_PATH is injected by the
// build so the tests find the binary regardless of the build directory.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <doctest.h>
#include <json.hpp>

#include "kpl/detector.hpp"
#include "kpl/model_io.hpp"
#include "kpl/pnm.hpp"
#include "kpl/rng.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace kpl;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(KPL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    REQUIRE(raw != -1);
    REQUIRE(WIFEXITED(raw));
    return WEXITSTATUS(raw);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("version and usage errors") {
    TempDir tmp("kpl_cli_basic");
    const auto log = tmp.path / "log.txt";

    CHECK(run_cli("--version", log) == 0);
    CHECK(slurp(log).find("kpl 1.0.0") != std::string::npos);

    CHECK(run_cli("", log) == 2);                    // a subcommand is required
    CHECK(run_cli("frobnicate", log) == 2);          // unknown subcommand
    CHECK(run_cli("detect", log) == 2);              // missing required arguments
    CHECK(run_cli("--help", log) == 0);
    CHECK(slurp(log).find("build-trainset") != std::string::npos);
}

TEST_CASE("missing inputs exit with the data-error code") {
    TempDir tmp("kpl_cli_missing");
    const auto log = tmp.path / "log.txt";
    CHECK(run_cli("detect /nonexistent/model.json /nonexistent/image.ppm -o " +
                      (tmp.path / "k.kp").string(),
                  log) == 3);
    CHECK(run_cli("train /nonexistent/archive.tset -o " + (tmp.path / "m.json").string(), log) ==
          3);
    CHECK(run_cli("eval /nonexistent/dir " + tmp.path.string() + " -o " + tmp.path.string(), log) ==
          3);
}

TEST_CASE("detect, approx and eval round-trip through real files") {
    TempDir tmp("kpl_cli_roundtrip");
    const auto log = tmp.path / "log.txt";
    Rng rng(1101);

    const auto model_path = tmp.path / "model.json";
    ghh::ModelFile mf;
    mf.model = testkit::random_model(rng, 2, 2, 5);
    ghh::save_model(model_path.string(), mf);

    const auto image_path = tmp.path / "scene.ppm";
    img::save_ppm(image_path.string(), testkit::random_rgb(rng, 48, 40));

    // Budget and threshold are mutually exclusive.
    const auto kp_path = tmp.path / "scene.kp";
    CHECK(run_cli("detect " + model_path.string() + " " + image_path.string() + " -o " +
                      kp_path.string() + " --budget 5 --threshold 0.5",
                  log) == 2);

    CHECK(run_cli("detect " + model_path.string() + " " + image_path.string() + " -o " +
                      kp_path.string() + " --budget 5",
                  log) == 0);
    const auto kps = det::load_keypoints(kp_path.string());
    CHECK(!kps.empty());
    CHECK(kps.size() <= 5);

    // Separable scoring needs the dictionary attached first.
    CHECK(run_cli("detect " + model_path.string() + " " + image_path.string() + " -o " +
                      kp_path.string() + " --separable",
                  log) == 3);
    CHECK(run_cli("approx " + model_path.string() + " -S 6", log) == 0);
    CHECK(ghh::load_model(model_path.string()).separable.has_value());
    CHECK(run_cli("detect " + model_path.string() + " " + image_path.string() + " -o " +
                      kp_path.string() + " --separable --budget 5",
                  log) == 0);

    // Two identical frames repeat perfectly.
    const auto ds = tmp.path / "ds";
    fs::create_directories(ds);
    fs::copy_file(image_path, ds / "a.ppm");
    fs::copy_file(image_path, ds / "b.ppm");
    const auto out = tmp.path / "report";
    CHECK(run_cli("eval " + ds.string() + " " + model_path.string() + " -o " + out.string() +
                      " --threshold 3",
                  log) == 0);
    std::ifstream js(out / "report.json");
    REQUIRE(js.good());
    const auto j = nlohmann::json::parse(js);
    CHECK(j["mean"].get<double>() == 1.0);
    CHECK(fs::exists(out / "report.csv"));

    CHECK(run_cli("eval " + ds.string() + " " + model_path.string() + " -o " + out.string() +
                      " --mode sideways",
                  log) == 3);
}

}  // TEST_SUITE
