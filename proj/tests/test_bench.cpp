#include "shadowfit/bench.hpp"
#include "shadowfit/image_io.hpp"
#include "shadowfit/synth.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace shadowfit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("shadowfit-bench-" + std::to_string(::getpid()) + "-" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// A solvable micro-benchmark: each case's target comes from a synthesized
// truth pose which is also provided as the seed, so a threshold stop fires on
// the first iterate.
void write_case(const fs::path& dir, const SceneConfig& scene, const HandRig& rig,
                std::uint64_t seed) {
    fs::create_directories(dir);
    SynthConfig config;
    config.max_close_delta = 1.0;  // the thin-slit gate needs full resolution
    const SynthResult fx = synthesize_fixture(scene, rig, seed, config);
    write_mask((dir / "target.png").string(), fx.target);
    save_pose_pair((dir / "seed.pose").string(), fx.truth, scene_digest(scene));
}

RefineConfig quick_refine() {
    RefineConfig rc;
    rc.max_iterations = 5;
    rc.stop_metric_threshold = 0.6;
    return rc;
}

HypothesisConfig tiny_hypotheses() {
    HypothesisConfig hc;
    hc.n_hypotheses = 2;
    hc.top_k = 1;
    return hc;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("a benchmark over solvable cases reports perfect recovery") {
    TempDir tmp;
    SceneConfig scene;
    scene.image_width = scene.image_height = 96;
    const HandRig& rig = default_rig();
    write_case(tmp.path / "alpha", scene, rig, 3);
    write_case(tmp.path / "beta", scene, rig, 8);

    const BenchmarkReport report = run_benchmark(tmp.path.string(), scene, rig, {},
                                                 quick_refine(), tiny_hypotheses(), 99);
    REQUIRE(report.cases.size() == 2);
    CHECK(report.cases[0].name == "alpha");
    CHECK(report.cases[1].name == "beta");
    for (const auto& c : report.cases) {
        CHECK(c.iou_value == 1.0);
        CHECK(c.termination == Termination::MetricThreshold);
        CHECK(c.iterations == 1);
        CHECK(c.best_provenance == Provenance::File);
        CHECK(c.best_origin == 0);
        CHECK(c.best_score == 0.0);
        CHECK(c.n_hypotheses == 2);
        CHECK(c.top_k == 1);
        CHECK_FALSE(c.saliency_present);
        CHECK(c.wall_ms > 0.0);
    }
    CHECK(report.mean(&CaseResult::iou_value) == 1.0);
    CHECK(report.digest.size() == 16);
}

TEST_CASE("report bodies are deterministic and carry no timing") {
    TempDir tmp;
    SceneConfig scene;
    scene.image_width = scene.image_height = 64;
    const HandRig& rig = default_rig();
    write_case(tmp.path / "only", scene, rig, 12);

    const BenchmarkReport a = run_benchmark(tmp.path.string(), scene, rig, {}, quick_refine(),
                                            tiny_hypotheses(), 7, 1);
    const BenchmarkReport b = run_benchmark(tmp.path.string(), scene, rig, {}, quick_refine(),
                                            tiny_hypotheses(), 7, 4);
    CHECK(a.body() == b.body());
    CHECK(a.summary() == b.summary());
    CHECK(a.body().find("wall") == std::string::npos);
    CHECK(a.timing().rfind("case,wall_ms\n", 0) == 0);

    std::istringstream lines(a.body());
    std::string header;
    std::getline(lines, header);
    CHECK(header ==
          "case,saliency,n_hypotheses,top_k,best_provenance,best_origin,best_score,final_loss,"
          "iou,chamfer,dino_semantic,iterations,best_iteration,termination,lpips,clip_global,"
          "clip_semantic,dino_global");
    std::string row, mean_row;
    std::getline(lines, row);
    std::getline(lines, mean_row);
    CHECK(row.rfind("only,0,2,1,file,0,0.0,", 0) == 0);
    CHECK(mean_row.rfind("mean,", 0) == 0);
}

TEST_CASE("benchmark outputs land on disk") {
    TempDir tmp;
    SceneConfig scene;
    scene.image_width = scene.image_height = 64;
    const HandRig& rig = default_rig();
    write_case(tmp.path / "case1", scene, rig, 21);

    const BenchmarkReport report = run_benchmark(tmp.path.string(), scene, rig, {},
                                                 quick_refine(), tiny_hypotheses(), 5);
    const fs::path out = tmp.path / "out";
    write_benchmark_outputs(report, out.string());
    CHECK(fs::exists(out / "report.csv"));
    CHECK(fs::exists(out / "timing.csv"));
    CHECK(fs::exists(out / "summary.txt"));
    CHECK(fs::exists(out / "case1.pose"));
    CHECK(fs::exists(out / "case1_mask.png"));
    CHECK(read_file(out / "report.csv") == report.body());

    const PoseFile saved = load_pose_pair((out / "case1.pose").string());
    VecX ps, pr;
    pack_params(saved.poses, ps);
    pack_params(report.cases[0].poses, pr);
    CHECK((ps - pr).norm() == 0.0);
}

TEST_CASE("external scores steer hypothesis selection per case") {
    TempDir tmp;
    SceneConfig scene;
    scene.image_width = scene.image_height = 64;
    const HandRig& rig = default_rig();
    const fs::path dir = tmp.path / "steer";
    write_case(dir, scene, rig, 33);
    {
        std::ofstream out(dir / "scores.json");
        out << R"({"format": "shadowfit-scores/1", "scores": {"1": -5.0}})" << "\n";
    }
    const BenchmarkReport report = run_benchmark(tmp.path.string(), scene, rig, {},
                                                 quick_refine(), tiny_hypotheses(), 11);
    REQUIRE(report.cases.size() == 1);
    // Index 1 is the swapped seed; the forced score makes it win selection.
    CHECK(report.cases[0].best_provenance == Provenance::Swapped);
    CHECK(report.cases[0].best_score == -5.0);
}

TEST_CASE("a benchmark with no cases is an error") {
    TempDir tmp;
    SceneConfig scene;
    const HandRig& rig = default_rig();
    CHECK_THROWS_AS(
        run_benchmark(tmp.path.string(), scene, rig, {}, quick_refine(), tiny_hypotheses(), 1),
        io_error);
    CHECK_THROWS_AS(
        run_benchmark((tmp.path / "missing").string(), scene, rig, {}, quick_refine(),
                      tiny_hypotheses(), 1),
        io_error);
}

TEST_CASE("a case without a target is an error") {
    TempDir tmp;
    SceneConfig scene;
    const HandRig& rig = default_rig();
    fs::create_directories(tmp.path / "empty_case");
    CHECK_THROWS_AS(
        run_benchmark(tmp.path.string(), scene, rig, {}, quick_refine(), tiny_hypotheses(), 1),
        io_error);
}
