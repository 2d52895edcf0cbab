#pragma once

#include "shadowfit/core.hpp"
#include "shadowfit/hypothesis.hpp"
#include "shadowfit/image_io.hpp"
#include "shadowfit/io.hpp"
#include "shadowfit/refine.hpp"
#include "shadowfit/version.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace shadowfit {

struct CaseResult {
    std::string name;
    bool saliency_present = false;
    int n_hypotheses = 0;
    int top_k = 0;
    Provenance best_provenance = Provenance::File;
    int best_origin = -1;
    double best_score = 0.0;
    double final_loss = 0.0;
    double iou_value = 0.0;
    double chamfer_value = 0.0;
    double dino_value = 0.0;
    int iterations = 0;
    int best_iteration = 0;
    Termination termination = Termination::MaxIterations;
    PosePair poses;
    ShadowMask mask;
    std::vector<std::string> warnings;
    double wall_ms = 0.0;  // kept out of the report body
};

namespace detail {

// Shortest round-trip decimal form; identical across runs and platforms that
// share IEEE doubles.
inline std::string fmt(double v) { return json(v).dump(); }

}  // namespace detail

struct BenchmarkReport {
    std::vector<CaseResult> cases;
    std::string digest;

    double mean(double CaseResult::* field) const {
        if (cases.empty()) return 0.0;
        double sum = 0.0;
        for (const auto& c : cases) sum += c.*field;
        return sum / static_cast<double>(cases.size());
    }

    // Deterministic CSV: no wall-clock values, stable case order, shortest
    // round-trip number formatting. Columns for perceptual metrics computed by
    // external tooling stay empty here.
    std::string body() const {
        std::ostringstream out;
        out << "case,saliency,n_hypotheses,top_k,best_provenance,best_origin,best_score,"
               "final_loss,iou,chamfer,dino_semantic,iterations,best_iteration,termination,"
               "lpips,clip_global,clip_semantic,dino_global\n";
        for (const auto& c : cases) {
            out << c.name << ',' << (c.saliency_present ? 1 : 0) << ',' << c.n_hypotheses << ','
                << c.top_k << ',' << to_string(c.best_provenance) << ',' << c.best_origin << ','
                << detail::fmt(c.best_score) << ',' << detail::fmt(c.final_loss) << ','
                << detail::fmt(c.iou_value) << ',' << detail::fmt(c.chamfer_value) << ','
                << detail::fmt(c.dino_value) << ',' << c.iterations << ',' << c.best_iteration
                << ',' << to_string(c.termination) << ",,,,\n";
        }
        out << "mean,,,,,,," << detail::fmt(mean(&CaseResult::final_loss)) << ','
            << detail::fmt(mean(&CaseResult::iou_value)) << ','
            << detail::fmt(mean(&CaseResult::chamfer_value)) << ','
            << detail::fmt(mean(&CaseResult::dino_value)) << ",,,,,,,\n";
        return out.str();
    }

    std::string timing() const {
        std::ostringstream out;
        out << "case,wall_ms\n";
        for (const auto& c : cases) out << c.name << ',' << detail::fmt(c.wall_ms) << '\n';
        return out.str();
    }

    std::string summary() const {
        std::ostringstream out;
        out << "shadowfit " << kVersion << "\n"
            << "config " << digest << "\n"
            << "cases " << cases.size() << "\n"
            << "mean_iou " << detail::fmt(mean(&CaseResult::iou_value)) << "\n"
            << "mean_chamfer " << detail::fmt(mean(&CaseResult::chamfer_value)) << "\n"
            << "mean_dino " << detail::fmt(mean(&CaseResult::dino_value)) << "\n";
        return out.str();
    }
};

// Neutral two-hand initialization: rest articulation, hands flanking the axis
// midway between light and screen.
inline PosePair default_seed_pair(const SceneConfig& scene, const HandRig& rig) {
    const double z = scene.light_position.z() + 0.5 * scene.screen_distance;
    PosePair p;
    p.left = HandPose::rest(Side::Left, rig.articulated_joints(),
                            static_cast<int>(rig.shape_basis.size()));
    p.right = HandPose::rest(Side::Right, rig.articulated_joints(),
                             static_cast<int>(rig.shape_basis.size()));
    p.left.wrist_translation =
        Vec3(scene.light_position.x() - 0.18, scene.light_position.y(), z);
    p.right.wrist_translation =
        Vec3(scene.light_position.x() + 0.18, scene.light_position.y(), z);
    return p;
}

// One target directory: target.png required; saliency.png, *.pose seeds and
// scores.json optional.
inline CaseResult run_case(const std::string& name, const std::filesystem::path& dir,
                           const SceneConfig& scene, const HandRig& rig,
                           const ObjectiveWeights& weights, const RefineConfig& refine_cfg,
                           const HypothesisConfig& hyp_cfg, std::uint64_t rng_seed,
                           int threads = 0) {
    namespace fs = std::filesystem;
    const auto start = std::chrono::steady_clock::now();

    const fs::path target_path = dir / "target.png";
    if (!fs::exists(target_path))
        throw io_error("case " + name + ": missing " + target_path.string());
    const ShadowMask target = read_mask(target_path.string());
    require(static_cast<int>(target.width) == scene.image_width &&
                static_cast<int>(target.height) == scene.image_height,
            "case " + name + ": target dimensions do not match the scene");

    CaseResult result;
    result.name = name;
    const fs::path saliency_path = dir / "saliency.png";
    SaliencyMap saliency;
    if (fs::exists(saliency_path)) {
        saliency = load_saliency(saliency_path.string(), scene.image_width, scene.image_height);
        result.saliency_present = true;
    } else {
        saliency = uniform_saliency(target.width, target.height);
    }

    std::vector<std::string> seed_files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pose")
            seed_files.push_back(entry.path().string());
    std::sort(seed_files.begin(), seed_files.end());
    std::vector<PosePair> seeds;
    for (const auto& f : seed_files) seeds.push_back(load_pose_pair(f).poses);
    if (seeds.empty()) seeds.push_back(default_seed_pair(scene, rig));

    const std::uint64_t case_seed = rng_seed ^ fnv1a64(name);
    auto hypotheses = synthesize_hypotheses(seeds, hyp_cfg.n_hypotheses, case_seed, hyp_cfg,
                                            scene.light_position.x());
    const fs::path scores_path = dir / "scores.json";
    if (fs::exists(scores_path)) apply_scores(hypotheses, load_scores(scores_path.string()));

    const int k = std::min(hyp_cfg.top_k, static_cast<int>(hypotheses.size()));
    const auto top = select_top_k(std::move(hypotheses), scene, rig, target, k, hyp_cfg, threads,
                                  &result.warnings);

    result.n_hypotheses = hyp_cfg.n_hypotheses;
    result.top_k = k;
    bool have_best = false;
    for (const auto& hyp : top) {
        const OptimizationResult refined =
            refine(scene, rig, hyp.poses, target, saliency, weights, refine_cfg,
                   kPenetrationSamplesPerCapsule, threads);
        if (!have_best || refined.final_loss < result.final_loss) {
            have_best = true;
            result.best_provenance = hyp.provenance;
            result.best_origin = hyp.origin;
            result.best_score = hyp.score.value_or(0.0);
            result.final_loss = refined.final_loss;
            result.iou_value = refined.iou_value;
            result.chamfer_value = refined.chamfer_value;
            result.dino_value = refined.dino_value;
            result.iterations = refined.iterations;
            result.best_iteration = refined.best_iteration;
            result.termination = refined.termination;
            result.poses = refined.poses;
            result.mask = refined.mask;
        }
    }
    result.wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    return result;
}

// Runs every case subdirectory under root (sorted by name). A root with no
// cases is an error; a case without saliency runs with a uniform map and is
// flagged in the report.
inline BenchmarkReport run_benchmark(const std::string& root, const SceneConfig& scene,
                                     const HandRig& rig, const ObjectiveWeights& weights,
                                     const RefineConfig& refine_cfg,
                                     const HypothesisConfig& hyp_cfg, std::uint64_t rng_seed,
                                     int threads = 0) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw io_error(root + " is not a directory");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw io_error(root + " contains no benchmark cases");

    BenchmarkReport report;
    report.digest = config_digest(scene, weights, refine_cfg, hyp_cfg);
    for (const auto& name : names)
        report.cases.push_back(run_case(name, fs::path(root) / name, scene, rig, weights,
                                        refine_cfg, hyp_cfg, rng_seed, threads));
    return report;
}

inline void write_benchmark_outputs(const BenchmarkReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    auto write_text = [](const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::trunc | std::ios::binary);
        if (!out) throw io_error("cannot write " + path.string());
        out << text;
    };
    write_text(fs::path(out_dir) / "report.csv", report.body());
    write_text(fs::path(out_dir) / "timing.csv", report.timing());
    write_text(fs::path(out_dir) / "summary.txt", report.summary());
    for (const auto& c : report.cases) {
        save_pose_pair((fs::path(out_dir) / (c.name + ".pose")).string(), c.poses);
        write_mask((fs::path(out_dir) / (c.name + "_mask.png")).string(), c.mask);
    }
}

}  // namespace shadowfit
