#include <shadowfit/shadowfit.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace sf = shadowfit;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string scene_path;
    std::string rig_path;
    std::string weights_path;
    std::string refine_path;
    std::string hyp_path;
    std::uint64_t seed = 0;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--scene", o.scene_path, "Scene configuration JSON")
        ->envname("SHADOWFIT_SCENE")
        ->check(CLI::ExistingFile);
    cmd->add_option("--rig", o.rig_path, "Hand rig JSON (default: built-in rig)")
        ->envname("SHADOWFIT_RIG")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Random seed")->envname("SHADOWFIT_SEED");
    cmd->add_option("--threads", o.threads, "Worker threads, 0 = all cores")
        ->envname("SHADOWFIT_THREADS");
}

void add_objective_opts(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--weights", o.weights_path, "Objective weights JSON")
        ->envname("SHADOWFIT_WEIGHTS")
        ->check(CLI::ExistingFile);
    cmd->add_option("--refine-config", o.refine_path, "Optimizer configuration JSON")
        ->envname("SHADOWFIT_REFINE_CONFIG")
        ->check(CLI::ExistingFile);
    cmd->add_option("--hyp-config", o.hyp_path, "Hypothesis configuration JSON")
        ->envname("SHADOWFIT_HYP_CONFIG")
        ->check(CLI::ExistingFile);
}

sf::SceneConfig scene_from(const CommonOpts& o) {
    return o.scene_path.empty() ? sf::SceneConfig{} : sf::load_scene(o.scene_path);
}
sf::HandRig rig_from(const CommonOpts& o) {
    return o.rig_path.empty() ? sf::default_rig() : sf::load_rig(o.rig_path);
}
sf::ObjectiveWeights weights_from(const CommonOpts& o) {
    return o.weights_path.empty() ? sf::ObjectiveWeights{} : sf::load_weights(o.weights_path);
}
sf::RefineConfig refine_cfg_from(const CommonOpts& o) {
    sf::RefineConfig c =
        o.refine_path.empty() ? sf::RefineConfig{} : sf::load_refine_config(o.refine_path);
    c.rng_seed = o.seed;
    return c;
}
sf::HypothesisConfig hyp_cfg_from(const CommonOpts& o) {
    return o.hyp_path.empty() ? sf::HypothesisConfig{} : sf::load_hypothesis_config(o.hyp_path);
}

sf::ShadowMask load_target(const std::string& path, const sf::SceneConfig& scene) {
    sf::ShadowMask target = sf::read_mask(path);
    if (static_cast<int>(target.width) != scene.image_width ||
        static_cast<int>(target.height) != scene.image_height)
        throw sf::validation_error(path + ": target dimensions do not match the scene");
    return target;
}

std::vector<sf::PosedHand> pose_hands(const sf::HandRig& rig, const sf::PosePair& poses) {
    return {sf::forward_kinematics(sf::rig_for_side(rig, sf::Side::Left), poses.left),
            sf::forward_kinematics(sf::rig_for_side(rig, sf::Side::Right), poses.right)};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-hand shadow pose fitting"};
    app.set_version_flag("--version", std::string(sf::kVersion));
    app.require_subcommand(1);

    // render: pose file -> shadow mask
    auto* render = app.add_subcommand("render", "Render the shadow of a pose pair");
    CommonOpts render_opts;
    std::string render_pose, render_out = "render.png", render_soft_out;
    add_common(render, render_opts);
    render->add_option("--pose", render_pose, "Pose pair file")
        ->required()
        ->check(CLI::ExistingFile);
    render->add_option("--out", render_out, "Output mask PNG");
    render->add_option("--soft", render_soft_out, "Also write the soft coverage image");
    render->callback([&] {
        const sf::SceneConfig scene = scene_from(render_opts);
        const sf::HandRig rig = rig_from(render_opts);
        const sf::PosePair poses = sf::load_pose_pair(render_pose).poses;
        const sf::SoftMask soft =
            sf::render_soft(scene, pose_hands(rig, poses), render_opts.threads);
        sf::write_mask(render_out, sf::binarize(soft, scene.binarize_threshold));
        if (!render_soft_out.empty()) sf::write_soft(render_soft_out, soft);
        std::cout << "wrote " << render_out << '\n';
    });

    // synth: random ground-truth fixture
    auto* synth = app.add_subcommand("synth", "Generate a random solvable target");
    CommonOpts synth_opts;
    std::string synth_out = "fixture";
    add_common(synth, synth_opts);
    synth->add_option("--out", synth_out, "Output directory");
    synth->callback([&] {
        const sf::SceneConfig scene = scene_from(synth_opts);
        const sf::HandRig rig = rig_from(synth_opts);
        const sf::SynthResult fx =
            sf::synthesize_fixture(scene, rig, synth_opts.seed, {}, synth_opts.threads);
        fs::create_directories(synth_out);
        sf::write_mask((fs::path(synth_out) / "target.png").string(), fx.target);
        sf::write_mask((fs::path(synth_out) / "left.png").string(), fx.left_only);
        sf::write_mask((fs::path(synth_out) / "right.png").string(), fx.right_only);
        sf::save_pose_pair((fs::path(synth_out) / "truth.pose").string(), fx.truth,
                           sf::scene_digest(scene));
        std::cout << "wrote " << synth_out << " (attempts: " << fx.attempts << ")\n";
    });

    // refine: hypothesis selection + gradient descent
    auto* refine = app.add_subcommand("refine", "Fit hand poses to a target shadow");
    CommonOpts refine_opts;
    std::vector<std::string> refine_inits;
    std::string refine_target, refine_saliency, refine_scores;
    std::string refine_out = "refined.pose", refine_mask_out;
    int refine_n = 1, refine_k = 1, refine_iters = 0;
    add_common(refine, refine_opts);
    add_objective_opts(refine, refine_opts);
    refine->add_option("--target", refine_target, "Target shadow mask")
        ->required()
        ->check(CLI::ExistingFile);
    refine->add_option("--init", refine_inits, "Seed pose pair file(s)")
        ->required()
        ->check(CLI::ExistingFile);
    refine->add_option("--saliency", refine_saliency, "Importance map image")
        ->check(CLI::ExistingFile);
    refine->add_option("--scores", refine_scores, "Hypothesis score override JSON")
        ->check(CLI::ExistingFile);
    auto* opt_n = refine->add_option("--n-hypotheses", refine_n, "Hypotheses to synthesize");
    auto* opt_k = refine->add_option("--topk", refine_k, "Hypotheses to refine");
    refine->add_option("--iterations", refine_iters, "Override optimizer iteration count");
    refine->add_option("--out", refine_out, "Output pose pair file");
    refine->add_option("--mask-out", refine_mask_out, "Also write the fitted shadow mask");
    refine->callback([&] {
        const sf::SceneConfig scene = scene_from(refine_opts);
        const sf::HandRig rig = rig_from(refine_opts);
        const sf::ObjectiveWeights weights = weights_from(refine_opts);
        sf::RefineConfig refine_cfg = refine_cfg_from(refine_opts);
        if (refine_iters > 0) refine_cfg.max_iterations = refine_iters;
        sf::HypothesisConfig hyp_cfg = hyp_cfg_from(refine_opts);
        if (opt_n->count() > 0) hyp_cfg.n_hypotheses = refine_n;
        if (opt_k->count() > 0) hyp_cfg.top_k = refine_k;
        if (refine_opts.hyp_path.empty() && opt_n->count() == 0) hyp_cfg.n_hypotheses = 1;
        if (refine_opts.hyp_path.empty() && opt_k->count() == 0) hyp_cfg.top_k = 1;
        if (hyp_cfg.top_k > hyp_cfg.n_hypotheses)
            throw sf::validation_error("--topk exceeds the number of hypotheses");

        const sf::ShadowMask target = load_target(refine_target, scene);
        const sf::SaliencyMap saliency =
            refine_saliency.empty()
                ? sf::uniform_saliency(target.width, target.height)
                : sf::load_saliency(refine_saliency, scene.image_width, scene.image_height);
        std::vector<sf::PosePair> seeds;
        for (const auto& path : refine_inits) seeds.push_back(sf::load_pose_pair(path).poses);

        auto hypotheses =
            sf::synthesize_hypotheses(seeds, hyp_cfg.n_hypotheses, refine_opts.seed, hyp_cfg,
                                      scene.light_position.x());
        if (!refine_scores.empty())
            sf::apply_scores(hypotheses, sf::load_scores(refine_scores));
        std::vector<std::string> warnings;
        const auto top = sf::select_top_k(std::move(hypotheses), scene, rig, target,
                                          hyp_cfg.top_k, hyp_cfg, refine_opts.threads,
                                          &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

        sf::OptimizationResult best;
        bool have = false;
        for (const auto& hyp : top) {
            sf::OptimizationResult r =
                sf::refine(scene, rig, hyp.poses, target, saliency, weights, refine_cfg,
                           sf::kPenetrationSamplesPerCapsule, refine_opts.threads);
            if (!have || r.final_loss < best.final_loss) {
                best = std::move(r);
                have = true;
            }
        }
        sf::save_pose_pair(refine_out, best.poses, sf::scene_digest(scene));
        if (!refine_mask_out.empty()) sf::write_mask(refine_mask_out, best.mask);
        nlohmann::json summary;
        summary["final_loss"] = best.final_loss;
        summary["iou"] = best.iou_value;
        summary["chamfer"] = best.chamfer_value;
        summary["dino_semantic"] = best.dino_value;
        summary["iterations"] = best.iterations;
        summary["best_iteration"] = best.best_iteration;
        summary["termination"] = sf::to_string(best.termination);
        summary["out"] = refine_out;
        std::cout << summary.dump() << '\n';
    });

    // eval: metrics of a pose against a target
    auto* eval = app.add_subcommand("eval", "Score a pose pair against a target shadow");
    CommonOpts eval_opts;
    std::string eval_pose, eval_target, eval_saliency;
    add_common(eval, eval_opts);
    add_objective_opts(eval, eval_opts);
    eval->add_option("--pose", eval_pose, "Pose pair file")->required()->check(CLI::ExistingFile);
    eval->add_option("--target", eval_target, "Target shadow mask")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--saliency", eval_saliency, "Importance map image")
        ->check(CLI::ExistingFile);
    eval->callback([&] {
        const sf::SceneConfig scene = scene_from(eval_opts);
        const sf::HandRig rig = rig_from(eval_opts);
        const sf::ObjectiveWeights weights = weights_from(eval_opts);
        const sf::ShadowMask target = load_target(eval_target, scene);
        const sf::SaliencyMap saliency =
            eval_saliency.empty()
                ? sf::uniform_saliency(target.width, target.height)
                : sf::load_saliency(eval_saliency, scene.image_width, scene.image_height);
        const sf::PosePair poses = sf::load_pose_pair(eval_pose).poses;
        const sf::ObjectiveBreakdown terms =
            sf::total_objective(scene, rig, poses, target, saliency, weights,
                                sf::kPenetrationSamplesPerCapsule, eval_opts.threads);
        const sf::SoftMask soft =
            sf::render_soft(scene, pose_hands(rig, poses), eval_opts.threads);
        const sf::ShadowMask mask = sf::binarize(soft, scene.binarize_threshold);
        nlohmann::json out;
        out["iou"] = sf::iou(mask, target);
        out["chamfer"] = sf::boundary_chamfer(mask, target);
        out["dino_semantic"] = sf::dino_semantic(mask, target, saliency);
        out["total"] = terms.total;
        out["similarity"] = terms.sim;
        out["anatomy"] = terms.anatomy;
        out["inter_penetration"] = terms.inter_pen;
        out["self_penetration"] = terms.self_pen;
        out["distance"] = terms.distance;
        std::cout << out.dump() << '\n';
    });

    // bench: run every case under a directory
    auto* bench = app.add_subcommand("bench", "Run a directory of benchmark cases");
    CommonOpts bench_opts;
    std::string bench_cases, bench_out = "bench_out";
    int bench_n = 0, bench_k = 0;
    add_common(bench, bench_opts);
    add_objective_opts(bench, bench_opts);
    bench->add_option("--cases", bench_cases, "Directory of case subdirectories")
        ->required()
        ->check(CLI::ExistingDirectory);
    bench->add_option("--out", bench_out, "Output directory");
    auto* bopt_n = bench->add_option("--n-hypotheses", bench_n, "Hypotheses per case");
    auto* bopt_k = bench->add_option("--topk", bench_k, "Hypotheses to refine per case");
    bench->callback([&] {
        const sf::SceneConfig scene = scene_from(bench_opts);
        const sf::HandRig rig = rig_from(bench_opts);
        const sf::ObjectiveWeights weights = weights_from(bench_opts);
        const sf::RefineConfig refine_cfg = refine_cfg_from(bench_opts);
        sf::HypothesisConfig hyp_cfg = hyp_cfg_from(bench_opts);
        if (bopt_n->count() > 0) hyp_cfg.n_hypotheses = bench_n;
        if (bopt_k->count() > 0) hyp_cfg.top_k = bench_k;
        if (hyp_cfg.top_k > hyp_cfg.n_hypotheses)
            throw sf::validation_error("--topk exceeds the number of hypotheses");
        const sf::BenchmarkReport report =
            sf::run_benchmark(bench_cases, scene, rig, weights, refine_cfg, hyp_cfg,
                              bench_opts.seed, bench_opts.threads);
        for (const auto& c : report.cases) {
            if (!c.saliency_present)
                std::cerr << "warning: case " << c.name << " has no saliency map\n";
            for (const auto& w : c.warnings) std::cerr << "warning: " << w << '\n';
        }
        sf::write_benchmark_outputs(report, bench_out);
        std::cout << report.summary();
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const sf::io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const sf::numeric_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
