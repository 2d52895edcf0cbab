#pragma once

#include "shadowfit/core.hpp"
#include "shadowfit/metrics.hpp"
#include "shadowfit/objective.hpp"
#include "shadowfit/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace shadowfit {

struct RefineConfig {
    double learning_rate = 1e-3;
    double decay_factor = 0.5;
    int decay_at_iteration = 3000;
    int max_iterations = 6000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::optional<double> stop_metric_threshold;  // stop once IoU to target reaches this
    int plateau_window = 500;
    double plateau_epsilon = 1e-6;
    std::uint64_t rng_seed = 0;

    void validate() const {
        require(std::isfinite(learning_rate) && learning_rate > 0.0,
                "learning_rate must be > 0");
        require(std::isfinite(decay_factor) && decay_factor > 0.0 && decay_factor <= 1.0,
                "decay_factor must be in (0, 1]");
        require(max_iterations >= 1, "max_iterations must be >= 1");
        require(decay_at_iteration >= 1, "decay_at_iteration must be >= 1");
        require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must be in [0, 1)");
        require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must be in [0, 1)");
        require(adam_epsilon > 0.0, "adam_epsilon must be > 0");
        if (stop_metric_threshold)
            require(*stop_metric_threshold > 0.0 && *stop_metric_threshold <= 1.0,
                    "stop_metric_threshold must be in (0, 1]");
        require(plateau_window >= 1, "plateau_window must be >= 1");
        require(std::isfinite(plateau_epsilon) && plateau_epsilon >= 0.0,
                "plateau_epsilon must be >= 0");
    }

    double rate_at(int iteration) const {
        return iteration >= decay_at_iteration ? learning_rate * decay_factor : learning_rate;
    }
};

enum class Termination { MaxIterations, MetricThreshold, Plateau };

inline std::string to_string(Termination t) {
    switch (t) {
        case Termination::MaxIterations: return "max_iterations";
        case Termination::MetricThreshold: return "metric_threshold";
        case Termination::Plateau: return "plateau";
    }
    return "unknown";
}

struct TraceRow {
    int iteration = 0;  // 1-based
    double learning_rate = 0.0;
    ObjectiveBreakdown terms;
};

struct OptimizationResult {
    PosePair poses;
    std::vector<TraceRow> trace;  // every 10th iteration plus the best one
    int iterations = 0;
    Termination termination = Termination::MaxIterations;
    int best_iteration = 0;
    double final_loss = 0.0;  // total at best_iteration; equals min over trace
    SoftMask soft;
    ShadowMask mask;
    double iou_value = 0.0;
    double chamfer_value = 0.0;
    double dino_value = 0.0;
};

// Gradient descent (Adam) over both hands' orientation, articulation and
// translation; shape coefficients stay fixed. Returns the best iterate seen,
// not the last. The trace keeps every 10th iteration and the best iteration;
// loss totals recorded there are exact evaluation values.
inline OptimizationResult refine(const SceneConfig& scene, const HandRig& rig,
                                 const PosePair& init, const ShadowMask& target,
                                 const SaliencyMap& saliency,
                                 const ObjectiveWeights& weights = {},
                                 const RefineConfig& config = {},
                                 int samples_per_capsule = kPenetrationSamplesPerCapsule,
                                 int threads = 0) {
    scene.validate();
    weights.validate();
    config.validate();
    require(init.left.side == Side::Left && init.right.side == Side::Right,
            "initial pose pair must be (left, right)");
    init.left.validate();
    init.right.validate();
    require(static_cast<int>(target.width) == scene.image_width &&
                static_cast<int>(target.height) == scene.image_height,
            "target mask dimensions must match the scene");
    require_same_shape(static_cast<int>(target.width), static_cast<int>(target.height),
                       static_cast<int>(saliency.width), static_cast<int>(saliency.height),
                       "saliency map");

    PosePair poses = init;
    VecX params;
    pack_params(poses, params);
    VecX m = VecX::Zero(params.size());
    VecX v = VecX::Zero(params.size());

    OptimizationResult result;
    double best_total = std::numeric_limits<double>::infinity();
    VecX best_params = params;
    TraceRow best_row;
    std::vector<double> best_history;
    best_history.reserve(static_cast<std::size_t>(config.max_iterations));

    int done = 0;
    Termination termination = Termination::MaxIterations;
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        unpack_params(params, poses);
        ObjectiveEval eval;
        try {
            eval = objective_gradient(scene, rig, poses, target, saliency, weights,
                                      samples_per_capsule, threads);
        } catch (const numeric_error& e) {
            throw numeric_error("iteration " + std::to_string(iter) + ": " + e.what());
        }
        if (!std::isfinite(eval.terms.total))
            throw numeric_error("iteration " + std::to_string(iter) + ": non-finite loss");
        if (!eval.gradient.allFinite())
            throw numeric_error("iteration " + std::to_string(iter) + ": non-finite gradient");

        const double lr = config.rate_at(iter);
        TraceRow row{iter, lr, eval.terms};
        if ((iter - 1) % 10 == 0) result.trace.push_back(row);
        if (eval.terms.total < best_total) {
            best_total = eval.terms.total;
            best_params = params;
            best_row = row;
        }
        best_history.push_back(best_total);
        done = iter;

        if (config.stop_metric_threshold) {
            const double metric =
                iou(binarize(eval.rendered, scene.binarize_threshold), target);
            if (metric >= *config.stop_metric_threshold) {
                termination = Termination::MetricThreshold;
                break;
            }
        }
        if (iter > config.plateau_window) {
            const double before =
                best_history[static_cast<std::size_t>(iter - 1 - config.plateau_window)];
            const double gain = before - best_total;
            if (gain <= config.plateau_epsilon * std::max(std::abs(before), 1e-12)) {
                termination = Termination::Plateau;
                break;
            }
        }

        const double c1 = 1.0 - std::pow(config.adam_beta1, iter);
        const double c2 = 1.0 - std::pow(config.adam_beta2, iter);
        m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * eval.gradient;
        v = config.adam_beta2 * v +
            (1.0 - config.adam_beta2) * eval.gradient.cwiseProduct(eval.gradient);
        params.array() -= lr * (m.array() / c1) /
                          ((v.array() / c2).sqrt() + config.adam_epsilon);
    }

    result.iterations = done;
    result.termination = termination;
    result.best_iteration = best_row.iteration;
    result.final_loss = best_total;

    bool have_best = false;
    for (const auto& r : result.trace) have_best |= r.iteration == best_row.iteration;
    if (!have_best) result.trace.push_back(best_row);
    std::sort(result.trace.begin(), result.trace.end(),
              [](const TraceRow& a, const TraceRow& b) { return a.iteration < b.iteration; });

    unpack_params(best_params, poses);
    for (HandPose* hp : {&poses.left, &poses.right}) {
        hp->global_orient = wrap_axis_angle(hp->global_orient);
        for (auto& r : hp->joint_rotations) r = wrap_axis_angle(r);
    }
    poses.left.validate();
    poses.right.validate();
    result.poses = poses;

    const std::vector<PosedHand> hands = {
        forward_kinematics(rig_for_side(rig, Side::Left), poses.left),
        forward_kinematics(rig_for_side(rig, Side::Right), poses.right)};
    result.soft = render_soft(scene, hands, threads);
    result.mask = binarize(result.soft, scene.binarize_threshold);
    result.iou_value = iou(result.mask, target);
    result.chamfer_value = boundary_chamfer(result.mask, target);
    result.dino_value = dino_semantic(result.mask, target, saliency);
    return result;
}

}  // namespace shadowfit
