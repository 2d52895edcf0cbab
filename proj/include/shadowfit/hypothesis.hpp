#pragma once

#include "shadowfit/core.hpp"
#include "shadowfit/metrics.hpp"
#include "shadowfit/objective.hpp"
#include "shadowfit/renderer.hpp"

#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace shadowfit {

struct HypothesisConfig {
    int n_hypotheses = 20;
    int top_k = 3;
    double joint_sigma = 0.1;        // radians, applied to every axis-angle coordinate
    double translation_sigma = 0.05;  // meters
    double score_iou_weight = 0.5;
    double score_chamfer_weight = 0.5;

    void validate() const {
        require(n_hypotheses >= 1, "n_hypotheses must be >= 1");
        require(top_k >= 1, "top_k must be >= 1");
        require(std::isfinite(joint_sigma) && joint_sigma >= 0.0, "joint_sigma must be >= 0");
        require(std::isfinite(translation_sigma) && translation_sigma >= 0.0,
                "translation_sigma must be >= 0");
        require(score_iou_weight >= 0.0 && score_chamfer_weight >= 0.0,
                "score weights must be >= 0");
    }
};

enum class Provenance { File, Perturbed, Swapped };

inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::File: return "file";
        case Provenance::Perturbed: return "perturbed";
        case Provenance::Swapped: return "swapped";
    }
    return "unknown";
}

struct Hypothesis {
    PosePair poses;
    Provenance provenance = Provenance::File;
    int origin = -1;           // source seed index (File/Swapped) or draw index (Perturbed)
    std::uint64_t rng_seed = 0;  // master seed for Perturbed draws
    std::optional<double> score;  // lower is better
};

// Reflects one hand across the vertical plane x = plane_x through the optical
// axis and flips its side. At the default centered light (plane_x = 0) this is
// an exact involution.
inline HandPose swap_side(const HandPose& pose, double plane_x) {
    HandPose m = mirror_pose(pose);
    m.wrist_translation.x() = 2.0 * plane_x - pose.wrist_translation.x();
    return m;
}

// Fig-style left/right exchange: both hands mirrored, sides traded.
inline PosePair swap_hands(const PosePair& pair, double plane_x) {
    PosePair out;
    out.left = swap_side(pair.right, plane_x);
    out.right = swap_side(pair.left, plane_x);
    return out;
}

// Emits n hypotheses from the seed pose pairs: the seeds themselves, their
// left/right swaps, then seeded Gaussian perturbations cycling over the seeds.
// Deterministic given rng_seed.
inline std::vector<Hypothesis> synthesize_hypotheses(const std::vector<PosePair>& seeds, int n,
                                                     std::uint64_t rng_seed,
                                                     const HypothesisConfig& config,
                                                     double swap_plane_x = 0.0) {
    require(n >= 1, "hypothesis count must be >= 1");
    require(!seeds.empty(), "at least one seed pose pair is required");
    config.validate();
    for (const auto& s : seeds) {
        require(s.left.side == Side::Left && s.right.side == Side::Right,
                "seed pose pairs must be (left, right)");
        s.left.validate();
        s.right.validate();
    }
    std::vector<Hypothesis> out;
    out.reserve(static_cast<std::size_t>(n));
    const int ns = static_cast<int>(seeds.size());
    for (int i = 0; i < n && i < ns; ++i) {
        Hypothesis h;
        h.poses = seeds[static_cast<std::size_t>(i)];
        h.provenance = Provenance::File;
        h.origin = i;
        out.push_back(h);
    }
    for (int i = 0; static_cast<int>(out.size()) < n && i < ns; ++i) {
        Hypothesis h;
        h.poses = swap_hands(seeds[static_cast<std::size_t>(i)], swap_plane_x);
        h.provenance = Provenance::Swapped;
        h.origin = i;
        out.push_back(h);
    }
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> joint_noise(0.0, config.joint_sigma);
    std::normal_distribution<double> trans_noise(0.0, config.translation_sigma);
    int draw = 0;
    constexpr int kMaxRedraws = 100;
    while (static_cast<int>(out.size()) < n) {
        const auto& base = seeds[static_cast<std::size_t>(draw % ns)];
        bool ok = false;
        for (int attempt = 0; attempt < kMaxRedraws && !ok; ++attempt) {
            PosePair p = base;
            for (HandPose* hp : {&p.left, &p.right}) {
                for (int k = 0; k < 3; ++k) hp->global_orient[k] += joint_noise(rng);
                for (auto& v : hp->joint_rotations)
                    for (int k = 0; k < 3; ++k) v[k] += joint_noise(rng);
                for (int k = 0; k < 3; ++k) hp->wrist_translation[k] += trans_noise(rng);
            }
            try {
                p.left.validate();
                p.right.validate();
            } catch (const validation_error&) {
                continue;
            }
            Hypothesis h;
            h.poses = p;
            h.provenance = Provenance::Perturbed;
            h.origin = draw;
            h.rng_seed = rng_seed;
            out.push_back(h);
            ok = true;
        }
        if (!ok)
            throw validation_error("could not draw a valid perturbation after " +
                                   std::to_string(kMaxRedraws) + " attempts");
        ++draw;
    }
    return out;
}

// Render-and-compare score: weighted IoU shortfall plus normalized boundary
// chamfer of the binarized render against the target. Lower is better; 0 iff
// the binarized render equals the target.
inline double score_hypothesis(const SceneConfig& scene, const HandRig& rig,
                               const Hypothesis& hyp, const ShadowMask& target,
                               const HypothesisConfig& config = {}, int threads = 0) {
    const std::vector<PosedHand> hands = {
        forward_kinematics(rig_for_side(rig, Side::Left), hyp.poses.left),
        forward_kinematics(rig_for_side(rig, Side::Right), hyp.poses.right)};
    const ShadowMask rendered =
        binarize(render_soft(scene, hands, threads), scene.binarize_threshold);
    return config.score_iou_weight * (1.0 - iou(rendered, target)) +
           config.score_chamfer_weight * boundary_chamfer(rendered, target);
}

// Scores hypotheses lacking one, then returns the k best by ascending score
// (stable in input order on ties). Hypotheses that fail to score are dropped
// with a warning message; if every hypothesis fails, the error propagates.
inline std::vector<Hypothesis> select_top_k(std::vector<Hypothesis> hypotheses,
                                            const SceneConfig& scene, const HandRig& rig,
                                            const ShadowMask& target, int k,
                                            const HypothesisConfig& config = {}, int threads = 0,
                                            std::vector<std::string>* warnings = nullptr) {
    require(k >= 1, "k must be >= 1");
    require(k <= static_cast<int>(hypotheses.size()), "k exceeds the hypothesis count");
    std::vector<std::string> errors(hypotheses.size());
    parallel_chunks(hypotheses.size(), 1, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            if (hypotheses[i].score.has_value()) continue;
            try {
                hypotheses[i].score = score_hypothesis(scene, rig, hypotheses[i], target, config,
                                                       1);
            } catch (const error& e) {
                errors[i] = e.what();
            }
        }
    });
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        if (hypotheses[i].score.has_value() && std::isfinite(*hypotheses[i].score)) {
            order.push_back(i);
        } else if (warnings) {
            warnings->push_back("hypothesis " + std::to_string(i) + " dropped: " +
                                (errors[i].empty() ? "non-finite score" : errors[i]));
        }
    }
    if (order.empty()) throw numeric_error("all hypotheses failed scoring");
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return *hypotheses[a].score < *hypotheses[b].score;
    });
    if (static_cast<int>(order.size()) > k) order.resize(static_cast<std::size_t>(k));
    std::vector<Hypothesis> out;
    out.reserve(order.size());
    for (std::size_t idx : order) out.push_back(hypotheses[idx]);
    return out;
}

}  // namespace shadowfit
