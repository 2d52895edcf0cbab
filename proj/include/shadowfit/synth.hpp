#pragma once

#include "shadowfit/core.hpp"
#include "shadowfit/hand_rig.hpp"
#include "shadowfit/metrics.hpp"
#include "shadowfit/objective.hpp"
#include "shadowfit/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace shadowfit {

struct SynthConfig {
    double min_abs_x = 0.10;  // lateral hand placement, meters from the axis
    double max_abs_x = 0.15;
    double y_range = 0.07;
    double min_z = 0.68;  // near enough the light for large, well-resolved shadows
    double max_z = 0.80;
    double orient_sigma = 0.25;      // radians of random global orientation
    double articulation_max = 0.35;  // fraction of each joint's bend range
    double fan_spread = 0.95;        // fraction of splay range used to fan the fingers
    double min_coverage = 0.03;      // fraction of pixels each hand must shadow
    double max_coverage = 0.40;      // fraction the union may not exceed
    int border_margin = 8;           // pixels of clearance to the image border
    double close_radius = 1.5;       // thin-slit detector: morphological closing radius
    double max_close_delta = 0.04;   // tolerated closing change, fraction of mask area
    int max_attempts = 400;

    void validate() const {
        require(min_abs_x > 0.0 && max_abs_x > min_abs_x, "x placement range is empty");
        require(min_z > 0.0 && max_z > min_z, "z placement range is empty");
        require(y_range >= 0.0, "y_range must be >= 0");
        require(orient_sigma >= 0.0, "orient_sigma must be >= 0");
        require(articulation_max >= 0.0 && articulation_max <= 1.0,
                "articulation_max must be in [0, 1]");
        require(fan_spread >= 0.0 && fan_spread <= 1.0, "fan_spread must be in [0, 1]");
        require(min_coverage > 0.0 && max_coverage > min_coverage && max_coverage < 1.0,
                "coverage bounds are inconsistent");
        require(border_margin >= 0, "border_margin must be >= 0");
        require(close_radius >= 0.0, "close_radius must be >= 0");
        require(max_close_delta > 0.0, "max_close_delta must be > 0");
        require(max_attempts >= 1, "max_attempts must be >= 1");
    }
};

struct SynthResult {
    PosePair truth;
    SoftMask soft_target;
    ShadowMask target;      // union of both hands
    ShadowMask left_only;   // left hand alone
    ShadowMask right_only;  // right hand alone
    int attempts = 0;
};

namespace detail {

inline bool mask_in_frame(const ShadowMask& mask, int margin, double min_cov, double max_cov) {
    std::size_t on = 0;
    int x0 = static_cast<int>(mask.width), x1 = -1;
    int y0 = static_cast<int>(mask.height), y1 = -1;
    for (int y = 0; y < static_cast<int>(mask.height); ++y) {
        for (int x = 0; x < static_cast<int>(mask.width); ++x) {
            if (!mask.at(x, y)) continue;
            ++on;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    const double total = static_cast<double>(mask.width * mask.height);
    if (on < static_cast<std::size_t>(min_cov * total)) return false;
    if (on > static_cast<std::size_t>(max_cov * total)) return false;
    return x0 >= margin && y0 >= margin && x1 < static_cast<int>(mask.width) - margin &&
           y1 < static_cast<int>(mask.height) - margin;
}

inline bool masks_union_exact(const ShadowMask& both, const ShadowMask& left,
                              const ShadowMask& right) {
    for (std::size_t i = 0; i < both.data.size(); ++i) {
        const bool u = left.data[i] || right.data[i];
        if ((both.data[i] != 0) != u) return false;
    }
    return true;
}

// Pixels a closing of the given radius would add: slits and notches narrower
// than twice the radius. Targets dominated by such features are ambiguous for
// silhouette fitting.
inline std::size_t closing_delta(const ShadowMask& mask, double radius) {
    const Image<double> to_on = distance_transform(mask);
    ShadowMask dilated(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        dilated.data[i] = to_on.data[i] <= radius ? 1 : 0;
    ShadowMask dilated_off(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
        dilated_off.data[i] = dilated.data[i] ? 0 : 1;
    const Image<double> to_off = distance_transform(dilated_off);
    std::size_t delta = 0;
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        const bool closed = to_off.data[i] > radius;
        if (closed && !mask.data[i]) ++delta;
    }
    return delta;
}

}  // namespace detail

// Draws a random but plausible two-hand pose whose shadow is clean: fingers
// fanned apart, each hand visible, the union inside the frame with no thin
// slits, and the combined mask exactly the pixelwise union of the per-hand
// masks. Rejection-samples until every check passes. Deterministic given the
// seed.
inline SynthResult synthesize_fixture(const SceneConfig& scene, const HandRig& rig,
                                      std::uint64_t seed, const SynthConfig& config = {},
                                      int threads = 0) {
    scene.validate();
    config.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> orient(0.0, config.orient_sigma);

    const HandRig& right_rig = rig_for_side(rig, Side::Right);
    const HandRig& left_rig = rig_for_side(rig, Side::Left);

    auto draw_hand = [&](Side side) {
        const HandRig& r = side == Side::Left ? left_rig : right_rig;
        HandPose p = HandPose::rest(side, r.articulated_joints(),
                                    static_cast<int>(r.shape_basis.size()));
        p.global_orient = Vec3(orient(rng), orient(rng), orient(rng));

        // Wrist children whose twist axis runs along the palm are fingers; the
        // thumb's tilted frame excludes it. Ordered across the palm for fanning.
        std::vector<int> fingers;
        for (int j = 1; j < static_cast<int>(r.joints.size()); ++j) {
            const auto& joint = r.joints[static_cast<std::size_t>(j)];
            if (joint.parent == 0 && std::abs(joint.frame.twist.y()) > 0.9) fingers.push_back(j);
        }
        std::sort(fingers.begin(), fingers.end(), [&](int a, int b) {
            return r.joints[static_cast<std::size_t>(a)].offset.x() <
                   r.joints[static_cast<std::size_t>(b)].offset.x();
        });

        double mid = 0.0;
        for (int f : fingers) mid += r.joints[static_cast<std::size_t>(f)].offset.x();
        if (!fingers.empty()) mid /= static_cast<double>(fingers.size());
        // Outward splay sign from geometry: positive splay moves the fingertip
        // along splay_axis x offset; pick whichever sign pushes the digit away
        // from the palm's midline.
        auto outward = [&](int j) {
            const auto& joint = r.joints[static_cast<std::size_t>(j)];
            const double rel = joint.offset.x() - mid;
            const double vel = joint.frame.splay.cross(joint.offset.normalized()).x();
            return rel * vel >= 0.0 ? 1.0 : -1.0;
        };

        for (int j = 1; j < static_cast<int>(r.joints.size()); ++j) {
            const JointLimits* lim = r.limits_for(j);
            if (!lim) continue;
            const auto& frame = r.joints[static_cast<std::size_t>(j)].frame;
            const bool digit_root = r.joints[static_cast<std::size_t>(j)].parent == 0;
            const bool is_thumb =
                digit_root && std::find(fingers.begin(), fingers.end(), j) == fingers.end();
            double bend_top = lim->bend_hi * config.articulation_max;
            if (is_thumb) bend_top *= 0.6;  // keep the thumb extended and visible
            const double b = lim->bend_lo + unit(rng) * std::max(0.0, bend_top - lim->bend_lo);
            double s = 0.2 * (lim->splay_lo + unit(rng) * (lim->splay_hi - lim->splay_lo));
            const auto fan = std::find(fingers.begin(), fingers.end(), j);
            if (fan != fingers.end() && fingers.size() > 1) {
                const double slot = -1.0 + 2.0 * static_cast<double>(fan - fingers.begin()) /
                                               static_cast<double>(fingers.size() - 1);
                const double sg = outward(j);
                const double reach = sg > 0.0 ? lim->splay_hi : -lim->splay_lo;
                s = config.fan_spread * std::abs(slot) * sg * reach +
                    0.1 * (unit(rng) - 0.5) * (lim->splay_hi - lim->splay_lo);
            } else if (is_thumb) {
                const double sg = outward(j);
                const double reach = sg > 0.0 ? lim->splay_hi : -lim->splay_lo;
                s = (0.55 + 0.35 * unit(rng)) * sg * reach;
            }
            p.joint_rotations[static_cast<std::size_t>(r.rotation_index(j))] =
                b * frame.bend + s * frame.splay;
        }
        const double ax = config.min_abs_x + unit(rng) * (config.max_abs_x - config.min_abs_x);
        const double ty = (unit(rng) * 2.0 - 1.0) * config.y_range;
        const double tz = config.min_z + unit(rng) * (config.max_z - config.min_z);
        p.wrist_translation =
            Vec3(scene.light_position.x() + (side == Side::Left ? -ax : ax),
                 scene.light_position.y() + ty, scene.light_position.z() + tz);
        return p;
    };

    for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
        PosePair truth;
        truth.left = draw_hand(Side::Left);
        truth.right = draw_hand(Side::Right);
        SynthResult out;
        try {
            const PosedHand left = forward_kinematics(left_rig, truth.left);
            const PosedHand right = forward_kinematics(right_rig, truth.right);
            out.soft_target = render_soft(scene, {left, right}, threads);
            out.target = binarize(out.soft_target, scene.binarize_threshold);
            out.left_only =
                binarize(render_soft(scene, {left}, threads), scene.binarize_threshold);
            out.right_only =
                binarize(render_soft(scene, {right}, threads), scene.binarize_threshold);
        } catch (const numeric_error&) {
            continue;  // out of the projectable volume; redraw
        }
        if (!detail::mask_in_frame(out.left_only, config.border_margin, config.min_coverage,
                                   config.max_coverage))
            continue;
        if (!detail::mask_in_frame(out.right_only, config.border_margin, config.min_coverage,
                                   config.max_coverage))
            continue;
        if (!detail::mask_in_frame(out.target, config.border_margin, 2.0 * config.min_coverage,
                                   config.max_coverage))
            continue;
        if (!detail::masks_union_exact(out.target, out.left_only, out.right_only)) continue;
        std::size_t on = 0;
        for (auto v : out.target.data) on += v ? 1 : 0;
        if (detail::closing_delta(out.target, config.close_radius) >
            static_cast<std::size_t>(config.max_close_delta * static_cast<double>(on)))
            continue;
        out.truth = truth;
        out.attempts = attempt;
        return out;
    }
    throw validation_error("could not synthesize a clean fixture in " +
                           std::to_string(config.max_attempts) + " attempts");
}

}  // namespace shadowfit
