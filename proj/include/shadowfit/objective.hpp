#pragma once

#include "shadowfit/core.hpp"
#include "shadowfit/hand_rig.hpp"
#include "shadowfit/image.hpp"
#include "shadowfit/renderer.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace shadowfit {

struct ObjectiveWeights {
    double w_sim = 10.0;
    double w_atm = 1.0;
    double w_pen = 1.0;
    double w_dist = 1.0;
    double tau_dist = 0.5;  // squared-distance threshold, meters^2

    void validate() const {
        for (double w : {w_sim, w_atm, w_pen, w_dist})
            require(std::isfinite(w) && w >= 0.0, "objective weights must be finite and >= 0");
        require(std::isfinite(tau_dist) && tau_dist > 0.0, "tau_dist must be > 0");
    }
};

inline constexpr int kPenetrationSamplesPerCapsule = 32;

// Saliency-weighted L1: sum (1 + saliency) * |rendered - target|.
inline double sim_loss(const SoftMask& rendered, const ShadowMask& target,
                       const SaliencyMap& saliency) {
    require_same_shape(rendered.width, rendered.height, target.width, target.height, "sim_loss");
    require_same_shape(rendered.width, rendered.height, saliency.width, saliency.height, "sim_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i)
        acc += (1.0 + saliency.data[i]) * std::abs(rendered.data[i] - target.data[i]);
    return acc;
}

// Squared exceedance of each twist/splay/bend component beyond its limit band,
// summed over articulated joints. Global orientation carries no bone frame and
// is not penalized.
inline double anatomy_loss(const HandPose& pose, const HandRig& rig) {
    require(static_cast<int>(pose.joint_rotations.size()) == rig.articulated_joints(),
            "anatomy_loss: pose joint count does not match rig");
    double acc = 0.0;
    for (std::size_t i = 0; i < rig.limit_joint.size(); ++i) {
        const int j = rig.limit_joint[i];
        const auto& lim = rig.limit_values[i];
        const Vec3 tsb = decompose_tsb(rig, j, pose.joint_rotations[static_cast<std::size_t>(j - 1)]);
        const double lo[3] = {lim.twist_lo, lim.splay_lo, lim.bend_lo};
        const double hi[3] = {lim.twist_hi, lim.splay_hi, lim.bend_hi};
        for (int k = 0; k < 3; ++k) {
            if (tsb[k] > hi[k]) acc += (tsb[k] - hi[k]) * (tsb[k] - hi[k]);
            if (tsb[k] < lo[k]) acc += (lo[k] - tsb[k]) * (lo[k] - tsb[k]);
        }
    }
    return acc;
}

// Gradient of anatomy_loss with respect to the joint rotations.
inline void anatomy_loss_grad(const HandPose& pose, const HandRig& rig, PoseGrad& grad,
                              double weight) {
    for (std::size_t i = 0; i < rig.limit_joint.size(); ++i) {
        const int j = rig.limit_joint[i];
        const auto& lim = rig.limit_values[i];
        const auto& frame = rig.joints[static_cast<std::size_t>(j)].frame;
        const Vec3& v = pose.joint_rotations[static_cast<std::size_t>(j - 1)];
        const Vec3 axes[3] = {frame.twist, frame.splay, frame.bend};
        const double lo[3] = {lim.twist_lo, lim.splay_lo, lim.bend_lo};
        const double hi[3] = {lim.twist_hi, lim.splay_hi, lim.bend_hi};
        for (int k = 0; k < 3; ++k) {
            const double c = v.dot(axes[k]);
            if (c > hi[k]) grad.joint_rotations[static_cast<std::size_t>(j - 1)] +=
                weight * 2.0 * (c - hi[k]) * axes[k];
            if (c < lo[k]) grad.joint_rotations[static_cast<std::size_t>(j - 1)] -=
                weight * 2.0 * (lo[k] - c) * axes[k];
        }
    }
}

namespace detail {

// Surface samples of src strictly inside dst, each paired with the nearest dst
// sample; mean of squared nearest distances. Optionally accumulates world-point
// adjoints for both hands.
inline double penetration_direction(const PosedHand& dst,
                                    const std::vector<SurfaceSample>& src_samples,
                                    const std::vector<SurfaceSample>& dst_samples,
                                    std::vector<PointAdjoint>* src_adj,
                                    std::vector<PointAdjoint>* dst_adj, double weight) {
    std::vector<std::size_t> inside;
    for (std::size_t i = 0; i < src_samples.size(); ++i) {
        const Vec3& p = src_samples[i].world;
        for (const auto& cap : dst.capsules) {
            if (capsule_sdf(p, cap.p0, cap.p1, cap.radius) < 0.0) {
                inside.push_back(i);
                break;
            }
        }
    }
    if (inside.empty()) return 0.0;
    double acc = 0.0;
    const double inv_n = 1.0 / static_cast<double>(inside.size());
    for (std::size_t idx : inside) {
        const Vec3& p = src_samples[idx].world;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < dst_samples.size(); ++j) {
            const double d2 = (p - dst_samples[j].world).squaredNorm();
            if (d2 < best) {
                best = d2;
                best_j = j;
            }
        }
        acc += best;
        if (src_adj) {
            const Vec3 diff = p - dst_samples[best_j].world;
            const Vec3 g = weight * 2.0 * inv_n * diff;
            src_adj->push_back({src_samples[idx].joint, p, g});
            dst_adj->push_back({dst_samples[best_j].joint, dst_samples[best_j].world, -g});
        }
    }
    return acc * inv_n;
}

}  // namespace detail

// Mean squared distance from each hand's intruding surface samples to the other
// hand's nearest surface sample, both directions summed.
inline double inter_penetration_loss(const PosedHand& hand_a, const PosedHand& hand_b,
                                     int samples_per_capsule = kPenetrationSamplesPerCapsule) {
    const auto sa = sample_surface(hand_a, samples_per_capsule);
    const auto sb = sample_surface(hand_b, samples_per_capsule);
    return detail::penetration_direction(hand_b, sa, sb, nullptr, nullptr, 0.0) +
           detail::penetration_direction(hand_a, sb, sa, nullptr, nullptr, 0.0);
}

// Squared overlap depth of non-adjacent capsule pairs within one hand. Pairs
// whose attachment joints coincide or are parent/child are exempt.
inline double self_penetration_loss(const PosedHand& hand, const HandRig& rig) {
    const auto dist = rig.joint_distances();
    double acc = 0.0;
    for (std::size_t i = 0; i < hand.capsules.size(); ++i) {
        for (std::size_t j = i + 1; j < hand.capsules.size(); ++j) {
            const auto& a = hand.capsules[i];
            const auto& b = hand.capsules[j];
            if (dist[static_cast<std::size_t>(a.joint)][static_cast<std::size_t>(b.joint)] <= 1)
                continue;
            const double sep = segment_distance(a.p0, a.p1, b.p0, b.p1);
            const double depth = a.radius + b.radius - sep;
            if (depth > 0.0) acc += depth * depth;
        }
    }
    return acc;
}

// Squared wrist distance, penalized only at or above the threshold.
inline double distance_loss(const Vec3& t_left, const Vec3& t_right, double tau_dist) {
    const double d2 = (t_left - t_right).squaredNorm();
    return d2 >= tau_dist ? d2 : 0.0;
}

struct ObjectiveBreakdown {
    double total = 0.0;
    double sim = 0.0;        // unweighted terms
    double anatomy = 0.0;
    double inter_pen = 0.0;
    double self_pen = 0.0;
    double distance = 0.0;
};

struct PosePair {
    HandPose left;
    HandPose right;
};

// Rig matching the pose's side; the stored rig covers one side and is mirrored
// for the other.
inline HandRig rig_for_side(const HandRig& rig, Side side) {
    return rig.side == side ? rig : rig.mirrored();
}

inline ObjectiveBreakdown total_objective(const SceneConfig& scene, const HandRig& rig,
                                          const PosePair& poses, const ShadowMask& target,
                                          const SaliencyMap& saliency,
                                          const ObjectiveWeights& weights,
                                          int samples_per_capsule = kPenetrationSamplesPerCapsule,
                                          int threads = 0) {
    weights.validate();
    require(poses.left.side == Side::Left && poses.right.side == Side::Right,
            "total_objective: poses must be a (left, right) pair");
    const HandRig rig_l = rig_for_side(rig, Side::Left);
    const HandRig rig_r = rig_for_side(rig, Side::Right);
    const std::vector<PosedHand> hands = {forward_kinematics(rig_l, poses.left),
                                          forward_kinematics(rig_r, poses.right)};
    ObjectiveBreakdown b;
    const SoftMask rendered = render_soft(scene, hands, threads);
    b.sim = sim_loss(rendered, target, saliency);
    b.anatomy = anatomy_loss(poses.left, rig_l) + anatomy_loss(poses.right, rig_r);
    b.inter_pen = inter_penetration_loss(hands[0], hands[1], samples_per_capsule);
    b.self_pen = self_penetration_loss(hands[0], rig_l) + self_penetration_loss(hands[1], rig_r);
    b.distance = distance_loss(poses.left.wrist_translation, poses.right.wrist_translation,
                               weights.tau_dist);
    b.total = weights.w_sim * b.sim + weights.w_atm * b.anatomy +
              weights.w_pen * (b.inter_pen + b.self_pen) + weights.w_dist * b.distance;
    return b;
}

// Flat parameter layout for the optimizer and finite-difference checks:
// [left orient(3), left joints(45), left translation(3), right ... ] = 102.
inline constexpr int kParamsPerHand = 51;
inline constexpr int kTotalParams = 102;

inline void pack_params(const PosePair& poses, VecX& out) {
    out.resize(kTotalParams);
    int o = 0;
    for (const HandPose* p : {&poses.left, &poses.right}) {
        out.segment<3>(o) = p->global_orient;
        o += 3;
        for (const auto& v : p->joint_rotations) {
            out.segment<3>(o) = v;
            o += 3;
        }
        out.segment<3>(o) = p->wrist_translation;
        o += 3;
    }
}

inline void unpack_params(const VecX& in, PosePair& poses) {
    require(in.size() == kTotalParams, "parameter vector must have 102 entries");
    int o = 0;
    for (HandPose* p : {&poses.left, &poses.right}) {
        p->global_orient = in.segment<3>(o);
        o += 3;
        for (auto& v : p->joint_rotations) {
            v = in.segment<3>(o);
            o += 3;
        }
        p->wrist_translation = in.segment<3>(o);
        o += 3;
    }
}

inline void pack_grad(const PoseGrad& left, const PoseGrad& right, VecX& out) {
    out.resize(kTotalParams);
    int o = 0;
    for (const PoseGrad* g : {&left, &right}) {
        out.segment<3>(o) = g->global_orient;
        o += 3;
        for (const auto& v : g->joint_rotations) {
            out.segment<3>(o) = v;
            o += 3;
        }
        out.segment<3>(o) = g->wrist_translation;
        o += 3;
    }
}

struct ObjectiveEval {
    ObjectiveBreakdown terms;
    VecX gradient;  // 102 entries
    SoftMask rendered;
};

// Total objective and its exact reverse-mode gradient over both hands' pose
// parameters (shape frozen).
inline ObjectiveEval objective_gradient(const SceneConfig& scene, const HandRig& rig,
                                        const PosePair& poses, const ShadowMask& target,
                                        const SaliencyMap& saliency,
                                        const ObjectiveWeights& weights,
                                        int samples_per_capsule = kPenetrationSamplesPerCapsule,
                                        int threads = 0) {
    weights.validate();
    require(poses.left.side == Side::Left && poses.right.side == Side::Right,
            "objective_gradient: poses must be a (left, right) pair");
    const HandRig rig_l = rig_for_side(rig, Side::Left);
    const HandRig rig_r = rig_for_side(rig, Side::Right);
    const std::vector<PosedHand> hands = {forward_kinematics(rig_l, poses.left),
                                          forward_kinematics(rig_r, poses.right)};

    ObjectiveEval ev;
    ev.rendered = render_soft(scene, hands, threads);
    ev.terms.sim = sim_loss(ev.rendered, target, saliency);
    ev.terms.anatomy = anatomy_loss(poses.left, rig_l) + anatomy_loss(poses.right, rig_r);
    ev.terms.self_pen =
        self_penetration_loss(hands[0], rig_l) + self_penetration_loss(hands[1], rig_r);
    ev.terms.distance = distance_loss(poses.left.wrist_translation, poses.right.wrist_translation,
                                      weights.tau_dist);

    // similarity: route d(sim)/d(coverage) through the renderer
    Image<double> adjoint(scene.image_width, scene.image_height, 0.0);
    for (std::size_t i = 0; i < ev.rendered.size(); ++i) {
        const double diff = ev.rendered.data[i] - static_cast<double>(target.data[i]);
        const double sg = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        adjoint.data[i] = weights.w_sim * (1.0 + saliency.data[i]) * sg;
    }
    auto grads = render_vjp(scene, hands, adjoint, threads);

    // penetration: membership and nearest pairings held fixed, points differentiated
    std::vector<PointAdjoint> adj_l, adj_r;
    const auto samples_l = sample_surface(hands[0], samples_per_capsule);
    const auto samples_r = sample_surface(hands[1], samples_per_capsule);
    ev.terms.inter_pen =
        detail::penetration_direction(hands[1], samples_l, samples_r, &adj_l, &adj_r,
                                      weights.w_pen) +
        detail::penetration_direction(hands[0], samples_r, samples_l, &adj_r, &adj_l,
                                      weights.w_pen);

    // self-penetration: differentiate overlap depth through the capsule endpoints
    auto self_pen_adjoints = [&](const PosedHand& hand, const HandRig& hand_rig,
                                 std::vector<PointAdjoint>& adj) {
        const auto dist = hand_rig.joint_distances();
        for (std::size_t i = 0; i < hand.capsules.size(); ++i) {
            for (std::size_t j = i + 1; j < hand.capsules.size(); ++j) {
                const auto& a = hand.capsules[i];
                const auto& b = hand.capsules[j];
                if (dist[static_cast<std::size_t>(a.joint)][static_cast<std::size_t>(b.joint)] <= 1)
                    continue;
                double s = 0.0, t = 0.0;
                const double sep = segment_distance_st(a.p0, a.p1, b.p0, b.p1, s, t);
                const double depth = a.radius + b.radius - sep;
                if (depth <= 0.0 || sep <= 1e-12) continue;
                const Vec3 ca = a.p0 + s * (a.p1 - a.p0);
                const Vec3 cb = b.p0 + t * (b.p1 - b.p0);
                const Vec3 u = (ca - cb) / sep;
                const double scale = weights.w_pen * -2.0 * depth;  // d(depth^2)/d(sep) * w
                adj.push_back({a.joint, a.p0, scale * (1.0 - s) * u});
                adj.push_back({a.joint, a.p1, scale * s * u});
                adj.push_back({b.joint, b.p0, -scale * (1.0 - t) * u});
                adj.push_back({b.joint, b.p1, -scale * t * u});
            }
        }
    };
    self_pen_adjoints(hands[0], rig_l, adj_l);
    self_pen_adjoints(hands[1], rig_r, adj_r);

    PoseGrad gl = grads[0];
    PoseGrad gr = grads[1];
    gl += fk_vjp(hands[0], adj_l);
    gr += fk_vjp(hands[1], adj_r);

    anatomy_loss_grad(poses.left, rig_l, gl, weights.w_atm);
    anatomy_loss_grad(poses.right, rig_r, gr, weights.w_atm);

    if (ev.terms.distance > 0.0) {
        const Vec3 d = poses.left.wrist_translation - poses.right.wrist_translation;
        gl.wrist_translation += weights.w_dist * 2.0 * d;
        gr.wrist_translation -= weights.w_dist * 2.0 * d;
    }

    ev.terms.total = weights.w_sim * ev.terms.sim + weights.w_atm * ev.terms.anatomy +
                     weights.w_pen * (ev.terms.inter_pen + ev.terms.self_pen) +
                     weights.w_dist * ev.terms.distance;
    pack_grad(gl, gr, ev.gradient);
    return ev;
}

}  // namespace shadowfit
