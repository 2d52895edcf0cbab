#pragma once

#include "shadowfit/core.hpp"
#include "shadowfit/rotation.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace shadowfit {

// Pose coefficients for one hand: global orientation, per-joint axis-angle
// rotations, shape coefficients, wrist translation.
struct HandPose {
    Side side = Side::Right;
    Vec3 global_orient = Vec3::Zero();
    std::vector<Vec3> joint_rotations;  // articulated joints, rig order (root excluded)
    VecX shape;                         // one coefficient per shape basis row
    Vec3 wrist_translation = Vec3::Zero();

    static HandPose rest(Side side, int articulated_joints = 15, int shape_dims = 10) {
        HandPose p;
        p.side = side;
        p.joint_rotations.assign(static_cast<std::size_t>(articulated_joints), Vec3::Zero());
        p.shape = VecX::Zero(shape_dims);
        return p;
    }

    void validate() const {
        auto check_finite = [](const Vec3& v, const std::string& what) {
            if (!v.allFinite()) throw validation_error(what + " must be finite");
        };
        check_finite(global_orient, "global_orient");
        check_finite(wrist_translation, "wrist_translation");
        if (global_orient.norm() >= 2.0 * M_PI)
            throw validation_error("global_orient magnitude must be < 2*pi");
        for (std::size_t i = 0; i < joint_rotations.size(); ++i) {
            check_finite(joint_rotations[i], "joint_rotations[" + std::to_string(i) + "]");
            if (joint_rotations[i].norm() >= 2.0 * M_PI)
                throw validation_error("joint_rotations[" + std::to_string(i) +
                                       "] magnitude must be < 2*pi");
        }
        for (Eigen::Index i = 0; i < shape.size(); ++i) {
            if (!std::isfinite(shape[i]) || std::abs(shape[i]) > 5.0)
                throw validation_error("shape[" + std::to_string(i) + "] must be finite and in [-5, 5]");
        }
    }
};

struct JointFrame {
    Vec3 twist = Vec3::UnitY();
    Vec3 splay = Vec3::UnitZ();
    Vec3 bend = Vec3::UnitX();
};

struct RigJoint {
    std::string name;
    int parent = -1;           // -1 for the root
    Vec3 offset = Vec3::Zero();  // position in the parent joint frame
    JointFrame frame;
};

struct RigCapsule {
    std::string name;
    int joint = 0;  // attachment joint
    Vec3 p0 = Vec3::Zero();  // endpoints in the attachment joint frame
    Vec3 p1 = Vec3::Zero();
    double radius = 0.0;
};

struct ShapeRow {
    std::vector<double> length;  // per-capsule relative length deltas
    std::vector<double> radius;  // per-capsule relative radius deltas
};

struct JointLimits {
    double twist_lo = 0.0, twist_hi = 0.0;
    double splay_lo = 0.0, splay_hi = 0.0;
    double bend_lo = 0.0, bend_hi = 0.0;
};

struct HandRig {
    Side side = Side::Right;
    std::vector<RigJoint> joints;
    std::vector<RigCapsule> capsules;
    std::vector<ShapeRow> shape_basis;
    std::vector<int> limit_joint;          // articulated joints with limits
    std::vector<JointLimits> limit_values;  // aligned with limit_joint

    int articulated_joints() const { return static_cast<int>(joints.size()) - 1; }

    // Maps joint index to its slot in joint_rotations (root has none).
    int rotation_index(int joint) const { return joint - 1; }

    void validate() const {
        require(!joints.empty(), "rig must have at least one joint");
        require(!capsules.empty(), "rig must have at least one capsule");
        int roots = 0;
        for (std::size_t i = 0; i < joints.size(); ++i) {
            const auto& j = joints[i];
            const std::string tag = "joints[" + std::to_string(i) + "]";
            if (j.parent == -1) {
                ++roots;
                require(i == 0, tag + ": the root must be joint 0");
            } else {
                require(j.parent >= 0 && j.parent < static_cast<int>(joints.size()),
                        tag + ": parent out of range");
                require(j.parent < static_cast<int>(i),
                        tag + ": parent must precede the joint (no cycles)");
            }
            require(j.offset.allFinite(), tag + ".offset must be finite");
            for (const Vec3* ax : {&j.frame.twist, &j.frame.splay, &j.frame.bend})
                require(ax->allFinite() && std::abs(ax->norm() - 1.0) < 1e-9,
                        tag + ": frame axes must be unit vectors");
        }
        require(roots == 1, "rig must have exactly one root joint");
        for (std::size_t i = 0; i < capsules.size(); ++i) {
            const auto& c = capsules[i];
            const std::string tag = "capsules[" + std::to_string(i) + "]";
            require(c.joint >= 0 && c.joint < static_cast<int>(joints.size()),
                    tag + ".joint out of range");
            require(c.p0.allFinite() && c.p1.allFinite(), tag + ": endpoints must be finite");
            require(std::isfinite(c.radius) && c.radius > 0.0, tag + ".radius must be > 0");
        }
        for (std::size_t r = 0; r < shape_basis.size(); ++r) {
            const std::string tag = "shape_basis[" + std::to_string(r) + "]";
            require(shape_basis[r].length.size() == capsules.size() &&
                        shape_basis[r].radius.size() == capsules.size(),
                    tag + ": row size must match the capsule count");
            for (double v : shape_basis[r].length)
                require(std::isfinite(v), tag + ".length entries must be finite");
            for (double v : shape_basis[r].radius)
                require(std::isfinite(v), tag + ".radius entries must be finite");
        }
        require(limit_joint.size() == limit_values.size(), "limit tables must be aligned");
        std::vector<int> seen(joints.size(), 0);
        for (std::size_t i = 0; i < limit_joint.size(); ++i) {
            const std::string tag = "limits[" + std::to_string(i) + "]";
            const int j = limit_joint[i];
            require(j >= 1 && j < static_cast<int>(joints.size()),
                    tag + ".joint must be an articulated joint index");
            require(!seen[static_cast<std::size_t>(j)]++, tag + ": duplicate joint entry");
            const auto& l = limit_values[i];
            require(l.twist_lo <= l.twist_hi && l.splay_lo <= l.splay_hi && l.bend_lo <= l.bend_hi,
                    tag + ": lo must not exceed hi");
        }
    }

    // Graph distance between capsule attachment joints, used to exempt
    // neighboring capsules from self-collision.
    std::vector<std::vector<int>> joint_distances() const {
        const int n = static_cast<int>(joints.size());
        std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
        for (int i = 1; i < n; ++i) {
            adj[static_cast<std::size_t>(i)].push_back(joints[static_cast<std::size_t>(i)].parent);
            adj[static_cast<std::size_t>(joints[static_cast<std::size_t>(i)].parent)].push_back(i);
        }
        std::vector<std::vector<int>> dist(static_cast<std::size_t>(n),
                                           std::vector<int>(static_cast<std::size_t>(n), -1));
        for (int s = 0; s < n; ++s) {
            auto& d = dist[static_cast<std::size_t>(s)];
            d[static_cast<std::size_t>(s)] = 0;
            std::deque<int> q{s};
            while (!q.empty()) {
                const int u = q.front();
                q.pop_front();
                for (int v : adj[static_cast<std::size_t>(u)]) {
                    if (d[static_cast<std::size_t>(v)] < 0) {
                        d[static_cast<std::size_t>(v)] = d[static_cast<std::size_t>(u)] + 1;
                        q.push_back(v);
                    }
                }
            }
        }
        return dist;
    }

    const JointLimits* limits_for(int joint) const {
        for (std::size_t i = 0; i < limit_joint.size(); ++i)
            if (limit_joint[i] == joint) return &limit_values[i];
        return nullptr;
    }

    // The same rig reflected across the x = 0 plane of its local frame. Positions
    // negate x; axis-angle-like vectors (frame axes) map (x,y,z) -> (x,-y,-z) so
    // that mirrored poses produce exactly mirrored geometry and identical joint
    // limit components.
    HandRig mirrored() const {
        HandRig m = *this;
        m.side = opposite(side);
        auto mp = [](Vec3& v) { v = Vec3(-v.x(), v.y(), v.z()); };
        auto ma = [](Vec3& v) { v = Vec3(v.x(), -v.y(), -v.z()); };
        for (auto& j : m.joints) {
            mp(j.offset);
            ma(j.frame.twist);
            ma(j.frame.splay);
            ma(j.frame.bend);
        }
        for (auto& c : m.capsules) {
            mp(c.p0);
            mp(c.p1);
        }
        return m;
    }
};

// Mirror map for pose coefficients, the counterpart of HandRig::mirrored.
inline Vec3 mirror_axis_angle(const Vec3& v) { return Vec3(v.x(), -v.y(), -v.z()); }
inline Vec3 mirror_point(const Vec3& v) { return Vec3(-v.x(), v.y(), v.z()); }

inline HandPose mirror_pose(const HandPose& pose) {
    HandPose m = pose;
    m.side = opposite(pose.side);
    m.global_orient = mirror_axis_angle(pose.global_orient);
    for (auto& v : m.joint_rotations) v = mirror_axis_angle(v);
    m.wrist_translation = mirror_point(pose.wrist_translation);
    return m;
}

// Rig with shape coefficients baked into capsule lengths and radii. Capsule p1
// moves along p0->p1; joint offsets are unchanged.
inline HandRig apply_shape(const HandRig& rig, const VecX& shape) {
    require(static_cast<std::size_t>(shape.size()) == rig.shape_basis.size(),
            "shape coefficient count must match the rig's shape basis rows");
    HandRig out = rig;
    for (std::size_t c = 0; c < rig.capsules.size(); ++c) {
        double lf = 1.0, rf = 1.0;
        for (std::size_t k = 0; k < rig.shape_basis.size(); ++k) {
            lf += shape[static_cast<Eigen::Index>(k)] * rig.shape_basis[k].length[c];
            rf += shape[static_cast<Eigen::Index>(k)] * rig.shape_basis[k].radius[c];
        }
        auto& cap = out.capsules[c];
        cap.p1 = cap.p0 + (cap.p1 - cap.p0) * lf;
        cap.radius = cap.radius * rf;
        if (!(cap.radius > 0.0))
            throw validation_error("capsules[" + std::to_string(c) +
                                   "]: shape coefficients drive radius to " +
                                   std::to_string(cap.radius) + " (must stay > 0)");
    }
    return out;
}

struct PosedJoint {
    Mat3 rotation = Mat3::Identity();  // world orientation
    Vec3 origin = Vec3::Zero();        // world position
    int parent = -1;
};

struct PosedCapsule {
    Vec3 p0 = Vec3::Zero();  // world endpoints
    Vec3 p1 = Vec3::Zero();
    double radius = 0.0;
    int joint = 0;
    Vec3 local_p0 = Vec3::Zero();
    Vec3 local_p1 = Vec3::Zero();
};

struct PosedHand {
    Side side = Side::Right;
    std::vector<PosedJoint> joints;
    std::vector<PosedCapsule> capsules;
    HandPose pose;
};

// Applies pose.shape, then walks the joint tree:
//   root:  T = Trans(wrist_translation) * Rot(global_orient)
//   child: T = T_parent * Trans(offset) * Rot(joint_rotation)
inline PosedHand forward_kinematics(const HandRig& rig, const HandPose& pose) {
    require(rig.side == pose.side, "pose side does not match rig side");
    require(static_cast<int>(pose.joint_rotations.size()) == rig.articulated_joints(),
            "pose has " + std::to_string(pose.joint_rotations.size()) +
                " joint rotations, rig expects " + std::to_string(rig.articulated_joints()));
    const HandRig shaped = apply_shape(rig, pose.shape);

    PosedHand hand;
    hand.side = pose.side;
    hand.pose = pose;
    hand.joints.resize(shaped.joints.size());
    hand.joints[0].rotation = exp_so3(pose.global_orient);
    hand.joints[0].origin = pose.wrist_translation;
    hand.joints[0].parent = -1;
    for (std::size_t j = 1; j < shaped.joints.size(); ++j) {
        const auto& rj = shaped.joints[j];
        const auto& par = hand.joints[static_cast<std::size_t>(rj.parent)];
        auto& pj = hand.joints[j];
        pj.parent = rj.parent;
        pj.origin = par.origin + par.rotation * rj.offset;
        pj.rotation = par.rotation * exp_so3(pose.joint_rotations[j - 1]);
    }
    hand.capsules.resize(shaped.capsules.size());
    for (std::size_t c = 0; c < shaped.capsules.size(); ++c) {
        const auto& rc = shaped.capsules[c];
        const auto& pj = hand.joints[static_cast<std::size_t>(rc.joint)];
        auto& pc = hand.capsules[c];
        pc.joint = rc.joint;
        pc.local_p0 = rc.p0;
        pc.local_p1 = rc.p1;
        pc.radius = rc.radius;
        pc.p0 = pj.origin + pj.rotation * rc.p0;
        pc.p1 = pj.origin + pj.rotation * rc.p1;
    }
    return hand;
}

struct SurfaceSample {
    int capsule = 0;
    int joint = 0;
    Vec3 local = Vec3::Zero();  // attachment joint frame
    Vec3 world = Vec3::Zero();
};

// Deterministic point spread over each capsule surface: samples advance along the
// profile (end cap, cylinder, end cap) while the azimuth steps by the golden angle.
inline std::vector<SurfaceSample> sample_surface(const PosedHand& hand, int samples_per_capsule) {
    require(samples_per_capsule >= 8, "samples_per_capsule must be >= 8");
    constexpr double kGoldenAngle = 2.399963229728653;
    std::vector<SurfaceSample> out;
    out.reserve(hand.capsules.size() * static_cast<std::size_t>(samples_per_capsule));
    for (std::size_t c = 0; c < hand.capsules.size(); ++c) {
        const auto& cap = hand.capsules[c];
        const Vec3 ab = cap.local_p1 - cap.local_p0;
        const double len = ab.norm();
        const double r = cap.radius;
        Vec3 axis = len > 1e-12 ? Vec3(ab / len) : Vec3::UnitY();
        const Vec3 ref = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
        const Vec3 e1 = axis.cross(ref).normalized();
        const Vec3 e2 = axis.cross(e1);
        const double quarter = 0.5 * M_PI * r;
        const double total = 2.0 * quarter + len;
        const auto& pj = hand.joints[static_cast<std::size_t>(cap.joint)];
        for (int k = 0; k < samples_per_capsule; ++k) {
            const double t = (k + 0.5) / samples_per_capsule * total;
            const double phi = std::fmod(k * kGoldenAngle, 2.0 * M_PI);
            const Vec3 radial = std::cos(phi) * e1 + std::sin(phi) * e2;
            Vec3 local;
            if (t < quarter) {
                const double psi = t / r;  // polar angle from the -axis pole
                local = cap.local_p0 + r * (-std::cos(psi) * axis + std::sin(psi) * radial);
            } else if (t < quarter + len) {
                local = cap.local_p0 + (t - quarter) * axis + r * radial;
            } else {
                const double psi = (t - quarter - len) / r;  // from the equator toward +axis
                local = cap.local_p1 + r * (std::cos(psi) * radial + std::sin(psi) * axis);
            }
            SurfaceSample s;
            s.capsule = static_cast<int>(c);
            s.joint = cap.joint;
            s.local = local;
            s.world = pj.origin + pj.rotation * local;
            out.push_back(s);
        }
    }
    return out;
}

// Projects an axis-angle rotation onto an anatomical bone frame, returning
// (twist, splay, bend) components, each the axis component scaled by the angle.
inline Vec3 decompose_tsb(const Vec3& rotation, const JointFrame& frame) {
    for (const Vec3* ax : {&frame.twist, &frame.splay, &frame.bend})
        require(std::abs(ax->norm() - 1.0) < 1e-6, "decompose_tsb: frame axes must be unit length");
    require(std::abs(frame.twist.dot(frame.splay)) < 1e-6 &&
                std::abs(frame.twist.dot(frame.bend)) < 1e-6 &&
                std::abs(frame.splay.dot(frame.bend)) < 1e-6,
            "decompose_tsb: frame must be orthonormal");
    return Vec3(rotation.dot(frame.twist), rotation.dot(frame.splay), rotation.dot(frame.bend));
}

inline Vec3 decompose_tsb(const HandRig& rig, int joint, const Vec3& rotation) {
    require(joint >= 1 && joint < static_cast<int>(rig.joints.size()),
            "decompose_tsb: joint must be an articulated joint index");
    return decompose_tsb(rotation, rig.joints[static_cast<std::size_t>(joint)].frame);
}

// Distance from a point to a capsule surface (negative inside).
inline double capsule_sdf(const Vec3& p, const Vec3& a, const Vec3& b, double r) {
    const Vec3 ab = b - a;
    const double L2 = ab.squaredNorm();
    double t = 0.0;
    if (L2 > 0.0) t = std::clamp((p - a).dot(ab) / L2, 0.0, 1.0);
    return (p - (a + t * ab)).norm() - r;
}

// Closest-point distance between two segments; s_out/t_out receive the
// closest-point parameters along each segment.
inline double segment_distance_st(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2,
                                  double& s_out, double& t_out) {
    const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    double s = 0.0, t = 0.0;
    if (a <= 1e-18 && e <= 1e-18) {
        s_out = 0.0;
        t_out = 0.0;
        return r.norm();
    }
    if (a <= 1e-18) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = d1.dot(r);
        if (e <= 1e-18) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = d1.dot(d2);
            const double denom = a * e - b * b;
            if (denom > 1e-18) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    s_out = s;
    t_out = t;
    return (p1 + s * d1 - (p2 + t * d2)).norm();
}

inline double segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2) {
    double s = 0.0, t = 0.0;
    return segment_distance_st(p1, q1, p2, q2, s, t);
}

// Reverse pass through forward_kinematics. Accumulates the pose gradient from
// adjoints of world-space points that are rigidly attached to joints.
struct PointAdjoint {
    int joint = 0;
    Vec3 world = Vec3::Zero();      // the point's world position
    Vec3 world_bar = Vec3::Zero();  // dL/d(world position)
};

struct PoseGrad {
    Vec3 global_orient = Vec3::Zero();
    std::vector<Vec3> joint_rotations;
    Vec3 wrist_translation = Vec3::Zero();

    static PoseGrad zero(int articulated_joints) {
        PoseGrad g;
        g.joint_rotations.assign(static_cast<std::size_t>(articulated_joints), Vec3::Zero());
        return g;
    }

    PoseGrad& operator+=(const PoseGrad& o) {
        global_orient += o.global_orient;
        wrist_translation += o.wrist_translation;
        for (std::size_t i = 0; i < joint_rotations.size(); ++i)
            joint_rotations[i] += o.joint_rotations[i];
        return *this;
    }
};

inline PoseGrad fk_vjp(const PosedHand& hand, const std::vector<PointAdjoint>& adjoints) {
    const std::size_t nj = hand.joints.size();
    // Per-joint sums over all attached-or-descendant points: S = sum xbar,
    // C = sum x cross xbar. The joint's rotation gradient follows from the
    // left Jacobian of its local axis-angle.
    std::vector<Vec3> S(nj, Vec3::Zero()), C(nj, Vec3::Zero());
    for (const auto& a : adjoints) {
        S[static_cast<std::size_t>(a.joint)] += a.world_bar;
        C[static_cast<std::size_t>(a.joint)] += a.world.cross(a.world_bar);
    }
    for (std::size_t j = nj; j-- > 1;) {
        const auto par = static_cast<std::size_t>(hand.joints[j].parent);
        S[par] += S[j];
        C[par] += C[j];
    }
    PoseGrad g = PoseGrad::zero(static_cast<int>(nj) - 1);
    for (std::size_t j = 1; j < nj; ++j) {
        const Vec3 torque = C[j] - hand.joints[j].origin.cross(S[j]);
        const Mat3& w_par = hand.joints[static_cast<std::size_t>(hand.joints[j].parent)].rotation;
        g.joint_rotations[j - 1] =
            left_jacobian(hand.pose.joint_rotations[j - 1]).transpose() * (w_par.transpose() * torque);
    }
    g.wrist_translation = S[0];
    g.global_orient = left_jacobian(hand.pose.global_orient).transpose() *
                      (C[0] - hand.joints[0].origin.cross(S[0]));
    return g;
}

}  // namespace shadowfit
