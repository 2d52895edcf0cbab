#pragma once

#include "shadowfit/core.hpp"
#include "shadowfit/hand_rig.hpp"
#include "shadowfit/hypothesis.hpp"
#include "shadowfit/image.hpp"
#include "shadowfit/image_io.hpp"
#include "shadowfit/objective.hpp"
#include "shadowfit/refine.hpp"
#include "shadowfit/renderer.hpp"

#include <shadowfit/default_rig_data.hpp>

#include <json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace shadowfit {

inline constexpr const char* kRigFormat = "shadowfit-rig/1";
inline constexpr const char* kPoseFormat = "shadowfit-pose/1";
inline constexpr const char* kScoreFormat = "shadowfit-scores/1";

namespace detail {

using json = nlohmann::json;

inline json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw io_error(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw io_error("failed writing " + path);
}

// Unknown keys are configuration mistakes, not extensions; reject them.
inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
    if (!obj.is_object()) throw io_error(where + ": expected a JSON object");
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            throw io_error(where + ": unknown key \"" + item.key() + "\"");
    }
}

inline double get_number(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw io_error(where + ": missing key \"" + key + "\"");
    const auto& v = obj.at(key);
    if (!v.is_number()) throw io_error(where + ": \"" + key + "\" must be a number");
    return v.get<double>();
}

inline int get_int(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw io_error(where + ": missing key \"" + key + "\"");
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw io_error(where + ": \"" + key + "\" must be an integer");
    return v.get<int>();
}

inline std::string get_string(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw io_error(where + ": missing key \"" + key + "\"");
    const auto& v = obj.at(key);
    if (!v.is_string()) throw io_error(where + ": \"" + key + "\" must be a string");
    return v.get<std::string>();
}

inline Vec3 get_vec3(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw io_error(where + ": missing key \"" + key + "\"");
    const auto& v = obj.at(key);
    if (!v.is_array() || v.size() != 3)
        throw io_error(where + ": \"" + key + "\" must be an array of 3 numbers");
    Vec3 out;
    for (int k = 0; k < 3; ++k) {
        if (!v[static_cast<std::size_t>(k)].is_number())
            throw io_error(where + ": \"" + key + "\" must be an array of 3 numbers");
        out[k] = v[static_cast<std::size_t>(k)].get<double>();
    }
    return out;
}

inline std::vector<double> get_array(const json& obj, const char* key, std::size_t expected,
                                     const std::string& where) {
    if (!obj.contains(key)) throw io_error(where + ": missing key \"" + key + "\"");
    const auto& v = obj.at(key);
    if (!v.is_array() || (expected != 0 && v.size() != expected))
        throw io_error(where + ": \"" + key + "\" must be an array of " +
                       std::to_string(expected) + " numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number())
            throw io_error(where + ": \"" + key + "\" must contain only numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

inline json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename T>
void set_if_present(const json& obj, const char* key, T& field, const std::string& where) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if constexpr (std::is_same_v<T, int>) {
        if (!v.is_number_integer()) throw io_error(where + ": \"" + key + "\" must be an integer");
        field = v.get<int>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_integer())
            throw io_error(where + ": \"" + key + "\" must be an integer");
        field = v.get<std::uint64_t>();
    } else {
        if (!v.is_number()) throw io_error(where + ": \"" + key + "\" must be a number");
        field = v.get<double>();
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Hand rig

inline HandRig parse_rig(const detail::json& j, const std::string& where = "rig") {
    using detail::json;
    detail::check_keys(j, {"format", "side", "joints", "capsules", "shape_basis", "limits"},
                       where);
    if (detail::get_string(j, "format", where) != kRigFormat)
        throw io_error(where + ": unsupported format (expected " + std::string(kRigFormat) + ")");
    HandRig rig;
    rig.side = side_from_string(detail::get_string(j, "side", where));
    if (!j.contains("joints") || !j.at("joints").is_array())
        throw io_error(where + ": \"joints\" must be an array");
    for (const auto& je : j.at("joints")) {
        const std::string jw = where + ".joints";
        detail::check_keys(je, {"name", "parent", "offset", "twist", "splay", "bend"}, jw);
        RigJoint joint;
        joint.name = detail::get_string(je, "name", jw);
        joint.parent = detail::get_int(je, "parent", jw);
        joint.offset = detail::get_vec3(je, "offset", jw);
        joint.frame.twist = detail::get_vec3(je, "twist", jw);
        joint.frame.splay = detail::get_vec3(je, "splay", jw);
        joint.frame.bend = detail::get_vec3(je, "bend", jw);
        rig.joints.push_back(joint);
    }
    if (!j.contains("capsules") || !j.at("capsules").is_array())
        throw io_error(where + ": \"capsules\" must be an array");
    for (const auto& ce : j.at("capsules")) {
        const std::string cw = where + ".capsules";
        detail::check_keys(ce, {"name", "joint", "p0", "p1", "radius"}, cw);
        RigCapsule cap;
        cap.name = detail::get_string(ce, "name", cw);
        cap.joint = detail::get_int(ce, "joint", cw);
        cap.p0 = detail::get_vec3(ce, "p0", cw);
        cap.p1 = detail::get_vec3(ce, "p1", cw);
        cap.radius = detail::get_number(ce, "radius", cw);
        rig.capsules.push_back(cap);
    }
    if (!j.contains("shape_basis") || !j.at("shape_basis").is_array())
        throw io_error(where + ": \"shape_basis\" must be an array");
    for (const auto& se : j.at("shape_basis")) {
        const std::string sw = where + ".shape_basis";
        detail::check_keys(se, {"length", "radius"}, sw);
        ShapeRow row;
        row.length = detail::get_array(se, "length", rig.capsules.size(), sw);
        row.radius = detail::get_array(se, "radius", rig.capsules.size(), sw);
        rig.shape_basis.push_back(row);
    }
    if (!j.contains("limits") || !j.at("limits").is_array())
        throw io_error(where + ": \"limits\" must be an array");
    for (const auto& le : j.at("limits")) {
        const std::string lw = where + ".limits";
        detail::check_keys(le, {"joint", "twist", "splay", "bend"}, lw);
        rig.limit_joint.push_back(detail::get_int(le, "joint", lw));
        JointLimits lim;
        const auto tw = detail::get_array(le, "twist", 2, lw);
        const auto sp = detail::get_array(le, "splay", 2, lw);
        const auto be = detail::get_array(le, "bend", 2, lw);
        lim.twist_lo = tw[0];
        lim.twist_hi = tw[1];
        lim.splay_lo = sp[0];
        lim.splay_hi = sp[1];
        lim.bend_lo = be[0];
        lim.bend_hi = be[1];
        rig.limit_values.push_back(lim);
    }
    rig.validate();
    return rig;
}

inline detail::json rig_to_json(const HandRig& rig) {
    using detail::json;
    json j;
    j["format"] = kRigFormat;
    j["side"] = to_string(rig.side);
    j["joints"] = json::array();
    for (const auto& joint : rig.joints) {
        json je;
        je["name"] = joint.name;
        je["parent"] = joint.parent;
        je["offset"] = detail::vec3_json(joint.offset);
        je["twist"] = detail::vec3_json(joint.frame.twist);
        je["splay"] = detail::vec3_json(joint.frame.splay);
        je["bend"] = detail::vec3_json(joint.frame.bend);
        j["joints"].push_back(je);
    }
    j["capsules"] = json::array();
    for (const auto& cap : rig.capsules) {
        json ce;
        ce["name"] = cap.name;
        ce["joint"] = cap.joint;
        ce["p0"] = detail::vec3_json(cap.p0);
        ce["p1"] = detail::vec3_json(cap.p1);
        ce["radius"] = cap.radius;
        j["capsules"].push_back(ce);
    }
    j["shape_basis"] = json::array();
    for (const auto& row : rig.shape_basis) {
        json se;
        se["length"] = row.length;
        se["radius"] = row.radius;
        j["shape_basis"].push_back(se);
    }
    j["limits"] = json::array();
    for (std::size_t i = 0; i < rig.limit_joint.size(); ++i) {
        json le;
        le["joint"] = rig.limit_joint[i];
        const auto& lim = rig.limit_values[i];
        le["twist"] = json::array({lim.twist_lo, lim.twist_hi});
        le["splay"] = json::array({lim.splay_lo, lim.splay_hi});
        le["bend"] = json::array({lim.bend_lo, lim.bend_hi});
        j["limits"].push_back(le);
    }
    return j;
}

inline HandRig load_rig(const std::string& path) {
    return parse_rig(detail::parse_json_file(path), path);
}

inline void save_rig(const std::string& path, const HandRig& rig) {
    detail::write_json_file(path, rig_to_json(rig));
}

// Built-in anthropometric rig (right hand), compiled into the binary.
inline const HandRig& default_rig() {
    static const HandRig rig =
        parse_rig(detail::json::parse(kDefaultRigJson), "default rig");
    return rig;
}

// ---------------------------------------------------------------------------
// Pose pair files

struct PoseFile {
    PosePair poses;
    std::string scene_digest;  // empty when unknown
};

namespace detail {

inline json pose_json(const HandPose& pose) {
    json j;
    j["global_orient"] = json::array({pose.global_orient.x(), pose.global_orient.y(),
                                      pose.global_orient.z()});
    json rots = json::array();
    for (const auto& r : pose.joint_rotations)
        for (int k = 0; k < 3; ++k) rots.push_back(r[k]);
    j["joint_rotations"] = rots;
    json shape = json::array();
    for (int k = 0; k < pose.shape.size(); ++k) shape.push_back(pose.shape[k]);
    j["shape"] = shape;
    j["wrist_translation"] = vec3_json(pose.wrist_translation);
    return j;
}

inline HandPose pose_from_json(const json& j, Side side, const std::string& where) {
    check_keys(j, {"global_orient", "joint_rotations", "shape", "wrist_translation"}, where);
    HandPose pose;
    pose.side = side;
    pose.global_orient = get_vec3(j, "global_orient", where);
    const auto rots = get_array(j, "joint_rotations", 0, where);
    if (rots.size() % 3 != 0)
        throw io_error(where + ": \"joint_rotations\" length must be a multiple of 3");
    pose.joint_rotations.resize(rots.size() / 3);
    for (std::size_t i = 0; i < pose.joint_rotations.size(); ++i)
        pose.joint_rotations[i] = Vec3(rots[3 * i], rots[3 * i + 1], rots[3 * i + 2]);
    const auto shape = get_array(j, "shape", 0, where);
    pose.shape = VecX::Zero(static_cast<Eigen::Index>(shape.size()));
    for (std::size_t i = 0; i < shape.size(); ++i)
        pose.shape[static_cast<Eigen::Index>(i)] = shape[i];
    pose.wrist_translation = get_vec3(j, "wrist_translation", where);
    pose.validate();
    return pose;
}

}  // namespace detail

inline PoseFile parse_pose_pair(const detail::json& j, const std::string& where = "pose") {
    detail::check_keys(j, {"format", "scene_digest", "left", "right"}, where);
    if (detail::get_string(j, "format", where) != kPoseFormat)
        throw io_error(where + ": unsupported format (expected " + std::string(kPoseFormat) +
                       ")");
    PoseFile out;
    if (j.contains("scene_digest"))
        out.scene_digest = detail::get_string(j, "scene_digest", where);
    if (!j.contains("left") || !j.contains("right"))
        throw io_error(where + ": both \"left\" and \"right\" hands are required");
    out.poses.left = detail::pose_from_json(j.at("left"), Side::Left, where + ".left");
    out.poses.right = detail::pose_from_json(j.at("right"), Side::Right, where + ".right");
    return out;
}

inline PoseFile load_pose_pair(const std::string& path) {
    return parse_pose_pair(detail::parse_json_file(path), path);
}

inline detail::json pose_pair_to_json(const PosePair& poses,
                                      const std::string& scene_digest = "") {
    detail::json j;
    j["format"] = kPoseFormat;
    if (!scene_digest.empty()) j["scene_digest"] = scene_digest;
    j["left"] = detail::pose_json(poses.left);
    j["right"] = detail::pose_json(poses.right);
    return j;
}

inline void save_pose_pair(const std::string& path, const PosePair& poses,
                           const std::string& scene_digest = "") {
    detail::write_json_file(path, pose_pair_to_json(poses, scene_digest));
}

// ---------------------------------------------------------------------------
// Configuration files: every key optional, defaults fill the rest, unknown
// keys rejected.

inline SceneConfig parse_scene(const detail::json& j, const std::string& where = "scene") {
    detail::check_keys(j,
                       {"light_position", "screen_distance", "image_width", "image_height",
                        "screen_extent", "softness", "binarize_threshold"},
                       where);
    SceneConfig s;
    if (j.contains("light_position")) s.light_position = detail::get_vec3(j, "light_position", where);
    detail::set_if_present(j, "screen_distance", s.screen_distance, where);
    detail::set_if_present(j, "image_width", s.image_width, where);
    detail::set_if_present(j, "image_height", s.image_height, where);
    detail::set_if_present(j, "screen_extent", s.screen_extent, where);
    detail::set_if_present(j, "softness", s.softness, where);
    detail::set_if_present(j, "binarize_threshold", s.binarize_threshold, where);
    s.validate();
    return s;
}

inline detail::json scene_to_json(const SceneConfig& s) {
    detail::json j;
    j["light_position"] = detail::vec3_json(s.light_position);
    j["screen_distance"] = s.screen_distance;
    j["image_width"] = s.image_width;
    j["image_height"] = s.image_height;
    j["screen_extent"] = s.screen_extent;
    j["softness"] = s.softness;
    j["binarize_threshold"] = s.binarize_threshold;
    return j;
}

inline ObjectiveWeights parse_weights(const detail::json& j,
                                      const std::string& where = "weights") {
    detail::check_keys(j, {"w_sim", "w_atm", "w_pen", "w_dist", "tau_dist"}, where);
    ObjectiveWeights w;
    detail::set_if_present(j, "w_sim", w.w_sim, where);
    detail::set_if_present(j, "w_atm", w.w_atm, where);
    detail::set_if_present(j, "w_pen", w.w_pen, where);
    detail::set_if_present(j, "w_dist", w.w_dist, where);
    detail::set_if_present(j, "tau_dist", w.tau_dist, where);
    w.validate();
    return w;
}

inline detail::json weights_to_json(const ObjectiveWeights& w) {
    detail::json j;
    j["w_sim"] = w.w_sim;
    j["w_atm"] = w.w_atm;
    j["w_pen"] = w.w_pen;
    j["w_dist"] = w.w_dist;
    j["tau_dist"] = w.tau_dist;
    return j;
}

inline RefineConfig parse_refine_config(const detail::json& j,
                                        const std::string& where = "refine config") {
    detail::check_keys(j,
                       {"learning_rate", "decay_factor", "decay_at_iteration", "max_iterations",
                        "adam_beta1", "adam_beta2", "adam_epsilon", "stop_metric_threshold",
                        "plateau_window", "plateau_epsilon", "rng_seed"},
                       where);
    RefineConfig c;
    detail::set_if_present(j, "learning_rate", c.learning_rate, where);
    detail::set_if_present(j, "decay_factor", c.decay_factor, where);
    detail::set_if_present(j, "decay_at_iteration", c.decay_at_iteration, where);
    detail::set_if_present(j, "max_iterations", c.max_iterations, where);
    detail::set_if_present(j, "adam_beta1", c.adam_beta1, where);
    detail::set_if_present(j, "adam_beta2", c.adam_beta2, where);
    detail::set_if_present(j, "adam_epsilon", c.adam_epsilon, where);
    if (j.contains("stop_metric_threshold")) {
        const auto& v = j.at("stop_metric_threshold");
        if (v.is_null()) {
            c.stop_metric_threshold.reset();
        } else if (v.is_number()) {
            c.stop_metric_threshold = v.get<double>();
        } else {
            throw io_error(where + ": \"stop_metric_threshold\" must be a number or null");
        }
    }
    detail::set_if_present(j, "plateau_window", c.plateau_window, where);
    detail::set_if_present(j, "plateau_epsilon", c.plateau_epsilon, where);
    detail::set_if_present(j, "rng_seed", c.rng_seed, where);
    c.validate();
    return c;
}

inline detail::json refine_config_to_json(const RefineConfig& c) {
    detail::json j;
    j["learning_rate"] = c.learning_rate;
    j["decay_factor"] = c.decay_factor;
    j["decay_at_iteration"] = c.decay_at_iteration;
    j["max_iterations"] = c.max_iterations;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_epsilon"] = c.adam_epsilon;
    if (c.stop_metric_threshold)
        j["stop_metric_threshold"] = *c.stop_metric_threshold;
    else
        j["stop_metric_threshold"] = nullptr;
    j["plateau_window"] = c.plateau_window;
    j["plateau_epsilon"] = c.plateau_epsilon;
    j["rng_seed"] = c.rng_seed;
    return j;
}

inline HypothesisConfig parse_hypothesis_config(const detail::json& j,
                                                const std::string& where = "hypothesis config") {
    detail::check_keys(j,
                       {"n_hypotheses", "top_k", "joint_sigma", "translation_sigma",
                        "score_iou_weight", "score_chamfer_weight"},
                       where);
    HypothesisConfig c;
    detail::set_if_present(j, "n_hypotheses", c.n_hypotheses, where);
    detail::set_if_present(j, "top_k", c.top_k, where);
    detail::set_if_present(j, "joint_sigma", c.joint_sigma, where);
    detail::set_if_present(j, "translation_sigma", c.translation_sigma, where);
    detail::set_if_present(j, "score_iou_weight", c.score_iou_weight, where);
    detail::set_if_present(j, "score_chamfer_weight", c.score_chamfer_weight, where);
    c.validate();
    return c;
}

inline detail::json hypothesis_config_to_json(const HypothesisConfig& c) {
    detail::json j;
    j["n_hypotheses"] = c.n_hypotheses;
    j["top_k"] = c.top_k;
    j["joint_sigma"] = c.joint_sigma;
    j["translation_sigma"] = c.translation_sigma;
    j["score_iou_weight"] = c.score_iou_weight;
    j["score_chamfer_weight"] = c.score_chamfer_weight;
    return j;
}

template <typename Parse>
auto load_config_file(const std::string& path, Parse parse) {
    return parse(detail::parse_json_file(path), path);
}

inline SceneConfig load_scene(const std::string& path) {
    return parse_scene(detail::parse_json_file(path), path);
}
inline ObjectiveWeights load_weights(const std::string& path) {
    return parse_weights(detail::parse_json_file(path), path);
}
inline RefineConfig load_refine_config(const std::string& path) {
    return parse_refine_config(detail::parse_json_file(path), path);
}
inline HypothesisConfig load_hypothesis_config(const std::string& path) {
    return parse_hypothesis_config(detail::parse_json_file(path), path);
}

// Digest of the scene geometry alone; stored in pose files so a pose can be
// matched to the scene it was fitted under.
inline std::string scene_digest(const SceneConfig& scene) {
    return hex16(fnv1a64(scene_to_json(scene).dump()));
}

// Stable 16-hex-digit digest of the full run configuration. Serialized keys
// are sorted by nlohmann::json, so the digest depends only on values.
inline std::string config_digest(const SceneConfig& scene, const ObjectiveWeights& weights,
                                 const RefineConfig& refine_cfg,
                                 const HypothesisConfig& hyp_cfg) {
    detail::json j;
    j["scene"] = scene_to_json(scene);
    j["weights"] = weights_to_json(weights);
    j["refine"] = refine_config_to_json(refine_cfg);
    j["hypothesis"] = hypothesis_config_to_json(hyp_cfg);
    return hex16(fnv1a64(j.dump()));
}

// ---------------------------------------------------------------------------
// Saliency

inline constexpr int kSaliencyBlurSize = 15;
inline constexpr double kSaliencyBlurSigma = 2.5;

inline SaliencyMap uniform_saliency(std::size_t width, std::size_t height, double value = 0.0) {
    SaliencyMap s(width, height);
    std::fill(s.data.begin(), s.data.end(), value);
    return s;
}

// Reads a grayscale importance map in [0, 1] and smooths it so nearby pixels
// share emphasis. Dimensions must match the target image.
inline SaliencyMap load_saliency(const std::string& path, int width, int height) {
    SoftMask raw = read_gray_image(path);
    if (static_cast<int>(raw.width) != width || static_cast<int>(raw.height) != height)
        throw io_error(path + ": saliency dimensions " + std::to_string(raw.width) + "x" +
                       std::to_string(raw.height) + " do not match image " +
                       std::to_string(width) + "x" + std::to_string(height));
    return gaussian_blur(raw, kSaliencyBlurSize, kSaliencyBlurSigma);
}

// ---------------------------------------------------------------------------
// Hypothesis score overrides: {"format": "...", "scores": {"<index>": value}}

inline std::map<int, double> parse_scores(const detail::json& j,
                                          const std::string& where = "scores") {
    detail::check_keys(j, {"format", "scores"}, where);
    if (detail::get_string(j, "format", where) != kScoreFormat)
        throw io_error(where + ": unsupported format (expected " + std::string(kScoreFormat) +
                       ")");
    if (!j.contains("scores") || !j.at("scores").is_object())
        throw io_error(where + ": \"scores\" must be an object");
    std::map<int, double> out;
    for (const auto& item : j.at("scores").items()) {
        int idx = 0;
        try {
            std::size_t pos = 0;
            idx = std::stoi(item.key(), &pos);
            if (pos != item.key().size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw io_error(where + ": score keys must be integer hypothesis indices, got \"" +
                           item.key() + "\"");
        }
        if (idx < 0) throw io_error(where + ": score indices must be >= 0");
        if (!item.value().is_number())
            throw io_error(where + ": score values must be numbers");
        out[idx] = item.value().get<double>();
    }
    return out;
}

inline std::map<int, double> load_scores(const std::string& path) {
    return parse_scores(detail::parse_json_file(path), path);
}

// Applies overrides onto a hypothesis list; out-of-range indices are errors.
inline void apply_scores(std::vector<Hypothesis>& hypotheses,
                         const std::map<int, double>& scores) {
    for (const auto& [idx, value] : scores) {
        if (idx >= static_cast<int>(hypotheses.size()))
            throw validation_error("score override index " + std::to_string(idx) +
                                   " exceeds hypothesis count " +
                                   std::to_string(hypotheses.size()));
        hypotheses[static_cast<std::size_t>(idx)].score = value;
    }
}

}  // namespace shadowfit
