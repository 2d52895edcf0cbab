#pragma once

#include "shadowfit/core.hpp"
#include "shadowfit/hand_rig.hpp"
#include "shadowfit/image.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace shadowfit {

// Point light at light_position shining along +z onto a screen plane at
// light_position.z + screen_distance. Screen coordinates are meters in that
// plane, origin on the optical axis, x right, y up.
struct SceneConfig {
    Vec3 light_position = Vec3::Zero();
    double screen_distance = 2.5;
    int image_width = 256;
    int image_height = 256;
    double screen_extent = 2.0;  // meters covered by the larger image dimension
    double softness = 0.01;      // coverage transition scale, screen meters
    double binarize_threshold = 0.5;

    void validate() const {
        require(light_position.allFinite(), "light_position must be finite");
        require(std::isfinite(screen_distance) && screen_distance > 0.0,
                "screen_distance must be > 0");
        require(image_width >= 8 && image_height >= 8, "image dimensions must be >= 8");
        require(std::isfinite(screen_extent) && screen_extent > 0.0, "screen_extent must be > 0");
        require(std::isfinite(softness) && softness > 0.0, "softness must be > 0");
        require(binarize_threshold > 0.0 && binarize_threshold < 1.0,
                "binarize_threshold must be in (0, 1)");
    }

    double pixel_size() const { return screen_extent / std::max(image_width, image_height); }
    double pixel_center_u(int i) const { return (i + 0.5 - 0.5 * image_width) * pixel_size(); }
    double pixel_center_v(int j) const { return (0.5 * image_height - (j + 0.5)) * pixel_size(); }
};

struct ScreenPoint {
    Vec2 screen = Vec2::Zero();  // absolute meters in the screen plane
    Vec2 axis = Vec2::Zero();    // meters relative to the optical axis
    Vec2 pixel = Vec2::Zero();   // continuous pixel coordinates, (0,0) = top-left pixel center
};

inline ScreenPoint project_point(const SceneConfig& scene, const Vec3& p) {
    const double dz = p.z() - scene.light_position.z();
    if (!(dz > 1e-9)) throw numeric_error("cannot project point at or behind the light plane");
    if (dz > scene.screen_distance + 1e-12)
        throw numeric_error("cannot project point beyond the screen plane");
    const double m = scene.screen_distance / dz;
    ScreenPoint sp;
    sp.axis = Vec2((p.x() - scene.light_position.x()) * m,
                   (p.y() - scene.light_position.y()) * m);
    sp.screen = sp.axis + Vec2(scene.light_position.x(), scene.light_position.y());
    const double px = scene.pixel_size();
    sp.pixel = Vec2(sp.axis.x() / px + 0.5 * scene.image_width - 0.5,
                    0.5 * scene.image_height - sp.axis.y() / px - 0.5);
    return sp;
}

// Coverage is dropped once d/softness exceeds this; the neglected logistic tail
// (< 3e-20) is far below double rounding of the union product.
inline constexpr double kCoverageCutoff = 45.0;

namespace detail {

// Signed distance to the convex hull of two screen disks (the perspective
// silhouette of a capsule: endpoint disks of different radii).
struct StadiumGrad {
    Vec2 a_bar = Vec2::Zero();
    Vec2 b_bar = Vec2::Zero();
    double ra_bar = 0.0;
    double rb_bar = 0.0;
};

inline double stadium_sdf(const Vec2& p, const Vec2& A, const Vec2& B, double ra, double rb,
                          StadiumGrad* grad = nullptr) {
    const Vec2 v = p - A;
    const Vec2 w = B - A;
    const double L2 = w.squaredNorm();
    const double b = ra - rb;
    if (L2 <= b * b + 1e-18) {
        // one endpoint disk contains the other
        if (b >= 0.0) {
            const double n = v.norm();
            if (grad && n > 0.0) {
                grad->a_bar = -v / n;
                grad->ra_bar = -1.0;
            }
            return n - ra;
        }
        const Vec2 u = p - B;
        const double n = u.norm();
        if (grad && n > 0.0) {
            grad->b_bar = -u / n;
            grad->rb_bar = -1.0;
        }
        return n - rb;
    }
    const double a = std::sqrt(L2 - b * b);
    const double dot_vw = v.dot(w);
    const double crs = w.x() * v.y() - w.y() * v.x();
    const double acrs = std::abs(crs);
    if (a * dot_vw < b * acrs) {
        const double n = v.norm();
        if (grad && n > 0.0) {
            grad->a_bar = -v / n;
            grad->ra_bar = -1.0;
        }
        return n - ra;
    }
    if (a * (dot_vw - L2) > b * acrs) {
        const Vec2 u = p - B;
        const double n = u.norm();
        if (grad && n > 0.0) {
            grad->b_bar = -u / n;
            grad->rb_bar = -1.0;
        }
        return n - rb;
    }
    // tangent-edge region
    const double N = b * dot_vw + a * acrs;
    if (grad) {
        const double sg = crs > 0.0 ? 1.0 : (crs < 0.0 ? -1.0 : 0.0);
        const Vec2 perp_v(-v.y(), v.x());
        const Vec2 perp_w(-w.y(), w.x());
        const Vec2 dN_A = b * (-w - v) + (-acrs / a) * w + (a * sg) * (perp_v - perp_w);
        const Vec2 dN_B = b * v + (acrs / a) * w + (a * sg) * (-perp_v);
        grad->a_bar = dN_A / L2 + (2.0 * N / (L2 * L2)) * w;
        grad->b_bar = dN_B / L2 - (2.0 * N / (L2 * L2)) * w;
        grad->ra_bar = (dot_vw - sg * crs * b / a) / L2 - 1.0;
        grad->rb_bar = -(dot_vw - sg * crs * b / a) / L2;
    }
    return N / L2 - ra;
}

struct ProjectedCapsule {
    Vec2 a = Vec2::Zero();
    Vec2 b = Vec2::Zero();
    double ra = 0.0, rb = 0.0;
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // inclusive pixel bbox; empty if x0 > x1
    // projection context for the reverse pass
    double dz0 = 1.0, dz1 = 1.0;
    int hand = 0;
    int capsule = 0;
};

inline std::vector<ProjectedCapsule> project_capsules(const SceneConfig& scene,
                                                      const std::vector<PosedHand>& hands) {
    std::vector<ProjectedCapsule> out;
    const double px = scene.pixel_size();
    const double pad = kCoverageCutoff * scene.softness;
    for (std::size_t h = 0; h < hands.size(); ++h) {
        for (std::size_t c = 0; c < hands[h].capsules.size(); ++c) {
            const auto& cap = hands[h].capsules[c];
            ScreenPoint s0, s1;
            try {
                s0 = project_point(scene, cap.p0);
                s1 = project_point(scene, cap.p1);
            } catch (const numeric_error& e) {
                throw numeric_error("hand " + std::to_string(h) + " capsule " + std::to_string(c) +
                                    ": " + e.what());
            }
            ProjectedCapsule pc;
            pc.a = s0.axis;
            pc.b = s1.axis;
            pc.dz0 = cap.p0.z() - scene.light_position.z();
            pc.dz1 = cap.p1.z() - scene.light_position.z();
            pc.ra = cap.radius * scene.screen_distance / pc.dz0;
            pc.rb = cap.radius * scene.screen_distance / pc.dz1;
            pc.hand = static_cast<int>(h);
            pc.capsule = static_cast<int>(c);
            const double lox = std::min(pc.a.x() - pc.ra, pc.b.x() - pc.rb) - pad;
            const double hix = std::max(pc.a.x() + pc.ra, pc.b.x() + pc.rb) + pad;
            const double loy = std::min(pc.a.y() - pc.ra, pc.b.y() - pc.rb) - pad;
            const double hiy = std::max(pc.a.y() + pc.ra, pc.b.y() + pc.rb) + pad;
            // screen y decreases with pixel row
            pc.x0 = std::max(0, static_cast<int>(std::floor(lox / px + 0.5 * scene.image_width - 0.5)));
            pc.x1 = std::min(scene.image_width - 1,
                             static_cast<int>(std::ceil(hix / px + 0.5 * scene.image_width - 0.5)));
            pc.y0 = std::max(0, static_cast<int>(std::floor(0.5 * scene.image_height - hiy / px - 0.5)));
            pc.y1 = std::min(scene.image_height - 1,
                             static_cast<int>(std::ceil(0.5 * scene.image_height - loy / px - 0.5)));
            out.push_back(pc);
        }
    }
    return out;
}

inline constexpr std::size_t kRowChunk = 16;

}  // namespace detail

// Soft shadow coverage of the posed hands: per pixel, capsule coverages
// alpha = logistic(-d / softness) are combined with the smooth union
// 1 - prod(1 - alpha_i), in fixed capsule order.
inline SoftMask render_soft(const SceneConfig& scene, const std::vector<PosedHand>& hands,
                            int threads = 0) {
    scene.validate();
    const auto caps = detail::project_capsules(scene, hands);
    SoftMask img(scene.image_width, scene.image_height, 0.0);
    const double inv_s = 1.0 / scene.softness;
    parallel_chunks(
        static_cast<std::size_t>(scene.image_height), detail::kRowChunk, threads,
        [&](std::size_t, std::size_t row0, std::size_t row1) {
            std::vector<const detail::ProjectedCapsule*> row_caps;
            for (std::size_t j = row0; j < row1; ++j) {
                const int jy = static_cast<int>(j);
                row_caps.clear();
                for (const auto& pc : caps)
                    if (pc.y0 <= jy && jy <= pc.y1 && pc.x0 <= pc.x1) row_caps.push_back(&pc);
                if (row_caps.empty()) continue;
                const double v = scene.pixel_center_v(jy);
                for (int i = 0; i < scene.image_width; ++i) {
                    const Vec2 p(scene.pixel_center_u(i), v);
                    double prod = 1.0;
                    for (const auto* pc : row_caps) {
                        if (i < pc->x0 || i > pc->x1) continue;
                        const double d = detail::stadium_sdf(p, pc->a, pc->b, pc->ra, pc->rb);
                        const double x = d * inv_s;
                        if (x >= kCoverageCutoff) continue;
                        const double alpha = 1.0 / (1.0 + std::exp(x));
                        prod *= 1.0 - alpha;
                    }
                    img.at(i, jy) = 1.0 - prod;
                }
            }
        });
    return img;
}

inline ShadowMask binarize(const SoftMask& soft, double threshold) {
    require(threshold > 0.0 && threshold < 1.0, "binarize threshold must be in (0, 1)");
    ShadowMask m(soft.width, soft.height);
    for (std::size_t i = 0; i < soft.size(); ++i) m.data[i] = soft.data[i] >= threshold ? 1 : 0;
    return m;
}

// Pose gradients from an adjoint image (dL/d coverage per pixel). Chunks are
// reduced in fixed order, so the result does not depend on the thread count.
inline std::vector<PoseGrad> render_vjp(const SceneConfig& scene,
                                        const std::vector<PosedHand>& hands,
                                        const Image<double>& adjoint, int threads = 0) {
    scene.validate();
    require_same_shape(adjoint.width, adjoint.height, scene.image_width, scene.image_height,
                       "render_vjp adjoint");
    const auto caps = detail::project_capsules(scene, hands);
    const double inv_s = 1.0 / scene.softness;

    struct CapAdj {
        Vec2 a_bar = Vec2::Zero();
        Vec2 b_bar = Vec2::Zero();
        double ra_bar = 0.0, rb_bar = 0.0;
    };
    const std::size_t nrows = static_cast<std::size_t>(scene.image_height);
    const std::size_t nchunks = (nrows + detail::kRowChunk - 1) / detail::kRowChunk;
    std::vector<std::vector<CapAdj>> chunk_adj(nchunks, std::vector<CapAdj>(caps.size()));

    parallel_chunks(
        nrows, detail::kRowChunk, threads,
        [&](std::size_t chunk, std::size_t row0, std::size_t row1) {
            auto& acc = chunk_adj[chunk];
            std::vector<const detail::ProjectedCapsule*> row_caps;
            struct Entry {
                std::size_t cap_index;  // into caps
                double alpha;
            };
            std::vector<Entry> entries;
            std::vector<double> suffix;
            for (std::size_t j = row0; j < row1; ++j) {
                const int jy = static_cast<int>(j);
                row_caps.clear();
                for (const auto& pc : caps)
                    if (pc.y0 <= jy && jy <= pc.y1 && pc.x0 <= pc.x1) row_caps.push_back(&pc);
                if (row_caps.empty()) continue;
                const double v = scene.pixel_center_v(jy);
                for (int i = 0; i < scene.image_width; ++i) {
                    const double abar_pixel = adjoint.at(i, jy);
                    const Vec2 p(scene.pixel_center_u(i), v);
                    entries.clear();
                    for (const auto* pc : row_caps) {
                        if (i < pc->x0 || i > pc->x1) continue;
                        const double d = detail::stadium_sdf(p, pc->a, pc->b, pc->ra, pc->rb);
                        const double x = d * inv_s;
                        if (x >= kCoverageCutoff) continue;
                        const double alpha = 1.0 / (1.0 + std::exp(x));
                        entries.push_back({static_cast<std::size_t>(pc - caps.data()), alpha});
                    }
                    if (entries.empty() || abar_pixel == 0.0) continue;
                    // dA/dalpha_i = prod_{k != i} (1 - alpha_k), via prefix/suffix
                    // products so fully covered pixels need no division.
                    suffix.assign(entries.size() + 1, 1.0);
                    for (std::size_t k = entries.size(); k-- > 0;)
                        suffix[k] = suffix[k + 1] * (1.0 - entries[k].alpha);
                    double prefix = 1.0;
                    for (std::size_t k = 0; k < entries.size(); ++k) {
                        const double others = prefix * suffix[k + 1];
                        const double alpha = entries[k].alpha;
                        const double alpha_bar = abar_pixel * others;
                        const double d_bar = -alpha_bar * alpha * (1.0 - alpha) * inv_s;
                        if (d_bar != 0.0) {
                            const auto& pc = caps[entries[k].cap_index];
                            detail::StadiumGrad g;
                            detail::stadium_sdf(p, pc.a, pc.b, pc.ra, pc.rb, &g);
                            auto& slot = acc[entries[k].cap_index];
                            slot.a_bar += d_bar * g.a_bar;
                            slot.b_bar += d_bar * g.b_bar;
                            slot.ra_bar += d_bar * g.ra_bar;
                            slot.rb_bar += d_bar * g.rb_bar;
                        }
                        prefix *= 1.0 - alpha;
                    }
                }
            }
        });

    // reduce chunks in order, then push screen-space adjoints back through the projection
    std::vector<CapAdj> total(caps.size());
    for (const auto& chunk : chunk_adj)
        for (std::size_t c = 0; c < caps.size(); ++c) {
            total[c].a_bar += chunk[c].a_bar;
            total[c].b_bar += chunk[c].b_bar;
            total[c].ra_bar += chunk[c].ra_bar;
            total[c].rb_bar += chunk[c].rb_bar;
        }

    std::vector<PoseGrad> grads;
    grads.reserve(hands.size());
    std::vector<std::vector<PointAdjoint>> adjoints(hands.size());
    for (std::size_t c = 0; c < caps.size(); ++c) {
        const auto& pc = caps[c];
        const auto& cap = hands[static_cast<std::size_t>(pc.hand)]
                              .capsules[static_cast<std::size_t>(pc.capsule)];
        auto backproject = [&](const Vec2& s_bar, double r_bar, const Vec2& s, double r_proj,
                               double dz, const Vec3& world) {
            PointAdjoint pa;
            pa.joint = cap.joint;
            pa.world = world;
            const double m = scene.screen_distance / dz;
            pa.world_bar = Vec3(s_bar.x() * m, s_bar.y() * m,
                                -(s_bar.dot(s) + r_bar * r_proj) / dz);
            return pa;
        };
        auto& list = adjoints[static_cast<std::size_t>(pc.hand)];
        list.push_back(backproject(total[c].a_bar, total[c].ra_bar, pc.a, pc.ra, pc.dz0, cap.p0));
        list.push_back(backproject(total[c].b_bar, total[c].rb_bar, pc.b, pc.rb, pc.dz1, cap.p1));
    }
    for (std::size_t h = 0; h < hands.size(); ++h) grads.push_back(fk_vjp(hands[h], adjoints[h]));
    return grads;
}

}  // namespace shadowfit
