#include "shadowfit/renderer.hpp"
#include "shadowfit/io.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace shadowfit;

namespace {

// A dangling one-joint hand whose single capsule is placed directly in world
// coordinates.
PosedHand probe_hand(const Vec3& p0, const Vec3& p1, double radius) {
    PosedHand h;
    h.joints.resize(1);
    PosedCapsule c;
    c.p0 = c.local_p0 = p0;
    c.p1 = c.local_p1 = p1;
    c.radius = radius;
    c.joint = 0;
    h.capsules.push_back(c);
    return h;
}

std::vector<PosedHand> two_default_hands(std::uint64_t seed) {
    const HandRig right = default_rig();
    const HandRig left = right.mirrored();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    auto pose = [&](Side side, double x) {
        HandPose p = HandPose::rest(side);
        p.global_orient = 0.3 * Vec3(n(rng), n(rng), n(rng));
        for (auto& v : p.joint_rotations) v = 0.15 * Vec3(n(rng), n(rng), n(rng));
        p.wrist_translation = Vec3(x, 0.05 * n(rng), 1.3);
        return p;
    };
    return {forward_kinematics(left, pose(Side::Left, -0.18)),
            forward_kinematics(right, pose(Side::Right, 0.18))};
}

}  // namespace

TEST_CASE("projection follows similar triangles") {
    SceneConfig scene;
    scene.light_position = Vec3(0.1, -0.2, 0.3);
    const ScreenPoint sp = project_point(scene, Vec3(0.4, 0.1, 1.8));
    CHECK(sp.axis.x() == Catch::Approx(0.5).margin(1e-15));
    CHECK(sp.axis.y() == Catch::Approx(0.5).margin(1e-15));
    CHECK(sp.screen.x() == Catch::Approx(0.6).margin(1e-15));
    CHECK(sp.screen.y() == Catch::Approx(0.3).margin(1e-15));
    CHECK(sp.pixel.x() == Catch::Approx(191.5).margin(1e-12));
    CHECK(sp.pixel.y() == Catch::Approx(63.5).margin(1e-12));
}

TEST_CASE("projection rejects points outside the light-to-screen slab") {
    SceneConfig scene;
    CHECK_THROWS_AS(project_point(scene, Vec3(0.0, 0.0, 0.0)), numeric_error);
    CHECK_THROWS_AS(project_point(scene, Vec3(0.0, 0.0, -1.0)), numeric_error);
    CHECK_THROWS_AS(project_point(scene, Vec3(0.0, 0.0, 2.6)), numeric_error);
    CHECK_NOTHROW(project_point(scene, Vec3(0.0, 0.0, 2.5)));
}

TEST_CASE("stadium distance matches a dense disk sweep outside the hull") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        const Vec2 A(u(rng), u(rng));
        const Vec2 B = A + Vec2(0.2 + 0.8 * std::abs(u(rng)), 0.6 * u(rng));
        const double ra = 0.05 + 0.2 * std::abs(u(rng));
        const double rb = 0.05 + 0.2 * std::abs(u(rng));
        const Vec2 p(u(rng) * 3.0, u(rng) * 3.0);
        const double d = detail::stadium_sdf(p, A, B, ra, rb);
        if (d <= 1e-3) continue;  // oracle only valid outside
        double best = std::numeric_limits<double>::infinity();
        const int steps = 4000;
        for (int k = 0; k <= steps; ++k) {
            const double t = static_cast<double>(k) / steps;
            const Vec2 c = A + t * (B - A);
            const double r = ra + t * (rb - ra);
            best = std::min(best, (p - c).norm() - r);
        }
        CHECK(d == Catch::Approx(best).margin(1e-5));
    }
}

TEST_CASE("stadium gradient matches finite differences") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-6;
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        Vec2 A(u(rng), u(rng));
        Vec2 B(u(rng), u(rng));
        double ra = 0.05 + 0.3 * std::abs(u(rng));
        double rb = 0.05 + 0.3 * std::abs(u(rng));
        const Vec2 p(2.0 * u(rng), 2.0 * u(rng));
        detail::StadiumGrad g;
        const double d0 = detail::stadium_sdf(p, A, B, ra, rb, &g);
        (void)d0;
        auto fd = [&](double* slot) {
            const double orig = *slot;
            *slot = orig + h;
            const double up = detail::stadium_sdf(p, A, B, ra, rb);
            *slot = orig - h;
            const double dn = detail::stadium_sdf(p, A, B, ra, rb);
            *slot = orig;
            return (up - dn) / (2.0 * h);
        };
        // Skip regime boundaries, where one-sided FD straddles the branch.
        detail::StadiumGrad g2;
        detail::stadium_sdf(p + Vec2(5 * h, 5 * h), A, B, ra, rb, &g2);
        const bool same_branch = (g2.ra_bar == 0.0) == (g.ra_bar == 0.0) &&
                                 (g2.rb_bar == 0.0) == (g.rb_bar == 0.0);
        if (!same_branch) continue;
        ++checked;
        CHECK(g.a_bar.x() == Catch::Approx(fd(&A.x())).margin(1e-4));
        CHECK(g.a_bar.y() == Catch::Approx(fd(&A.y())).margin(1e-4));
        CHECK(g.b_bar.x() == Catch::Approx(fd(&B.x())).margin(1e-4));
        CHECK(g.b_bar.y() == Catch::Approx(fd(&B.y())).margin(1e-4));
        CHECK(g.ra_bar == Catch::Approx(fd(&ra)).margin(1e-4));
        CHECK(g.rb_bar == Catch::Approx(fd(&rb)).margin(1e-4));
    }
    CHECK(checked >= 30);
}

// With the default scene the pixel grid lives on exact powers of two, so a
// sphere tangent to a pixel center is representable without rounding.
TEST_CASE("coverage is exactly one half on the silhouette boundary") {
    SceneConfig scene;  // 256x256, extent 2 -> pixel size 2/256
    const double px = scene.pixel_size();
    CHECK(px == 0.0078125);
    const double u = scene.pixel_center_u(159);  // 31.5 * px
    const double v = scene.pixel_center_v(100);  // 27.5 * px
    const double R = 32.0 * px;                  // 0.25 exactly

    const auto sphere = probe_hand(Vec3(u - R, v, 2.5), Vec3(u - R, v, 2.5), R);
    const SoftMask soft = render_soft(scene, {sphere});
    CHECK(soft.at(159, 100) == 0.5);

    const ShadowMask mask = binarize(soft, scene.binarize_threshold);
    CHECK(mask.at(159, 100) == 1);  // boundary pixels count as covered
}

TEST_CASE("two half-covering silhouettes union to exactly three quarters") {
    SceneConfig scene;
    const double px = scene.pixel_size();
    const double u = scene.pixel_center_u(159);
    const double v = scene.pixel_center_v(100);
    const double R = 32.0 * px;
    const auto s1 = probe_hand(Vec3(u - R, v, 2.5), Vec3(u - R, v, 2.5), R);
    const auto s2 = probe_hand(Vec3(u + R, v, 2.5), Vec3(u + R, v, 2.5), R);
    const SoftMask soft = render_soft(scene, {s1, s2});
    CHECK(soft.at(159, 100) == 0.75);
}

TEST_CASE("coverage vanishes exactly beyond the cutoff band") {
    SceneConfig scene;
    const auto sphere = probe_hand(Vec3(0.0, 0.0, 2.5), Vec3(0.0, 0.0, 2.5), 0.05);
    const SoftMask soft = render_soft(scene, {sphere});
    // cutoff reach: 0.05 + 45 * 0.01 = 0.5 m from the axis
    CHECK(soft.at(128, 128) > 0.98);
    CHECK(soft.at(0, 0) == 0.0);
    CHECK(soft.at(250, 128) == 0.0);
}

TEST_CASE("binarize uses an inclusive threshold") {
    SoftMask soft(2, 1, 0.0);
    soft.at(0, 0) = 0.5;
    soft.at(1, 0) = std::nextafter(0.5, 0.0);
    const ShadowMask m = binarize(soft, 0.5);
    CHECK(m.at(0, 0) == 1);
    CHECK(m.at(1, 0) == 0);
    CHECK_THROWS_AS(binarize(soft, 0.0), validation_error);
    CHECK_THROWS_AS(binarize(soft, 1.0), validation_error);
}

TEST_CASE("rendering is bitwise deterministic across thread counts") {
    SceneConfig scene;
    const auto hands = two_default_hands(71);
    const SoftMask a = render_soft(scene, hands, 1);
    const SoftMask b = render_soft(scene, hands, 2);
    const SoftMask c = render_soft(scene, hands, 8);
    const SoftMask d = render_soft(scene, hands, 1);
    REQUIRE(a.size() == b.size());
    CHECK(std::equal(a.data.begin(), a.data.end(), b.data.begin()));
    CHECK(std::equal(a.data.begin(), a.data.end(), c.data.begin()));
    CHECK(std::equal(a.data.begin(), a.data.end(), d.data.begin()));
}

TEST_CASE("projected capsule bounding boxes contain all coverage") {
    SceneConfig scene;
    scene.image_width = scene.image_height = 128;
    const auto hands = two_default_hands(83);
    const SoftMask soft = render_soft(scene, hands);
    const auto projected = detail::project_capsules(scene, hands);
    for (int y = 0; y < soft.height; ++y) {
        for (int x = 0; x < soft.width; ++x) {
            if (soft.at(x, y) == 0.0) continue;
            bool inside_some = false;
            for (const auto& pc : projected)
                if (x >= pc.x0 && x <= pc.x1 && y >= pc.y0 && y <= pc.y1) {
                    inside_some = true;
                    break;
                }
            CHECK(inside_some);
            if (!inside_some) return;
        }
    }
}

TEST_CASE("renderer adjoint matches finite differences through the kinematics") {
    SceneConfig scene;
    scene.image_width = scene.image_height = 48;
    const HandRig rig = default_rig();
    std::mt19937_64 rng(91);
    std::normal_distribution<double> n(0.0, 1.0);
    HandPose pose = HandPose::rest(Side::Right);
    pose.global_orient = Vec3(0.2, -0.3, 0.1);
    for (auto& v : pose.joint_rotations) v = 0.1 * Vec3(n(rng), n(rng), n(rng));
    pose.wrist_translation = Vec3(0.02, -0.01, 1.2);

    Image<double> weight(scene.image_width, scene.image_height, 0.0);
    for (auto& w : weight.data) w = n(rng);
    auto value = [&](const HandPose& p) {
        const SoftMask soft = render_soft(scene, {forward_kinematics(rig, p)});
        double acc = 0.0;
        for (std::size_t i = 0; i < soft.size(); ++i) acc += weight.data[i] * soft.data[i];
        return acc;
    };

    const auto grads =
        render_vjp(scene, {forward_kinematics(rig, pose)}, weight, 1);
    REQUIRE(grads.size() == 1);

    const double h = 1e-5;
    auto check_coord = [&](double* slot, double expect) {
        const double orig = *slot;
        *slot = orig + h;
        const double up = value(pose);
        *slot = orig - h;
        const double dn = value(pose);
        *slot = orig;
        const double fd = (up - dn) / (2.0 * h);
        CHECK(expect == Catch::Approx(fd).margin(5e-4 * std::max(1.0, std::abs(fd))));
    };
    for (int k = 0; k < 3; ++k) {
        check_coord(&pose.wrist_translation[k], grads[0].wrist_translation[k]);
        check_coord(&pose.global_orient[k], grads[0].global_orient[k]);
    }
    for (std::size_t j = 0; j < pose.joint_rotations.size(); j += 5)
        for (int k = 0; k < 3; ++k)
            check_coord(&pose.joint_rotations[j][k], grads[0].joint_rotations[j][k]);
}
