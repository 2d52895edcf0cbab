#include "shadowfit/rotation.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace shadowfit;

namespace {

Vec3 random_vec(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    return Vec3(n(rng), n(rng), n(rng));
}

}  // namespace

TEST_CASE("exp_so3 matches axis-aligned rotations") {
    const Mat3 rz = exp_so3(Vec3(0.0, 0.0, M_PI / 2.0));
    CHECK((rz * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-12);
    CHECK((rz * Vec3::UnitY() + Vec3::UnitX()).norm() < 1e-12);

    const Mat3 rx = exp_so3(Vec3(M_PI, 0.0, 0.0));
    CHECK((rx * Vec3::UnitY() + Vec3::UnitY()).norm() < 1e-12);

    CHECK((exp_so3(Vec3::Zero()) - Mat3::Identity()).norm() == 0.0);
}

TEST_CASE("exp_so3 produces orthonormal matrices") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        const Mat3 r = exp_so3(random_vec(rng, 1.5));
        CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);
        CHECK(r.determinant() == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("log_so3 inverts exp_so3") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        std::uniform_real_distribution<double> u(0.0, M_PI - 1e-3);
        Vec3 axis = random_vec(rng, 1.0);
        if (axis.norm() < 1e-6) continue;
        axis.normalize();
        const Vec3 v = u(rng) * axis;
        const Vec3 back = log_so3(exp_so3(v));
        CHECK((back - v).norm() < 1e-9);
    }
    // near-pi rotations
    for (int i = 0; i < 100; ++i) {
        Vec3 axis = random_vec(rng, 1.0);
        if (axis.norm() < 1e-6) continue;
        axis.normalize();
        const Vec3 v = (M_PI - 1e-5) * axis;
        const Mat3 r = exp_so3(v);
        CHECK((exp_so3(log_so3(r)) - r).norm() < 1e-7);
    }
}

TEST_CASE("left_jacobian relates axis-angle perturbations to rotation derivatives") {
    // d/dh exp(v + h dv) at h=0 equals hat(J_l(v) dv) * exp(v)
    std::mt19937_64 rng(13);
    const double h = 1e-6;
    for (int i = 0; i < 100; ++i) {
        const Vec3 v = random_vec(rng, 1.0);
        const Vec3 dv = random_vec(rng, 1.0);
        const Mat3 fd = (exp_so3(v + h * dv) - exp_so3(v - h * dv)) / (2.0 * h);
        const Mat3 ana = hat(left_jacobian(v) * dv) * exp_so3(v);
        CHECK((fd - ana).norm() < 1e-6);
    }
}

TEST_CASE("left_jacobian small-angle fallback is continuous") {
    const Vec3 tiny(1e-7, -2e-7, 5e-8);
    const Mat3 a = left_jacobian(tiny);
    const Mat3 b = left_jacobian(Vec3(1e-5, -2e-5, 5e-6));
    CHECK((a - Mat3::Identity()).norm() < 1e-6);
    CHECK((b - Mat3::Identity()).norm() < 1e-4);
}

TEST_CASE("wrap_axis_angle preserves the rotation and bounds the magnitude") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 200; ++i) {
        Vec3 axis = random_vec(rng, 1.0);
        if (axis.norm() < 1e-6) continue;
        axis.normalize();
        std::uniform_real_distribution<double> u(0.0, 20.0);
        const Vec3 v = u(rng) * axis;
        const Vec3 w = wrap_axis_angle(v);
        CHECK(w.norm() < 2.0 * M_PI);
        CHECK((exp_so3(w) - exp_so3(v)).norm() < 1e-9);
    }
    const Vec3 small(0.1, 0.2, -0.3);
    CHECK(wrap_axis_angle(small) == small);
}
